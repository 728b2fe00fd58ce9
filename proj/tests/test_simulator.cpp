#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "gora/errors.hpp"
#include "gora/goal.hpp"
#include "gora/renewal.hpp"
#include "gora/simulator.hpp"
#include "oracles.hpp"

using namespace gora;

namespace {

// Straight transcription of the published SplitMix64 generator.
struct ReferenceSplitMix {
  std::uint64_t x;
  std::uint64_t next() {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// Naive slot-by-slot model with explicit ages, used to replay the engine.
struct ReferenceChannel {
  SimConfig c;
  std::vector<std::int64_t> age;
  std::vector<ReferenceSplitMix> rng;

  explicit ReferenceChannel(const SimConfig& cfg) : c(cfg) {
    for (int i = 0; i < c.n; ++i) {
      age.push_back(c.b + c.gamma + 1);
      rng.push_back({ReferenceSplitMix::finalize(c.seed ^ ReferenceSplitMix::finalize(static_cast<std::uint64_t>(i) + 1))});
    }
  }

  // returns the winner, -1 for idle, -2 for collision
  int step() {
    int tx = 0, last = -1;
    for (int i = 0; i < c.n; ++i) {
      if (age[static_cast<std::size_t>(i)] < c.b + c.gamma + 1) continue;
      const double u = static_cast<double>(rng[static_cast<std::size_t>(i)].next() >> 11) * 0x1.0p-53;
      if (u < c.tau) {
        ++tx;
        last = i;
      }
    }
    for (auto& a : age) ++a;
    if (tx == 1) {
      age[static_cast<std::size_t>(last)] = c.b + 1;
      return last;
    }
    return tx == 0 ? -1 : -2;
  }
};

SimConfig config(int n, std::int64_t b, std::int64_t gamma, double tau, std::int64_t horizon, std::int64_t warmup = 0,
                 std::uint64_t seed = 1) {
  SimConfig c;
  c.n = n;
  c.b = b;
  c.gamma = gamma;
  c.tau = tau;
  c.horizon = horizon;
  c.warmup = warmup;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("SplitMix64 matches the published reference outputs") {
  SplitMix64 g(1234567);
  CHECK(g.next() == 6457827717110365317ULL);
  CHECK(g.next() == 3203168211198807973ULL);
  CHECK(g.next() == 9817491932198370423ULL);
  CHECK(g.next() == 4593380528125082431ULL);
  CHECK(g.next() == 16408922859458223821ULL);
  SplitMix64 u(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("engine replays the naive reference model slot by slot") {
  for (auto cfg : {config(5, 2, 3, 0.3, 20000), config(12, 0, 7, 0.1, 20000, 0, 9), config(1, 4, 0, 0.5, 2000)}) {
    Engine e(cfg);
    ReferenceChannel ref(cfg);
    bool same = true;
    for (std::int64_t l = 0; l < cfg.horizon && same; ++l) {
      const auto o = e.step();
      const int w = ref.step();
      const int expect = o.event == SlotEvent::success ? o.winner : (o.event == SlotEvent::idle ? -1 : -2);
      same = (w == expect);
      for (int i = 0; i < cfg.n && same; ++i) {
        same = e.true_age(i) == ref.age[static_cast<std::size_t>(i)] &&
               e.trunc_age(i) == std::min(ref.age[static_cast<std::size_t>(i)], cfg.b + cfg.gamma + 1) &&
               e.is_active(i) == (ref.age[static_cast<std::size_t>(i)] >= cfg.b + cfg.gamma + 1);
      }
      if (!same) FAIL("divergence at slot " << l);
    }
    CHECK(same);
  }
}

TEST_CASE("time-average penalty equals a direct per-slot sum") {
  const auto h = make_goal({0, 10, 40}, {{0, 0, 0.01}, {1, -0.053333333333333333, 8.8888888888888889e-4}, {0.2, 0, 0.002}});
  const auto cfg = config(6, 3, 5, 0.2, 30000, 1000, 4);
  ReferenceChannel ref(cfg);
  double sum = 0.0;
  for (std::int64_t l = 0; l < cfg.horizon; ++l) {
    if (l >= cfg.warmup) {
      for (auto a : ref.age) sum += h.slot_penalty(a, cfg.d);
    }
    ref.step();
  }
  const double direct = sum / (static_cast<double>(cfg.horizon - cfg.warmup) * cfg.n);
  const auto st = run(cfg, h);
  CHECK(st.time_avg_penalty == doctest::Approx(direct).epsilon(1e-11));
}

TEST_CASE("slot outcome examples") {
  // two nodes, tau close to 1: the first slot is a collision
  Engine e(config(2, 0, 0, 0.999999, 10));
  const auto o = e.step();
  CHECK(o.event == SlotEvent::collision);
  CHECK(o.transmitters == 2);
  CHECK(o.active == 2);
  CHECK(o.winner == -1);
  // one node always succeeds when it transmits, then backs off for Gamma slots
  Engine one(config(1, 2, 3, 0.999999, 10));
  CHECK(one.true_age(0) == 2 + 3 + 1);
  const auto s = one.step();
  CHECK(s.event == SlotEvent::success);
  CHECK(s.winner == 0);
  CHECK(one.true_age(0) == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK_FALSE(one.is_active(0));
    CHECK(one.step().event == SlotEvent::idle);
  }
  CHECK(one.is_active(0));
  CHECK(one.step().event == SlotEvent::success);
}

TEST_CASE("constant goal is reproduced exactly") {
  const auto st = run(config(10, 3, 4, 0.08, 50000, 100), make_goal({0}, {{7}}));
  CHECK(st.time_avg_penalty == 7.0);
  CHECK(st.stderr_penalty == 0.0);
}

TEST_CASE("single node matches the renewal formula") {
  const auto h = make_goal({0}, {{25, -10, 1}});
  for (auto [b, gamma, tau] : {std::tuple{0, 0, 0.3}, std::tuple{2, 5, 0.6}, std::tuple{6, 1, 0.15}}) {
    const auto st = run(config(1, b, gamma, tau, 400000, 1000, 3), h);
    const auto ch = channel_with_ps(1, tau, gamma, tau, PsSource::external);
    const double L = expected_penalty(h, {double(b), tau, double(gamma), 1.0}, ch).value;
    CHECK(std::abs(st.time_avg_penalty - L) <= 4 * st.stderr_penalty);
    const double se = std::sqrt(tau * (1 - tau) / static_cast<double>(st.active_node_slots));
    CHECK(std::abs(st.empirical_ps - tau) <= 4 * se);
  }
}

TEST_CASE("slotted ALOHA success probability matches the binomial formula") {
  for (auto [n, tau] : {std::pair{10, 0.1}, std::pair{50, 0.02}, std::pair{5, 0.4}}) {
    const std::int64_t slots = 200000;
    const auto st = run(config(n, 0, 0, tau, slots, 0, 11), make_goal({0}, {{0, 1}}));
    const double q = tau * std::pow(1 - tau, n - 1);
    // successes per slot are Bernoulli(n q), independent across slots
    const double se = std::sqrt(n * q * (1 - n * q) / static_cast<double>(slots)) / n;
    CHECK(st.active_node_slots == static_cast<std::uint64_t>(n * slots));
    CHECK(std::abs(st.empirical_ps - q) <= 4 * se);
  }
}

TEST_CASE("single-node inter-success gaps are geometric (chi-square)") {
  const double tau = 0.3;
  const auto cfg = config(1, 0, 0, tau, 300000, 0, 5);
  std::vector<std::int64_t> gaps;
  std::int64_t last = -1;
  run(cfg, make_goal({0}, {{1}}), [&](const SlotOutcome& o) {
    if (o.event != SlotEvent::success) return;
    if (last >= 0) gaps.push_back(o.slot - last);
    last = o.slot;
  });
  const int bins = 15;  // gaps 1..14 and a tail bin
  std::vector<double> observed(bins, 0.0);
  for (auto g : gaps) observed[static_cast<std::size_t>(std::min<std::int64_t>(g, bins) - 1)] += 1;
  const double total = static_cast<double>(gaps.size());
  double chi2 = 0.0;
  for (int k = 1; k <= bins; ++k) {
    const double p = k < bins ? tau * std::pow(1 - tau, k - 1) : std::pow(1 - tau, bins - 1);
    const double expected = total * p;
    chi2 += (observed[static_cast<std::size_t>(k - 1)] - expected) * (observed[static_cast<std::size_t>(k - 1)] - expected) / expected;
  }
  const boost::math::chi_squared dist(bins - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 1e-3);
}

TEST_CASE("two nodes match the exact Markov chain") {
  for (auto [gamma, tau] : {std::pair{0, 0.5}, std::pair{3, 0.4}, std::pair{10, 0.7}}) {
    const auto st = run(config(2, 0, gamma, tau, 1000000, 1000, 8), make_goal({0}, {{1}}));
    const double exact = oracle::two_node_success_probability(gamma, tau);
    CHECK(st.empirical_ps == doctest::Approx(exact).epsilon(0.01));
  }
  CHECK(oracle::two_node_success_probability(0, 0.5) == doctest::Approx(0.25));
}

TEST_CASE("shifting b relabels ages and nothing else") {
  const auto cfg = config(20, 0, 10, 0.1, 20000);
  const auto r = shift_equivalence_check(cfg, {0, 5, 50});
  CHECK(r.passed);
}

TEST_CASE("runs are reproducible and seeds matter") {
  const auto h = make_goal({0}, {{25, -10, 1}});
  const auto a = run(config(8, 1, 4, 0.1, 50000, 0, 21), h);
  const auto b = run(config(8, 1, 4, 0.1, 50000, 0, 21), h);
  const auto c = run(config(8, 1, 4, 0.1, 50000, 0, 22), h);
  CHECK(a.digest == b.digest);
  CHECK(a.time_avg_penalty == b.time_avg_penalty);
  CHECK(a.digest != c.digest);
}

TEST_CASE("digest covers the successes in order") {
  const auto cfg = config(4, 0, 2, 0.2, 5000, 100, 3);
  std::uint64_t digest = kFnvOffset;
  const auto st = run(cfg, make_goal({0}, {{1}}), [&](const SlotOutcome& o) {
    if (o.event == SlotEvent::success) {
      digest = fnv1a_update(fnv1a_update(digest, static_cast<std::uint64_t>(o.slot)), static_cast<std::uint64_t>(o.winner));
    }
  });
  CHECK(st.digest == digest);
  CHECK(fnv1a_update(kFnvOffset, 0) != kFnvOffset);
}

TEST_CASE("histograms account for every measured slot") {
  const auto cfg = config(7, 2, 6, 0.15, 40000, 500, 2);
  const auto st = run(cfg, make_goal({0}, {{0, 1}}));
  const auto slots = std::accumulate(st.active_count_histogram.begin(), st.active_count_histogram.end(), std::uint64_t{0});
  const auto node_slots = std::accumulate(st.aoi_histogram.begin(), st.aoi_histogram.end(), std::uint64_t{0});
  CHECK(slots == static_cast<std::uint64_t>(cfg.horizon - cfg.warmup));
  CHECK(node_slots == static_cast<std::uint64_t>(cfg.n * (cfg.horizon - cfg.warmup)));
  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.b + 1) && k < st.aoi_histogram.size(); ++k) {
    CHECK(st.aoi_histogram[k] == 0);  // ages never drop below b + 1
  }
  CHECK(st.successes + st.collisions + st.idles == slots);
}

TEST_CASE("stationarity report") {
  auto cfg = config(10, 0, 20, 0.1, 100000, 1000, 6);
  const auto st = run(cfg, make_goal({0}, {{1}}));
  const auto rep = assumption1_report(st, 0.05);
  CHECK_FALSE(rep.insufficient_windows);
  CHECK(rep.windows == 100);  // 99000 measured slots in windows of 990
  CHECK(rep.mean_ps > 0.0);
  CHECK((rep.flag == "stationary" || rep.flag == "drift"));
  CHECK(rep.relative_gap == doctest::Approx((rep.mean_ps - 0.05) / 0.05));

  cfg.ps_window = 20000;
  const auto few = assumption1_report(run(cfg, make_goal({0}, {{1}})));
  CHECK(few.insufficient_windows);
  CHECK(few.flag == "insufficient windows");
}

TEST_CASE("invalid configurations are rejected") {
  const auto h = make_goal({0}, {{1}});
  CHECK_THROWS_AS(run(config(0, 0, 0, 0.1, 10), h), DomainError);
  CHECK_THROWS_AS(run(config(2, -1, 0, 0.1, 10), h), DomainError);
  CHECK_THROWS_AS(run(config(2, 0, 0, 1.0, 10), h), DomainError);
  CHECK_THROWS_AS(run(config(2, 0, 0, 0.1, 10, 10), h), DomainError);
}
