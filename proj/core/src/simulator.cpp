#include "gora/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "gora/errors.hpp"

namespace gora {

void SimConfig::validate() const {
  if (n < 1) throw DomainError(fmt::format("simulator: n must be >= 1 (got {})", n));
  if (b < 0 || gamma < 0) throw DomainError("simulator: b and Gamma must be non-negative");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError(fmt::format("simulator: tau must lie in (0, 1) (got {})", tau));
  if (!(d > 0.0)) throw DomainError("simulator: slot duration must be positive");
  if (warmup < 0 || horizon <= warmup) throw DomainError("simulator: need horizon > warmup >= 0");
  if (ps_window < 0 || batches < 1) throw DomainError("simulator: ps_window must be >= 0 and batches >= 1");
}

std::string to_string(SlotEvent event) {
  switch (event) {
    case SlotEvent::idle: return "idle";
    case SlotEvent::success: return "success";
    case SlotEvent::collision: return "collision";
  }
  return "?";
}

std::uint64_t fnv1a_update(std::uint64_t hash, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xffU;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Engine::Engine(const SimConfig& config) : config_(config) {
  config_.validate();
  const auto n = static_cast<std::size_t>(config_.n);
  reset_.assign(n, -config_.gamma);
  rng_.reserve(n);
  active_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng_.push_back(SplitMix64::substream(config_.seed, i));
    active_.push_back(static_cast<int>(i));
  }
}

SlotOutcome Engine::step() {
  const std::int64_t l = slot_;
  while (backoff_head_ < backoff_.size() && backoff_[backoff_head_].first <= l) {
    const int node = backoff_[backoff_head_++].second;
    active_.insert(std::lower_bound(active_.begin(), active_.end(), node), node);
  }
  if (backoff_head_ > 4096 && 2 * backoff_head_ > backoff_.size()) {
    backoff_.erase(backoff_.begin(), backoff_.begin() + static_cast<std::ptrdiff_t>(backoff_head_));
    backoff_head_ = 0;
  }

  SlotOutcome out;
  out.slot = l;
  out.active = static_cast<int>(active_.size());
  int last = -1;
  for (int node : active_) {
    if (rng_[static_cast<std::size_t>(node)].uniform() < config_.tau) {
      ++out.transmitters;
      last = node;
    }
  }
  if (out.transmitters == 0) {
    out.event = SlotEvent::idle;
  } else if (out.transmitters > 1) {
    out.event = SlotEvent::collision;
  } else {
    out.event = SlotEvent::success;
    out.winner = last;
    auto& reset = reset_[static_cast<std::size_t>(last)];
    out.winner_previous_reset = reset;
    reset = l + 1;
    active_.erase(std::lower_bound(active_.begin(), active_.end(), last));
    backoff_.emplace_back(l + 1 + config_.gamma, last);
  }
  ++slot_;
  return out;
}

std::int64_t Engine::true_age(int node) const {
  return config_.b + 1 + slot_ - reset_[static_cast<std::size_t>(node)];
}

std::int64_t Engine::trunc_age(int node) const {
  return std::min(true_age(node), config_.b + config_.gamma + 1);
}

bool Engine::is_active(int node) const { return slot_ - reset_[static_cast<std::size_t>(node)] >= config_.gamma; }

namespace {

// Per-node penalty bookkeeping: each node's measured slots are accounted in
// runs of consecutive ages, closed at its successes and at batch boundaries.
class PenaltyLedger {
 public:
  PenaltyLedger(const SimConfig& c, const GoalFunction& h)
      : b_(c.b), d_(c.d), h_(h), from_(static_cast<std::size_t>(c.n), c.warmup) {}

  void close_run(int node, std::int64_t last_slot, std::int64_t reset) {
    auto& from = from_[static_cast<std::size_t>(node)];
    if (last_slot >= from) {
      const std::int64_t a0 = b_ + 1 + from - reset;
      const std::int64_t a1 = a0 + (last_slot - from);
      grow(a1 + 2);
      diff_[static_cast<std::size_t>(a0)] += 1;
      diff_[static_cast<std::size_t>(a1 + 1)] -= 1;
      batch_sum_ += prefix_[static_cast<std::size_t>(a1 + 1)] - prefix_[static_cast<std::size_t>(a0)];
    }
    from = std::max(from, last_slot + 1);
  }

  double take_batch_sum() { return std::exchange(batch_sum_, 0.0); }

  std::vector<std::uint64_t> histogram() const {
    std::vector<std::uint64_t> out;
    std::int64_t run = 0;
    for (std::int64_t v : diff_) {
      run += v;
      out.push_back(static_cast<std::uint64_t>(run));
    }
    while (!out.empty() && out.back() == 0) out.pop_back();
    return out;
  }

 private:
  void grow(std::int64_t size) {
    while (static_cast<std::int64_t>(diff_.size()) < size) diff_.push_back(0);
    while (static_cast<std::int64_t>(prefix_.size()) < size) {
      const auto k = static_cast<std::int64_t>(prefix_.size()) - 1;
      prefix_.push_back(prefix_.back() + h_.slot_penalty(k, d_));
    }
  }

  std::int64_t b_;
  double d_;
  const GoalFunction& h_;
  std::vector<std::int64_t> from_;  // first slot of the node's open run
  std::vector<std::int64_t> diff_;
  std::vector<double> prefix_{0.0};  // prefix_[k] = sum of slot penalties of ages < k
  double batch_sum_ = 0.0;
};

}  // namespace

SimStats run(const SimConfig& config, const GoalFunction& h, const EventSink& sink) {
  config.validate();
  Engine engine(config);
  PenaltyLedger ledger(config, h);
  SimStats st;
  st.measured_slots = config.horizon - config.warmup;
  st.ps_window = config.ps_window > 0 ? config.ps_window : std::max<std::int64_t>(1, st.measured_slots / 100);
  st.active_count_histogram.assign(static_cast<std::size_t>(config.n) + 1, 0);
  st.digest = kFnvOffset;

  const std::int64_t batches = std::min<std::int64_t>(config.batches, st.measured_slots);
  std::vector<double> batch_means;
  std::int64_t batch_index = 0;
  auto batch_end = [&](std::int64_t k) { return config.warmup + (k + 1) * st.measured_slots / batches; };
  auto close_batch = [&](std::int64_t end) {
    for (int i = 0; i < config.n; ++i) ledger.close_run(i, end - 1, engine.reset_slot(i));
    const std::int64_t start = config.warmup + batch_index * st.measured_slots / batches;
    batch_means.push_back(ledger.take_batch_sum() / (static_cast<double>(end - start) * config.n));
    ++batch_index;
  };

  std::uint64_t win_success = 0, win_active = 0;
  std::int64_t win_slots = 0;
  for (std::int64_t l = 0; l < config.horizon; ++l) {
    if (batch_index < batches && l == batch_end(batch_index) && l > config.warmup) close_batch(l);
    const SlotOutcome out = engine.step();
    if (out.event == SlotEvent::success) {
      st.digest = fnv1a_update(fnv1a_update(st.digest, static_cast<std::uint64_t>(out.slot)),
                               static_cast<std::uint64_t>(out.winner));
      ledger.close_run(out.winner, l, out.winner_previous_reset);
    }
    if (sink) sink(out);
    if (l < config.warmup) continue;
    st.active_count_histogram[static_cast<std::size_t>(out.active)] += 1;
    st.active_node_slots += static_cast<std::uint64_t>(out.active);
    win_active += static_cast<std::uint64_t>(out.active);
    switch (out.event) {
      case SlotEvent::idle: ++st.idles; break;
      case SlotEvent::collision: ++st.collisions; break;
      case SlotEvent::success:
        ++st.successes;
        ++win_success;
        break;
    }
    if (++win_slots == st.ps_window) {
      if (win_active > 0) st.ps_trace.push_back(static_cast<double>(win_success) / static_cast<double>(win_active));
      win_success = win_active = 0;
      win_slots = 0;
    }
  }
  close_batch(config.horizon);

  st.aoi_histogram = ledger.histogram();
  // Incremental weighted mean: exact when every slot penalty is the same value.
  double mean = 0.0, weight = 0.0;
  for (std::size_t k = 0; k < st.aoi_histogram.size(); ++k) {
    const auto c = st.aoi_histogram[k];
    if (c == 0) continue;
    weight += static_cast<double>(c);
    mean += (static_cast<double>(c) / weight) * (h.slot_penalty(static_cast<std::int64_t>(k), config.d) - mean);
  }
  st.time_avg_penalty = mean;

  if (batch_means.size() > 1) {
    double m = 0.0;
    for (double v : batch_means) m += v;
    m /= static_cast<double>(batch_means.size());
    double ss = 0.0;
    for (double v : batch_means) ss += (v - m) * (v - m);
    const auto k = static_cast<double>(batch_means.size());
    st.stderr_penalty = std::sqrt(ss / (k - 1.0) / k);
  }
  st.empirical_ps =
      st.active_node_slots > 0 ? static_cast<double>(st.successes) / static_cast<double>(st.active_node_slots) : 0.0;
  st.no_renewals = (st.successes == 0);
  return st;
}

ShiftCheck shift_equivalence_check(const SimConfig& config, const std::vector<std::int64_t>& b_values) {
  SimConfig base = config;
  base.b = 0;
  ShiftCheck result;
  for (std::int64_t b : b_values) {
    SimConfig shifted = config;
    shifted.b = b;
    Engine e0(base), eb(shifted);
    std::uint64_t d0 = kFnvOffset, db = kFnvOffset;
    for (std::int64_t l = 0; l < config.horizon; ++l) {
      const auto o0 = e0.step();
      const auto ob = eb.step();
      if (o0.event == SlotEvent::success) d0 = fnv1a_update(fnv1a_update(d0, static_cast<std::uint64_t>(l)), static_cast<std::uint64_t>(o0.winner));
      if (ob.event == SlotEvent::success) db = fnv1a_update(fnv1a_update(db, static_cast<std::uint64_t>(l)), static_cast<std::uint64_t>(ob.winner));
      if (o0.event != ob.event || o0.winner != ob.winner) {
        return {false, fmt::format("b={}: slot {} outcome differs ({} winner {} vs {} winner {})", b, l,
                                   to_string(o0.event), o0.winner, to_string(ob.event), ob.winner)};
      }
      for (int i = 0; i < config.n; ++i) {
        if (eb.true_age(i) != e0.true_age(i) + b || eb.trunc_age(i) - b != e0.trunc_age(i)) {
          return {false, fmt::format("b={}: node {} age {} vs {} after slot {}", b, i, eb.true_age(i), e0.true_age(i), l)};
        }
      }
    }
    if (d0 != db) return {false, fmt::format("b={}: digest {:016x} vs {:016x}", b, db, d0)};
  }
  result.message = fmt::format("{} shift(s) identical over {} slots", b_values.size(), config.horizon);
  return result;
}

StationarityReport assumption1_report(const SimStats& stats, std::optional<double> predicted_ps) {
  StationarityReport rep;
  rep.predicted_ps = predicted_ps;
  rep.windows = stats.ps_trace.size();
  if (rep.windows < 10) {
    rep.insufficient_windows = true;
    rep.flag = "insufficient windows";
    return rep;
  }
  const auto k = static_cast<double>(rep.windows);
  double mean = 0.0;
  for (double v : stats.ps_trace) mean += v;
  mean /= k;
  double ss = 0.0, sxy = 0.0, sxx = 0.0;
  const double xbar = 0.5 * (k - 1.0);
  for (std::size_t i = 0; i < rep.windows; ++i) {
    const double x = static_cast<double>(i) - xbar;
    const double y = stats.ps_trace[i] - mean;
    ss += y * y;
    sxy += x * y;
    sxx += x * x;
  }
  rep.mean_ps = mean;
  rep.cv = mean > 0.0 ? std::sqrt(ss / (k - 1.0)) / mean : 0.0;
  rep.slope = sxy / sxx;
  const double resid = std::max(0.0, ss - rep.slope * sxy);
  rep.slope_stderr = std::sqrt(resid / (k - 2.0) / sxx);
  rep.drift = std::abs(rep.slope) > 3.0 * rep.slope_stderr && rep.slope_stderr > 0.0;
  if (predicted_ps && *predicted_ps > 0.0) rep.relative_gap = (mean - *predicted_ps) / *predicted_ps;
  rep.flag = rep.drift ? "drift" : "stationary";
  return rep;
}

}  // namespace gora
