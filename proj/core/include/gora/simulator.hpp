#pragma once

// Slot-level Monte Carlo simulation of n symmetric nodes on a collision channel.
//
// Node dynamics: after a success in slot l the node's discrete age is b+1 in
// slot l+1 and grows by one per slot. The node stays silent for exactly Gamma
// slots and is active from slot l+Gamma+1 on, i.e. while its age is at least
// b+Gamma+1; the truncated age saturates at that value. Every active node draws
// one uniform per slot, in ascending node order, and transmits if it is below
// tau. A slot with exactly one transmitter is a success for that node.
//
// Random numbers: node i owns a SplitMix64 stream whose initial state is
// mix64(seed ^ mix64(i + 1)), mix64 being the SplitMix64 output finalizer, so
// streams start at scrambled, effectively independent points of the cycle.
// A uniform is (x >> 11) * 2^-53.
// Success digest: 64-bit FNV-1a over (slot, winner) of every success, both as
// little-endian 64-bit integers, from slot 0 (warm-up included).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gora/goal.hpp"

namespace gora {

class SplitMix64 {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() { return mix64(state_ += kGolden); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(mix64(seed ^ mix64(index + 1)));
  }

 private:
  std::uint64_t state_;
};

struct SimConfig {
  int n = 1;
  std::int64_t b = 0;
  std::int64_t gamma = 0;
  double tau = 0.5;
  double d = 1.0;
  std::int64_t horizon = 1'000'000;  // total slots, warm-up included
  std::int64_t warmup = 0;
  std::uint64_t seed = 1;
  std::int64_t ps_window = 0;  // slots per p_s trace window; 0 = measured/100
  int batches = 64;            // batch means for the standard error

  void validate() const;
};

enum class SlotEvent { idle, success, collision };

std::string to_string(SlotEvent event);

struct SlotOutcome {
  std::int64_t slot = 0;
  SlotEvent event = SlotEvent::idle;
  int winner = -1;  // -1 unless event == success
  int transmitters = 0;
  int active = 0;
  std::int64_t winner_previous_reset = 0;
};

/// Channel dynamics only; no statistics. Deterministic given the config.
class Engine {
 public:
  explicit Engine(const SimConfig& config);

  SlotOutcome step();

  std::int64_t slot() const { return slot_; }  // next slot to be simulated
  int n() const { return config_.n; }
  std::int64_t true_age(int node) const;   // discrete age in slot()
  std::int64_t trunc_age(int node) const;  // min(true_age, b + Gamma + 1)
  bool is_active(int node) const;
  /// First slot at which the node's age equals b+1 (its last success + 1).
  std::int64_t reset_slot(int node) const { return reset_[static_cast<std::size_t>(node)]; }
  int active_count() const { return static_cast<int>(active_.size()); }
  const SimConfig& config() const { return config_; }

 private:
  SimConfig config_;
  std::int64_t slot_ = 0;
  std::vector<std::int64_t> reset_;
  std::vector<SplitMix64> rng_;
  std::vector<int> active_;  // ascending node index
  std::vector<std::pair<std::int64_t, int>> backoff_;  // (activation slot, node), FIFO
  std::size_t backoff_head_ = 0;
};

struct SimStats {
  std::int64_t measured_slots = 0;
  double time_avg_penalty = 0.0;
  double stderr_penalty = 0.0;  // batch-means standard error
  double empirical_ps = 0.0;    // successes / active node-slots
  std::vector<double> ps_trace;
  std::int64_t ps_window = 0;
  std::vector<std::uint64_t> active_count_histogram;  // index: active nodes in a slot
  std::vector<std::uint64_t> aoi_histogram;           // index: discrete age, node-slots
  std::uint64_t successes = 0;
  std::uint64_t collisions = 0;
  std::uint64_t idles = 0;
  std::uint64_t active_node_slots = 0;
  std::uint64_t digest = 0;
  bool no_renewals = false;
};

using EventSink = std::function<void(const SlotOutcome&)>;

/// Runs warm-up plus measurement. Penalties use slot_penalty(h, age, d) per node and slot.
SimStats run(const SimConfig& config, const GoalFunction& h, const EventSink& sink = {});

struct ShiftCheck {
  bool passed = true;
  std::string message;
};

/// Lockstep runs with b = 0 and each requested b under the same seed: digests and
/// every per-slot true age (shifted by b) must agree.
ShiftCheck shift_equivalence_check(const SimConfig& config, const std::vector<std::int64_t>& b_values);

struct StationarityReport {
  bool insufficient_windows = false;
  std::size_t windows = 0;
  double mean_ps = 0.0;
  double cv = 0.0;
  std::optional<double> predicted_ps;
  double relative_gap = 0.0;  // (mean_ps - predicted) / predicted
  double slope = 0.0;         // per window
  double slope_stderr = 0.0;
  bool drift = false;  // |slope| > 3 stderr
  std::string flag;    // "stationary", "drift" or "insufficient windows"
};

StationarityReport assumption1_report(const SimStats& stats, std::optional<double> predicted_ps = std::nullopt);

/// FNV-1a update used for the success digest.
std::uint64_t fnv1a_update(std::uint64_t hash, std::uint64_t value);
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

}  // namespace gora
