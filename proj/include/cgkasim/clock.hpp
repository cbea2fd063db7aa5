#pragma once

#include "cgkasim/errors.hpp"
#include "cgkasim/random.hpp"

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace cgkasim {

// Virtual time in nanoseconds since simulation start. The simulation never
// sleeps: time advances only when the scheduler fires the next event.
using VirtualTime = uint64_t;

constexpr VirtualTime
ms_to_ns(double ms)
{
  return static_cast<VirtualTime>(ms * 1e6);
}

constexpr double
ns_to_ms(VirtualTime ns)
{
  return static_cast<double>(ns) / 1e6;
}

// Distribution of one-way link delays. Samples are always non-negative.
struct LatencyModel
{
  enum class Kind : uint8_t
  {
    constant,
    uniform,
    normal,
  };

  Kind kind = Kind::constant;
  double a_ms = 0.0; // constant: value; uniform: low; normal: mean
  double b_ms = 0.0; // uniform: high; normal: stddev

  static LatencyModel constant(double ms) { return { Kind::constant, ms, 0.0 }; }
  static LatencyModel uniform(double lo_ms, double hi_ms)
  {
    return { Kind::uniform, lo_ms, hi_ms };
  }
  static LatencyModel normal(double mean_ms, double stddev_ms)
  {
    return { Kind::normal, mean_ms, stddev_ms };
  }

  VirtualTime sample(RandomSource& rng) const;
};

// Single-threaded discrete-event scheduler. Events with equal timestamps fire
// in scheduling order, which keeps whole runs deterministic.
class Scheduler
{
public:
  VirtualTime now() const { return _now; }

  void schedule_at(VirtualTime at, std::function<void()> fn);
  void schedule_after(VirtualTime delay, std::function<void()> fn);

  // Abort with DeadlockError if the gap between consecutive events exceeds
  // this limit (0 disables the guard).
  void set_starvation_limit(VirtualTime limit) { _starvation_limit = limit; }

  // Stop cleanly once the next event lies beyond this virtual time
  // (0 disables the horizon).
  void set_horizon(VirtualTime horizon) { _horizon = horizon; }

  // When enabled, running out of events counts as a deadlock: autonomous
  // clients always have a next step scheduled, so a drained queue means the
  // simulation wedged.
  void set_drain_is_error(bool enabled) { _drain_is_error = enabled; }

  void request_stop() { _stop = true; }
  bool stop_requested() const { return _stop; }
  uint64_t events_processed() const { return _events_processed; }

  void run();

private:
  struct Event
  {
    VirtualTime at;
    uint64_t seq;
    std::function<void()> fn;
  };

  struct Later
  {
    bool operator()(const Event& a, const Event& b) const
    {
      return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> _queue;
  VirtualTime _now = 0;
  uint64_t _next_seq = 0;
  uint64_t _events_processed = 0;
  VirtualTime _starvation_limit = 0;
  VirtualTime _horizon = 0;
  bool _drain_is_error = false;
  bool _stop = false;
};

} // namespace cgkasim
