#include "cgkasim/clock.hpp"

#include <algorithm>
#include <string>

namespace cgkasim {

VirtualTime
LatencyModel::sample(RandomSource& rng) const
{
  double ms = 0.0;
  switch (kind) {
    case Kind::constant:
      ms = a_ms;
      break;
    case Kind::uniform:
      ms = rng.uniform_real(a_ms, b_ms);
      break;
    case Kind::normal:
      ms = a_ms + b_ms * rng.normal();
      break;
  }
  return ms_to_ns(std::max(ms, 0.0));
}

void
Scheduler::schedule_at(VirtualTime at, std::function<void()> fn)
{
  _queue.push(Event{ std::max(at, _now), _next_seq++, std::move(fn) });
}

void
Scheduler::schedule_after(VirtualTime delay, std::function<void()> fn)
{
  schedule_at(_now + delay, std::move(fn));
}

void
Scheduler::run()
{
  while (!_stop) {
    if (_queue.empty()) {
      if (_drain_is_error) {
        throw DeadlockError("event queue drained at virtual time " +
                            std::to_string(_now) + " ns with no stop requested");
      }
      return;
    }
    const VirtualTime at = _queue.top().at;
    if (_horizon != 0 && at > _horizon) {
      // the simulated window is covered; later events stay queued unfired
      _now = _horizon;
      return;
    }
    if (_starvation_limit != 0 && at > _now && at - _now > _starvation_limit) {
      throw DeadlockError("no event fired for " + std::to_string(at - _now) +
                          " ns of virtual time (limit " +
                          std::to_string(_starvation_limit) + " ns)");
    }
    // Move the handler out before popping so the event can schedule others.
    auto fn = std::move(const_cast<Event&>(_queue.top()).fn);
    _queue.pop();
    _now = at;
    _events_processed++;
    fn();
  }
}

} // namespace cgkasim
