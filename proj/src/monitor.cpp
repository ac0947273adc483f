#include "atfm/monitor.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

namespace atfm {

AirspaceState AirspaceState::initial(std::vector<FlightPlan> plans, PropagationOptions propagation) {
  AirspaceState s;
  s.propagation = propagation;
  s.observations.resize(plans.size());
  for (const auto& p : plans) s.beliefs.push_back(propagate(p, {}, {}, propagation));
  s.plans = std::move(plans);
  return s;
}

std::optional<std::size_t> AirspaceState::flight_index(std::string_view id) const {
  for (std::size_t i = 0; i < plans.size(); ++i)
    if (plans[i].id() == id) return i;
  return std::nullopt;
}

double AirspaceState::last_timestamp() const {
  return log.empty() ? -std::numeric_limits<double>::infinity() : log.back().timestamp;
}

AirspaceSnapshot AirspaceState::snapshot(std::span<const Sector> sectors, const Slicing& slicing) const {
  AirspaceSnapshot snap;
  snap.plans = plans;
  snap.observations = observations;
  snap.sectors.assign(sectors.begin(), sectors.end());
  snap.slicing = slicing;
  snap.propagation = propagation;
  return snap;
}

AirspaceState ingest(const AirspaceState& state, const ObservationEvent& event) {
  if (!std::isfinite(event.timestamp)) throw MonitorError("event timestamp must be finite");
  if (event.timestamp < state.last_timestamp())
    throw MonitorError("event at " + std::to_string(event.timestamp) + " is older than the last processed event");
  const auto f = state.flight_index(event.flight);
  if (!f) throw MonitorError("unknown flight " + event.flight);

  AirspaceState next = state;
  const auto& plan = state.plans[*f];
  const auto& belief = state.beliefs[*f];
  try {
    switch (event.kind) {
      case EventKind::departure: {
        const auto& origin = plan.active_points().front();
        if (!event.point.empty() && event.point != origin)
          throw MonitorError("departure of " + event.flight + " reported at " + event.point + ", origin is " + origin);
        next.beliefs[*f] = observe(plan, belief, origin, event.observed_time, state.propagation);
        break;
      }
      case EventKind::overflight: {
        if (event.point.empty()) throw MonitorError("overflight event without a point");
        if (!belief.index_of(event.point))
          throw MonitorError("point " + event.point + " is not on the active route of " + event.flight);
        next.beliefs[*f] = observe(plan, belief, event.point, event.observed_time, state.propagation);
        break;
      }
      case EventKind::diversion: {
        auto rerouted = reroute(plan, event.route_index);
        next.beliefs[*f] = propagate(rerouted, {}, state.observations[*f], state.propagation);
        next.plans[*f] = std::move(rerouted);
        break;
      }
    }
  } catch (const MonitorError&) {
    throw;
  } catch (const RouteError& e) {
    throw MonitorError(std::string("inconsistent with the route state: ") + e.what());
  } catch (const std::exception& e) {
    throw MonitorError(e.what());
  }
  next.observations[*f] = next.beliefs[*f].observations;
  next.log.push_back(event);
  ++next.version;
  return next;
}

AirspaceState replay(const AirspaceState& initial, std::span<const ObservationEvent> events) {
  AirspaceState s = initial;
  for (const auto& e : events) s = ingest(s, e);
  return s;
}

namespace {

ClearanceUpdate reoptimize(const AirspaceSnapshot& snapshot, const OptimizerConfig& config, std::uint64_t version,
                           double event_time, std::size_t processed, std::string trigger) {
  ClearanceUpdate u;
  u.version = version;
  u.event_time = event_time;
  u.events_processed = processed;
  u.trigger = std::move(trigger);
  u.report.timeline.epsilon = config.epsilon;
  u.predicted.epsilon = config.epsilon;
  if (snapshot.plans.empty()) return u;
  u.predicted = congestion_timeline(beliefs_for(DecisionVector::baseline(snapshot), snapshot), snapshot.sectors,
                                    snapshot.slicing, config.epsilon);
  auto result = optimize(snapshot, config);
  u.status = result.status;
  u.report = std::move(result.report);
  u.clearances = make_clearances(beliefs_for(result.best, snapshot));
  return u;
}

bool congestion_moved(const SectorTimeline& before, const SectorTimeline& after, double threshold) {
  for (std::size_t i = 0; i < std::min(before.rows.size(), after.rows.size()); ++i) {
    const auto& a = before.rows[i];
    const auto& b = after.rows[i];
    if ((a.flagged || b.flagged) && std::abs(a.probability - b.probability) > threshold) return true;
  }
  return false;
}

}  // namespace

LoopResult run_loop(AirspaceState state, const EventSource& source, std::span<const Sector> sectors,
                    const Slicing& slicing, const OptimizerConfig& config, const LoopOptions& options,
                    const UpdateSink& sink) {
  LoopResult result;
  std::future<ClearanceUpdate> pending;

  const auto flush = [&] {
    if (!pending.valid()) return;
    auto u = pending.get();
    if (sink) sink(u);
    result.updates.push_back(std::move(u));
  };
  std::size_t processed = 0;
  const auto launch = [&](double event_time, std::string trigger) {
    flush();
    // The optimizer owns its snapshot; ingestion continues meanwhile.
    pending = std::async(std::launch::async, reoptimize, state.snapshot(sectors, slicing), config, state.version,
                         event_time, processed, std::move(trigger));
  };

  const auto timeline_of = [&](const AirspaceState& s) {
    return congestion_timeline(s.beliefs, sectors, slicing, config.epsilon);
  };

  std::optional<ObservationEvent> lookahead = source();
  launch(lookahead ? lookahead->timestamp : 0.0, "initial");
  double last_run = lookahead ? lookahead->timestamp : 0.0;
  auto previous = timeline_of(state);
  std::size_t index = 0;
  double previous_batch_time = last_run;

  while (lookahead) {
    const double batch_time = lookahead->timestamp;
    std::vector<ObservationEvent> batch;
    while (lookahead && lookahead->timestamp - batch_time <= options.policy.batch_window) {
      batch.push_back(std::move(*lookahead));
      lookahead = source();
    }

    if (options.speed > 0.0 && batch_time > previous_batch_time)
      std::this_thread::sleep_for(std::chrono::duration<double>((batch_time - previous_batch_time) / options.speed));
    previous_batch_time = batch_time;

    for (const auto& event : batch) {
      try {
        state = ingest(state, event);
        ++processed;
      } catch (const MonitorError& e) {
        if (options.strict) {
          flush();
          throw;
        }
        result.errors.push_back({index, e.what()});
      }
      ++index;
    }

    auto now = timeline_of(state);
    if (congestion_moved(previous, now, options.policy.change_threshold)) {
      launch(batch_time, "congestion-change");
      last_run = batch_time;
    } else if (batch_time - last_run >= options.policy.interval) {
      launch(batch_time, "interval");
      last_run = batch_time;
    }
    previous = std::move(now);
  }
  flush();
  result.state = std::move(state);
  return result;
}

LoopResult run_loop(AirspaceState state, std::span<const ObservationEvent> events, std::span<const Sector> sectors,
                    const Slicing& slicing, const OptimizerConfig& config, const LoopOptions& options,
                    const UpdateSink& sink) {
  std::size_t next = 0;
  EventSource source = [&]() -> std::optional<ObservationEvent> {
    if (next >= events.size()) return std::nullopt;
    return events[next++];
  };
  return run_loop(std::move(state), source, sectors, slicing, config, options, sink);
}

}  // namespace atfm
