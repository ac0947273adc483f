#pragma once

// Replays time-ordered observations against the model, keeps beliefs
// conditioned on everything seen so far, and re-runs the optimizer on
// immutable snapshots of the situation.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atfm/flight_model.hpp"
#include "atfm/optimizer.hpp"
#include "atfm/sector_model.hpp"

namespace atfm {

enum class EventKind { overflight, departure, diversion };

struct ObservationEvent {
  double timestamp = 0.0;
  std::string flight;
  std::string point;          // overflight; optional for departure
  double observed_time = 0.0; // overflight and departure
  EventKind kind = EventKind::overflight;
  std::size_t route_index = 0;  // diversion

  friend bool operator==(const ObservationEvent&, const ObservationEvent&) = default;
};

class MonitorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AirspaceState {
  std::vector<FlightPlan> plans;
  std::vector<std::vector<Observation>> observations;  // per flight
  std::vector<TrajectoryBelief> beliefs;
  std::vector<ObservationEvent> log;
  std::uint64_t version = 0;
  PropagationOptions propagation;

  static AirspaceState initial(std::vector<FlightPlan> plans, PropagationOptions propagation = {});

  std::optional<std::size_t> flight_index(std::string_view id) const;
  double last_timestamp() const;

  AirspaceSnapshot snapshot(std::span<const Sector> sectors, const Slicing& slicing) const;
};

// Applies one event; the input state is left untouched. Throws MonitorError
// for out-of-order events, unknown references, or observations that no
// longer fit the flight's route.
AirspaceState ingest(const AirspaceState& state, const ObservationEvent& event);

// Fresh state from the plans, then every logged event in order.
AirspaceState replay(const AirspaceState& initial, std::span<const ObservationEvent> events);

struct ReoptimizePolicy {
  // Events whose timestamps fall within this window of the batch's first
  // event are processed together. Zero batches equal timestamps only.
  double batch_window = 0.0;
  // Congestion change on a flagged (sector, slice) that triggers a re-run.
  double change_threshold = 0.05;
  // Otherwise re-run once this much event time has passed.
  double interval = 15.0;
};

struct ClearanceUpdate {
  std::uint64_t version = 0;
  double event_time = 0.0;
  std::size_t events_processed = 0;
  std::string trigger;  // "initial", "congestion-change", "interval"
  OptimizeStatus status = OptimizeStatus::ok;
  // Congestion of the observed situation before any new decision.
  SectorTimeline predicted;
  EvaluationReport report;
  std::vector<Clearance> clearances;
};

struct EventError {
  std::size_t index = 0;  // position in the stream, 0-based
  std::string message;
};

struct LoopOptions {
  ReoptimizePolicy policy;
  bool strict = false;
  // Sleep between batches by (event time delta / speed) seconds; 0 = off.
  double speed = 0.0;
};

struct LoopResult {
  AirspaceState state;
  std::vector<ClearanceUpdate> updates;
  std::vector<EventError> errors;
};

using EventSource = std::function<std::optional<ObservationEvent>()>;
using UpdateSink = std::function<void(const ClearanceUpdate&)>;

LoopResult run_loop(AirspaceState state, const EventSource& source, std::span<const Sector> sectors,
                    const Slicing& slicing, const OptimizerConfig& config, const LoopOptions& options = {},
                    const UpdateSink& sink = {});

LoopResult run_loop(AirspaceState state, std::span<const ObservationEvent> events, std::span<const Sector> sectors,
                    const Slicing& slicing, const OptimizerConfig& config, const LoopOptions& options = {},
                    const UpdateSink& sink = {});

}  // namespace atfm
