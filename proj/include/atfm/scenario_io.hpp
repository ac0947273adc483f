#pragma once

// JSON scenario files (airspace, flight plans, run configuration) and
// JSON-lines observation event streams.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atfm/flight_model.hpp"
#include "atfm/monitor.hpp"
#include "atfm/optimizer.hpp"
#include "atfm/sector_model.hpp"

namespace atfm {

inline constexpr int kSchemaVersion = 1;

struct ScenarioConfig {
  double slice_width = 15.0;
  std::optional<std::pair<double, double>> horizon;
  double epsilon = 0.75;
  double p = 1.0;
  ConstraintMode constraint = ConstraintMode::hard;
  double soft_weight = 100.0;
  double reroute_penalty = 10.0;
  double variance_weight = 0.0;
  std::size_t samples = 100000;
  std::size_t inner_samples = 0;
  std::uint64_t seed = 1;
  std::size_t stall_window = 150;
  std::size_t max_iters = 2000;
  std::size_t piece_cap = kDefaultPieceCap;
  std::optional<double> discretize;
};

struct ScenarioFile {
  int schema_version = kSchemaVersion;
  std::vector<MeteringPoint> points;
  std::vector<Sector> sectors;
  std::vector<FlightPlan> flights;
  ScenarioConfig config;

  PropagationOptions propagation() const;
  OptimizerConfig optimizer_config() const;
  // Configured horizon, or one derived from the beliefs.
  Slicing slicing(std::span<const TrajectoryBelief> beliefs) const;
  AirspaceSnapshot snapshot() const;
};

struct Diagnostic {
  std::string path;  // JSON pointer to the offending field
  std::string message;
};

struct ScenarioCheck {
  std::optional<ScenarioFile> scenario;  // set when there are no diagnostics
  std::vector<Diagnostic> diagnostics;
  bool parse_error = false;  // malformed JSON rather than a bad value
};

// Collects every problem it can find instead of stopping at the first one.
ScenarioCheck check_scenario(std::string_view text);

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::vector<Diagnostic> diagnostics, bool parse_error);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
  bool parse_error() const { return parse_error_; }

 private:
  std::vector<Diagnostic> diagnostics_;
  bool parse_error_;
};

ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// {"timestamp": 3, "flight": "F1", "type": "departure", "time": 0}
// {"timestamp": 9, "flight": "F1", "type": "overflight", "point": "2", "time": 11.5}
// {"timestamp": 12, "flight": "F2", "type": "diversion", "route": 1}
ObservationEvent parse_event(std::string_view line);
std::string event_to_json(const ObservationEvent& event);

struct NumberedEvent {
  std::size_t line = 0;  // 1-based
  ObservationEvent event;
};

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct EventFile {
  std::vector<NumberedEvent> events;
  std::vector<LineError> errors;
};

// Blank lines and lines starting with '#' are skipped.
EventFile read_events(std::istream& in);

}  // namespace atfm
