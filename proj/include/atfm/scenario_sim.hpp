#pragma once

// Monte-Carlo counterpart of the exact model: M joint trajectory samples
// (scenarios) with per-draw streams derived from (seed, scenario, flight,
// edge), so the set does not depend on how the work is split across threads.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atfm/flight_model.hpp"
#include "atfm/sector_model.hpp"

namespace atfm {

// Samples of one flight, scenario-major: row m holds scenario m.
struct FlightSamples {
  std::string flight_id;
  std::vector<std::string> points;
  std::vector<double> departure;  // M
  std::vector<double> travel;     // M x (points-1)
  std::vector<double> overflight; // M x points

  std::size_t point_count() const { return points.size(); }
  std::size_t edge_count() const { return points.size() - 1; }
  double at(std::size_t scenario, std::size_t point) const { return overflight[scenario * points.size() + point]; }
  double travel_at(std::size_t scenario, std::size_t edge) const {
    return travel[scenario * edge_count() + edge];
  }

  friend bool operator==(const FlightSamples&, const FlightSamples&) = default;
};

// One complete joint sample, materialised on demand.
struct Scenario {
  struct Flight {
    std::string flight_id;
    double departure = 0.0;
    std::vector<double> travel;
    std::vector<double> overflight;
  };
  std::vector<Flight> flights;
};

struct ScenarioSet {
  std::uint64_t master_seed = 0;
  std::size_t size = 0;
  std::vector<FlightSamples> flights;

  Scenario scenario(std::size_t m) const;
  // Column of overflight times at one route point across all scenarios.
  std::vector<double> column(std::size_t flight, std::size_t point) const;
  std::vector<double> arrivals(std::size_t flight) const { return column(flight, flights[flight].point_count() - 1); }

  friend bool operator==(const ScenarioSet&, const ScenarioSet&) = default;
};

struct SampleOptions {
  std::size_t workers = 1;
};

ScenarioSet sample_scenarios(std::span<const TrajectoryBelief> beliefs, std::size_t M, std::uint64_t master_seed,
                             SampleOptions options = {});

ScenarioSet sample_scenarios(std::span<const FlightPlan> plans, std::span<const EdgeShifts> shifts, std::size_t M,
                             std::uint64_t master_seed, SampleOptions options = {});

SectorTimeline estimate_congestion(const ScenarioSet& set, std::span<const Sector> sectors, const Slicing& slicing,
                                   double epsilon);

struct ArrivalEstimate {
  std::string flight_id;
  double mean = 0.0;
  double variance = 0.0;    // sample variance
  double half_width = 0.0;  // 3 sigma / sqrt(M)
};

std::vector<ArrivalEstimate> estimate_expected_arrivals(const ScenarioSet& set);

// One JSON object per scenario.
void write_jsonl(std::ostream& os, const ScenarioSet& set);

}  // namespace atfm
