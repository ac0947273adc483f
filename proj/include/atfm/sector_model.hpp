#pragma once

// Sector presence, occupancy count and congestion from independent flight
// beliefs. A flight counts toward a slice when its [entry, exit] interval
// touches the slice at any moment, not only when flights overlap in time.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atfm/flight_model.hpp"

namespace atfm {

struct Sector {
  std::string id;
  int capacity = 1;
  // (entry point, exit point) pairs; a route crosses the sector when it
  // visits an entry point and later its paired exit point.
  std::vector<std::pair<std::string, std::string>> boundaries;
};

struct TimeSlice {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
};

struct Crossing {
  std::size_t entry;  // index into the route points
  std::size_t exit;
};

std::optional<Crossing> find_crossing(const Sector& sector, std::span<const std::string> route_points);

double presence_probability(const TrajectoryBelief& belief, const Sector& sector, TimeSlice slice);

// Poisson-binomial pmf over per-flight presence probabilities; size n+1.
std::vector<double> occupancy_distribution(std::span<const double> presence);
std::vector<double> occupancy_distribution(std::span<const TrajectoryBelief> beliefs, const Sector& sector,
                                           TimeSlice slice);

// P(S > capacity)
double tail_above(std::span<const double> pmf, int capacity);

double congestion_probability(std::span<const TrajectoryBelief> beliefs, const Sector& sector, TimeSlice slice);

struct Slicing {
  double width = 15.0;
  double start = 0.0;
  double end = 0.0;
};

std::vector<TimeSlice> make_slices(const Slicing& slicing);

// Horizon covering every overflight density, aligned to the slice width.
Slicing default_slicing(std::span<const TrajectoryBelief> beliefs, double width);

struct TimelineRow {
  std::string sector_id;
  double t0 = 0.0;
  double t1 = 0.0;
  double probability = 0.0;
  bool flagged = false;
  // Monte-Carlo confidence half-width; zero for exact rows.
  double half_width = 0.0;
};

struct SectorTimeline {
  double epsilon = 0.75;
  std::vector<TimelineRow> rows;

  bool any_flagged() const;
  double max_probability() const;
  // Sum over rows of max(0, p - epsilon).
  double excess() const;
  const TimelineRow* find(std::string_view sector, double t0, double t1) const;
};

SectorTimeline congestion_timeline(std::span<const TrajectoryBelief> beliefs, std::span<const Sector> sectors,
                                   const Slicing& slicing, double epsilon);

void write_csv(std::ostream& os, const SectorTimeline& timeline, bool with_half_width = false);

}  // namespace atfm
