#pragma once

// Flight plans over metering points and their trajectory beliefs: each
// overflight time is the departure time plus the travel times of the edges
// before it, so its density is a chain of convolutions.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "atfm/piecewise_pdf.hpp"

namespace atfm {

enum class PointKind { ingoing, outgoing, interior };

struct MeteringPoint {
  std::string id;
  std::array<double, 3> position{};  // longitude, latitude, altitude
  PointKind kind = PointKind::interior;
};

struct PointSpec {
  double t = 0.0;

  friend bool operator==(const PointSpec&, const PointSpec&) = default;
};

using DistSpec = std::variant<UniformSpec, PointSpec>;

PiecewisePdf make_pdf(const DistSpec& spec);
double mean_of(const DistSpec& spec);

struct RouteEdge {
  std::string from;
  std::string to;
  DistSpec travel;
  double lower_bound = 0.0;
  double upper_bound = 0.0;

  std::string id() const { return from + "-" + to; }

  friend bool operator==(const RouteEdge&, const RouteEdge&) = default;
};

// A shifted edge mean left [lower_bound, upper_bound].
class BoundsViolation : public std::out_of_range {
 public:
  BoundsViolation(std::string edge_id, double mean, double lower, double upper);
  const std::string& edge_id() const { return edge_id_; }

 private:
  std::string edge_id_;
};

// Observation or reroute that does not fit the flight's current route.
class RouteError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FlightPlan {
 public:
  // Checks that the edges form a DAG, every route is a path of known edges
  // from the common origin to the common destination, and every edge mean
  // sits inside its bounds. Throws std::invalid_argument otherwise.
  static FlightPlan create(std::string id, DistSpec departure, double scheduled_arrival,
                           std::vector<RouteEdge> edges, std::vector<std::vector<std::string>> routes,
                           std::size_t active_route = 0);

  const std::string& id() const { return id_; }
  const DistSpec& departure() const { return departure_; }
  double scheduled_arrival() const { return scheduled_arrival_; }
  std::span<const RouteEdge> edges() const { return edges_; }
  std::span<const std::vector<std::string>> routes() const { return routes_; }
  std::size_t route_count() const { return routes_.size(); }
  std::size_t active_route() const { return active_route_; }
  bool rerouted() const { return rerouted_; }

  std::span<const std::string> route_points(std::size_t route) const { return routes_.at(route); }
  std::span<const std::string> active_points() const { return routes_[active_route_]; }

  // Plan edge indices along a route, in travel order.
  std::span<const std::size_t> route_edges(std::size_t route) const { return route_edges_.at(route); }
  std::span<const std::size_t> active_edges() const { return route_edges_[active_route_]; }

  std::optional<std::size_t> edge_index(std::string_view from, std::string_view to) const;

  // Admissible mean shift range for an edge.
  double min_shift(std::size_t edge) const;
  double max_shift(std::size_t edge) const;

  FlightPlan with_route(std::size_t route_index) const;

  // Equal in everything but the flight id.
  bool same_structure(const FlightPlan& other) const;

 private:
  FlightPlan() = default;

  std::string id_;
  DistSpec departure_;
  double scheduled_arrival_ = 0.0;
  std::vector<RouteEdge> edges_;
  std::vector<std::vector<std::string>> routes_;
  std::vector<std::vector<std::size_t>> route_edges_;
  std::size_t active_route_ = 0;
  bool rerouted_ = false;
};

FlightPlan reroute(const FlightPlan& plan, std::size_t route_index);

// Per plan edge (indexed like FlightPlan::edges()). Empty means no shift.
using EdgeShifts = std::vector<double>;

struct Observation {
  std::string point;
  double time = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct PropagationOptions {
  std::size_t piece_cap = kDefaultPieceCap;
  // When set, every overflight density is projected onto this grid.
  std::optional<double> discretize_step;
  // Observations must fall within this distance of the prior support.
  double plausibility_window = 60.0;
};

struct TrajectoryBelief {
  std::string flight_id;
  std::size_t route_index = 0;
  std::vector<std::string> points;
  std::vector<PiecewisePdf> point_pdfs;  // one per route point
  std::vector<PiecewisePdf> edge_pdfs;   // effective travel, one per route edge
  std::vector<std::size_t> edge_indices;
  EdgeShifts shifts;
  std::vector<Observation> observations;  // chronological
  std::vector<std::optional<double>> observed;  // per route point

  const PiecewisePdf& arrival() const { return point_pdfs.back(); }
  std::optional<std::size_t> index_of(std::string_view point) const;
  const PiecewisePdf& at(std::string_view point) const;
  std::optional<Observation> anchor() const;
};

TrajectoryBelief propagate(const FlightPlan& plan, const EdgeShifts& shifts = {},
                           std::span<const Observation> observations = {},
                           const PropagationOptions& options = {});

// Conditions on the flight having crossed `point` at time t.
TrajectoryBelief observe(const FlightPlan& plan, const TrajectoryBelief& belief, std::string_view point,
                         double t, const PropagationOptions& options = {});

// Throws BoundsViolation naming the first offending edge.
void check_shifts(const FlightPlan& plan, const EdgeShifts& shifts);

}  // namespace atfm
