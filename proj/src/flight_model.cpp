#include "atfm/flight_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace atfm {

namespace {

constexpr double kBoundSlack = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double support_lower(const DistSpec& spec) {
  return std::visit(overloaded{[](const UniformSpec& u) { return u.lower; }, [](const PointSpec& p) { return p.t; }},
                    spec);
}

bool acyclic(const std::vector<RouteEdge>& edges) {
  std::map<std::string, std::vector<std::string>> out;
  std::map<std::string, int> indegree;
  for (const auto& e : edges) {
    out[e.from].push_back(e.to);
    indegree[e.to]++;
    indegree.emplace(e.from, 0);
  }
  std::vector<std::string> ready;
  for (const auto& [node, d] : indegree)
    if (d == 0) ready.push_back(node);
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto node = ready.back();
    ready.pop_back();
    ++visited;
    for (const auto& next : out[node])
      if (--indegree[next] == 0) ready.push_back(next);
  }
  return visited == indegree.size();
}

}  // namespace

PiecewisePdf make_pdf(const DistSpec& spec) {
  return std::visit(overloaded{[](const UniformSpec& u) { return uniform_pdf(u); },
                               [](const PointSpec& p) { return point_mass(p.t); }},
                    spec);
}

double mean_of(const DistSpec& spec) {
  return std::visit(overloaded{[](const UniformSpec& u) { return 0.5 * (u.lower + u.upper); },
                               [](const PointSpec& p) { return p.t; }},
                    spec);
}

BoundsViolation::BoundsViolation(std::string edge_id, double mean, double lower, double upper)
    : std::out_of_range([&] {
        std::ostringstream os;
        os << "edge " << edge_id << ": mean " << mean << " outside [" << lower << ", " << upper << "]";
        return os.str();
      }()),
      edge_id_(std::move(edge_id)) {}

FlightPlan FlightPlan::create(std::string id, DistSpec departure, double scheduled_arrival,
                              std::vector<RouteEdge> edges, std::vector<std::vector<std::string>> routes,
                              std::size_t active_route) {
  const auto fail = [&](const std::string& what) { throw std::invalid_argument("flight " + id + ": " + what); };

  if (id.empty()) throw std::invalid_argument("flight id must not be empty");
  if (!std::isfinite(scheduled_arrival)) fail("scheduled arrival must be finite");
  make_pdf(departure);  // validates the distribution
  if (routes.empty()) fail("at least one route is required");
  if (active_route >= routes.size()) fail("active route index out of range");

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : edges) {
    if (!seen.emplace(e.from, e.to).second) fail("duplicate edge " + e.id());
    make_pdf(e.travel);
    if (!(support_lower(e.travel) > 0.0)) fail("edge " + e.id() + ": travel times must be positive");
    const double mean = mean_of(e.travel);
    if (!(e.lower_bound <= mean + kBoundSlack && mean <= e.upper_bound + kBoundSlack))
      throw std::invalid_argument("flight " + id + ": " + BoundsViolation(e.id(), mean, e.lower_bound, e.upper_bound).what());
  }
  if (!acyclic(edges)) fail("route graph has a cycle");

  FlightPlan plan;
  plan.id_ = std::move(id);
  plan.departure_ = departure;
  plan.scheduled_arrival_ = scheduled_arrival;
  plan.edges_ = std::move(edges);
  plan.routes_ = std::move(routes);
  plan.active_route_ = active_route;

  const auto& first = plan.routes_.front();
  for (std::size_t r = 0; r < plan.routes_.size(); ++r) {
    const auto& route = plan.routes_[r];
    if (route.size() < 2) fail("route " + std::to_string(r) + " needs at least two points");
    if (route.front() != first.front() || route.back() != first.back())
      fail("route " + std::to_string(r) + " does not share the origin and destination");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
      const auto e = plan.edge_index(route[i], route[i + 1]);
      if (!e) fail("route " + std::to_string(r) + " uses unknown edge " + route[i] + "-" + route[i + 1]);
      idx.push_back(*e);
    }
    plan.route_edges_.push_back(std::move(idx));
  }
  return plan;
}

std::optional<std::size_t> FlightPlan::edge_index(std::string_view from, std::string_view to) const {
  for (std::size_t i = 0; i < edges_.size(); ++i)
    if (edges_[i].from == from && edges_[i].to == to) return i;
  return std::nullopt;
}

double FlightPlan::min_shift(std::size_t edge) const {
  return edges_.at(edge).lower_bound - mean_of(edges_[edge].travel);
}

double FlightPlan::max_shift(std::size_t edge) const {
  return edges_.at(edge).upper_bound - mean_of(edges_[edge].travel);
}

FlightPlan FlightPlan::with_route(std::size_t route_index) const {
  if (route_index >= routes_.size())
    throw std::out_of_range("flight " + id_ + ": route index " + std::to_string(route_index) + " out of range");
  FlightPlan next = *this;
  next.rerouted_ = rerouted_ || route_index != active_route_;
  next.active_route_ = route_index;
  return next;
}

bool FlightPlan::same_structure(const FlightPlan& other) const {
  return departure_ == other.departure_ && scheduled_arrival_ == other.scheduled_arrival_ && edges_ == other.edges_ &&
         routes_ == other.routes_ && active_route_ == other.active_route_;
}

FlightPlan reroute(const FlightPlan& plan, std::size_t route_index) { return plan.with_route(route_index); }

void check_shifts(const FlightPlan& plan, const EdgeShifts& shifts) {
  if (shifts.empty()) return;
  if (shifts.size() != plan.edges().size())
    throw std::invalid_argument("flight " + plan.id() + ": expected " + std::to_string(plan.edges().size()) +
                                " edge shifts, got " + std::to_string(shifts.size()));
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const auto& e = plan.edges()[i];
    const double mean = mean_of(e.travel) + shifts[i];
    if (!std::isfinite(shifts[i]) || mean < e.lower_bound - kBoundSlack || mean > e.upper_bound + kBoundSlack ||
        !(support_lower(e.travel) + shifts[i] > 0.0))
      throw BoundsViolation(e.id(), mean, e.lower_bound, e.upper_bound);
  }
}

std::optional<std::size_t> TrajectoryBelief::index_of(std::string_view point) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i] == point) return i;
  return std::nullopt;
}

const PiecewisePdf& TrajectoryBelief::at(std::string_view point) const {
  const auto i = index_of(point);
  if (!i) throw RouteError("point " + std::string(point) + " is not on the active route of " + flight_id);
  return point_pdfs[*i];
}

std::optional<Observation> TrajectoryBelief::anchor() const {
  if (observations.empty()) return std::nullopt;
  return observations.back();
}

TrajectoryBelief propagate(const FlightPlan& plan, const EdgeShifts& shifts,
                           std::span<const Observation> observations, const PropagationOptions& options) {
  check_shifts(plan, shifts);

  TrajectoryBelief belief;
  belief.flight_id = plan.id();
  belief.route_index = plan.active_route();
  const auto pts = plan.active_points();
  belief.points.assign(pts.begin(), pts.end());
  const auto edges = plan.active_edges();
  belief.edge_indices.assign(edges.begin(), edges.end());
  belief.shifts = shifts;
  belief.observations.assign(observations.begin(), observations.end());
  belief.observed.assign(pts.size(), std::nullopt);

  for (const auto& obs : observations) {
    const auto i = belief.index_of(obs.point);
    if (!i)
      throw RouteError("flight " + plan.id() + ": observed point " + obs.point + " is not on route " +
                       std::to_string(plan.active_route()));
    belief.observed[*i] = obs.time;  // a later observation of the same point wins
  }

  const auto project = [&](PiecewisePdf f) {
    if (options.discretize_step) return discretize(f, *options.discretize_step).pdf;
    return f;
  };
  const ConvolveOptions conv{options.discretize_step ? std::size_t(-1) : options.piece_cap};

  for (const auto e : edges) {
    const double delta = shifts.empty() ? 0.0 : shifts[e];
    auto travel = make_pdf(plan.edges()[e].travel);
    belief.edge_pdfs.push_back(delta == 0.0 ? std::move(travel) : shift(travel, delta));
  }

  belief.point_pdfs.reserve(pts.size());
  belief.point_pdfs.push_back(belief.observed[0] ? point_mass(*belief.observed[0]) : project(make_pdf(plan.departure())));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (belief.observed[i]) {
      belief.point_pdfs.push_back(point_mass(*belief.observed[i]));
    } else {
      belief.point_pdfs.push_back(project(convolve(belief.point_pdfs.back(), belief.edge_pdfs[i - 1], conv)));
    }
  }
  return belief;
}

TrajectoryBelief observe(const FlightPlan& plan, const TrajectoryBelief& belief, std::string_view point, double t,
                         const PropagationOptions& options) {
  if (belief.route_index != plan.active_route())
    throw RouteError("flight " + plan.id() + ": belief is stale after a reroute; propagate again");
  const auto i = belief.index_of(point);
  if (!i) throw RouteError("flight " + plan.id() + ": point " + std::string(point) + " is not on the active route");
  if (!std::isfinite(t)) throw std::invalid_argument("observation time must be finite");
  const auto& prior = belief.point_pdfs[*i];
  if (t < prior.lower() - options.plausibility_window || t > prior.upper() + options.plausibility_window) {
    std::ostringstream os;
    os << "flight " << plan.id() << ": observation " << t << " at point " << point << " is outside the plausible window ["
       << prior.lower() - options.plausibility_window << ", " << prior.upper() + options.plausibility_window << "]";
    throw std::out_of_range(os.str());
  }
  auto observations = belief.observations;
  observations.push_back({std::string(point), t});
  return propagate(plan, belief.shifts, observations, options);
}

}  // namespace atfm
