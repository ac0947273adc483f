#include "atfm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>

#include "atfm/rng.hpp"
#include "atfm/scenario_sim.hpp"

namespace atfm {

namespace {

constexpr double kCostTolerance = 1e-9;
constexpr double kImprovement = 1e-6;
constexpr double kInitialStep = 0.2;
constexpr double kMinStep = 1e-5;
constexpr std::size_t kPolishSweeps = 200;
constexpr std::size_t kCachePerFlight = 8;

struct Candidate {
  DecisionVector decision;
  EvaluationReport report;
};

struct Variable {
  std::size_t flight;
  std::size_t edge;
  double lo;
  double hi;
};

EvaluationReport report_from_beliefs(std::span<const TrajectoryBelief> beliefs, const DecisionVector& decision,
                                     const AirspaceSnapshot& snapshot, const OptimizerConfig& config) {
  EvaluationReport r;
  const std::size_t n = beliefs.size();
  if (config.inner_samples == 0) {
    for (const auto& b : beliefs) {
      r.expected_arrivals.push_back(b.arrival().expectation());
      r.arrival_variances.push_back(b.arrival().variance());
    }
    r.timeline = congestion_timeline(beliefs, snapshot.sectors, snapshot.slicing, config.epsilon);
  } else {
    // Same seed for every candidate: common random numbers.
    const auto set = sample_scenarios(beliefs, config.inner_samples, config.seed);
    if (set.size >= 2) {
      for (const auto& est : estimate_expected_arrivals(set)) {
        r.expected_arrivals.push_back(est.mean);
        r.arrival_variances.push_back(est.variance);
      }
    } else {
      for (std::size_t f = 0; f < n; ++f) {
        r.expected_arrivals.push_back(set.arrivals(f).front());
        r.arrival_variances.push_back(0.0);
      }
    }
    r.timeline = estimate_congestion(set, snapshot.sectors, snapshot.slicing, config.epsilon);
  }

  std::vector<double> scheduled;
  for (const auto& plan : snapshot.plans) scheduled.push_back(plan.scheduled_arrival());
  r.delay_cost = delay_cost(r.expected_arrivals, scheduled, config.p);
  for (double v : r.arrival_variances) r.variance_term += v;
  r.variance_term *= config.variance_weight;

  for (std::size_t f = 0; f < n; ++f)
    if (decision.flights[f].route_index != snapshot.plans[f].active_route()) ++r.reroutes;
  r.reroute_penalty = config.reroute_penalty * static_cast<double>(r.reroutes);

  r.violation = r.timeline.excess();
  r.max_congestion = r.timeline.max_probability();
  r.feasible = !r.timeline.any_flagged();
  if (config.mode == ConstraintMode::soft) r.congestion_penalty = config.soft_weight * r.violation;
  r.total = r.delay_cost + r.variance_term + r.congestion_penalty + r.reroute_penalty;
  return r;
}

TrajectoryBelief belief_for(const AirspaceSnapshot& snapshot, std::size_t f, const FlightDecision& d) {
  const auto& base = snapshot.plans[f];
  const auto obs = snapshot.observations_of(f);
  if (d.route_index == base.active_route()) return propagate(base, d.shifts, obs, snapshot.propagation);
  return propagate(base.with_route(d.route_index), d.shifts, obs, snapshot.propagation);
}

void check_dimensions(const DecisionVector& decision, const AirspaceSnapshot& snapshot) {
  if (decision.flights.size() != snapshot.plans.size())
    throw std::invalid_argument("decision vector has " + std::to_string(decision.flights.size()) +
                                " flights, snapshot has " + std::to_string(snapshot.plans.size()));
  for (std::size_t f = 0; f < snapshot.plans.size(); ++f)
    if (decision.flights[f].route_index >= snapshot.plans[f].route_count())
      throw std::out_of_range("flight " + snapshot.plans[f].id() + ": route index out of range");
}

// Candidate evaluation with a small per-flight belief cache; a mutation
// usually touches one flight.
class Evaluator {
 public:
  Evaluator(const AirspaceSnapshot& snapshot, const OptimizerConfig& config)
      : snapshot_(snapshot), config_(config), cache_(snapshot.plans.size()) {}

  // nullopt when the candidate contradicts an observation (reroute away
  // from an observed point).
  std::optional<EvaluationReport> operator()(const DecisionVector& d) {
    std::vector<TrajectoryBelief> beliefs;
    beliefs.reserve(d.flights.size());
    try {
      for (std::size_t f = 0; f < d.flights.size(); ++f) beliefs.push_back(lookup(f, d.flights[f]));
    } catch (const RouteError&) {
      return std::nullopt;
    }
    ++count_;
    return report_from_beliefs(beliefs, d, snapshot_, config_);
  }

  std::size_t count() const { return count_; }

 private:
  const TrajectoryBelief& lookup(std::size_t f, const FlightDecision& d) {
    auto& entries = cache_[f];
    for (auto& e : entries)
      if (e.first == d) return e.second;
    if (entries.size() >= kCachePerFlight) entries.erase(entries.begin());
    entries.emplace_back(d, belief_for(snapshot_, f, d));
    return entries.back().second;
  }

  const AirspaceSnapshot& snapshot_;
  const OptimizerConfig& config_;
  std::vector<std::vector<std::pair<FlightDecision, TrajectoryBelief>>> cache_;
  std::size_t count_ = 0;
};

std::vector<Variable> active_variables(const DecisionVector& d, const AirspaceSnapshot& snapshot) {
  std::vector<Variable> vars;
  for (std::size_t f = 0; f < snapshot.plans.size(); ++f) {
    const auto& plan = snapshot.plans[f];
    for (const auto e : plan.route_edges(d.flights[f].route_index)) {
      const double lo = plan.min_shift(e);
      const double hi = plan.max_shift(e);
      if (hi > lo) vars.push_back({f, e, lo, hi});
    }
  }
  return vars;
}

bool significant(const EvaluationReport& now, const EvaluationReport& before, ConstraintMode mode) {
  if (mode == ConstraintMode::hard) {
    if (now.feasible != before.feasible) return true;
    if (!now.feasible && before.violation - now.violation > kImprovement) return true;
  }
  return before.total - now.total > kImprovement;
}

class Search {
 public:
  Search(const AirspaceSnapshot& snapshot, const OptimizerConfig& config)
      : snapshot_(snapshot), config_(config), eval_(snapshot, config), rng_(RngState::derive(config.seed, {0x0e5})) {}

  OptimizationResult run() {
    OptimizationResult result;
    auto baseline = DecisionVector::baseline(snapshot_);
    auto base_report = eval_(baseline);
    if (!base_report) throw RouteError("baseline decision contradicts the observations");
    Candidate parent{baseline, *base_report};
    best_ = parent;

    double step = kInitialStep;
    std::size_t last_improvement = 0;
    std::size_t restarts = 0;
    std::size_t iter = 0;
    for (iter = 1; iter <= config_.max_iters; ++iter) {
      std::optional<Candidate> champion;
      for (std::size_t k = 0; k < config_.offspring; ++k) {
        auto child = mutate(parent.decision, step);
        auto report = eval_(child);
        if (!report) continue;
        Candidate c{std::move(child), std::move(*report)};
        if (!champion || better(c, *champion)) champion = std::move(c);
      }
      const bool success = champion && better(*champion, parent);
      if (champion && !better(parent, *champion)) parent = std::move(*champion);
      step = success ? std::min(1.0, step * 1.5) : step * std::pow(1.5, -0.25);

      if (better(parent, best_)) {
        if (significant(parent.report, best_.report, config_.mode)) last_improvement = iter;
        best_ = parent;
      }
      record(result, iter);
      if (iter - last_improvement >= config_.stall_window) break;

      if (step < kMinStep) {
        ++restarts;
        parent = restarts % 2 == 1 ? random_candidate() : best_;
        step = kInitialStep;
      }
    }
    result.iterations = std::min(iter, config_.max_iters);

    polish();
    canonicalize();
    record(result, result.iterations + 1);

    result.best = best_.decision;
    result.report = best_.report;
    result.evaluations = eval_.count();
    result.status = (config_.mode == ConstraintMode::hard && !best_.report.feasible) ? OptimizeStatus::no_feasible_solution
                                                                                    : OptimizeStatus::ok;
    return result;
  }

 private:
  bool better(const Candidate& a, const Candidate& b) const {
    return compare_candidates(a.decision, a.report, b.decision, b.report, snapshot_, config_) < 0;
  }

  void record(OptimizationResult& result, std::size_t iter) const {
    result.history.push_back({iter, eval_.count(), best_.report.total, best_.report.violation, best_.report.feasible});
  }

  double route_rate() const {
    std::size_t with_alternatives = 0;
    for (const auto& p : snapshot_.plans) with_alternatives += p.route_count() > 1 ? 1 : 0;
    if (with_alternatives == 0) return 0.0;
    // Expensive reroutes relative to the current cost are proposed less often.
    const double base = std::min(0.5, 1.0 / static_cast<double>(with_alternatives));
    return base / (1.0 + config_.reroute_penalty / std::max(1.0, best_.report.total));
  }

  DecisionVector mutate(const DecisionVector& parent, double step) {
    DecisionVector child = parent;
    const double rate = route_rate();
    for (std::size_t f = 0; f < snapshot_.plans.size(); ++f) {
      const auto routes = snapshot_.plans[f].route_count();
      if (routes < 2 || !(rng_.uniform01() < rate)) continue;
      auto pick = static_cast<std::size_t>(rng_.uniform01() * static_cast<double>(routes - 1));
      if (pick >= child.flights[f].route_index) ++pick;
      child.flights[f].route_index = std::min(pick, routes - 1);
    }

    const auto vars = active_variables(child, snapshot_);
    if (vars.empty()) return child;
    const double pm = 1.0 / static_cast<double>(vars.size());
    bool touched = false;
    for (const auto& v : vars)
      if (rng_.uniform01() < pm) {
        perturb(child, v, step);
        touched = true;
      }
    if (!touched) {
      const auto i = std::min(vars.size() - 1, static_cast<std::size_t>(rng_.uniform01() * static_cast<double>(vars.size())));
      perturb(child, vars[i], step);
    }
    return child;
  }

  void perturb(DecisionVector& d, const Variable& v, double step) {
    double& x = d.flights[v.flight].shifts[v.edge];
    if (rng_.uniform01() < 0.1) {
      x = 0.0;
      return;
    }
    x = std::clamp(x + step * (v.hi - v.lo) * normal_(rng_), v.lo, v.hi);
  }

  Candidate random_candidate() {
    for (int attempt = 0; attempt < 16; ++attempt) {
      auto d = DecisionVector::baseline(snapshot_);
      for (std::size_t f = 0; f < snapshot_.plans.size(); ++f) {
        const auto routes = snapshot_.plans[f].route_count();
        if (routes > 1 && rng_.uniform01() < route_rate())
          d.flights[f].route_index = std::min(routes - 1, static_cast<std::size_t>(rng_.uniform01() * routes));
      }
      for (const auto& v : active_variables(d, snapshot_))
        d.flights[v.flight].shifts[v.edge] = v.lo + rng_.uniform01() * (v.hi - v.lo);
      if (auto r = eval_(d)) return {std::move(d), std::move(*r)};
    }
    return best_;
  }

  // Coordinate pattern search around the incumbent. The step halves after
  // any sweep without a significant gain, and the sweep count is capped.
  void polish() {
    double frac = 0.1;
    for (const auto& v : active_variables(best_.decision, snapshot_)) try_value(v, 0.0);
    for (std::size_t sweep = 0; frac > 1e-7 && sweep < kPolishSweeps; ++sweep) {
      const auto before = best_.report;
      for (const auto& v : active_variables(best_.decision, snapshot_)) {
        const double x = best_.decision.flights[v.flight].shifts[v.edge];
        if (!try_value(v, std::clamp(x - frac * (v.hi - v.lo), v.lo, v.hi)))
          try_value(v, std::clamp(x + frac * (v.hi - v.lo), v.lo, v.hi));
      }
      if (!significant(best_.report, before, config_.mode)) frac *= 0.5;
    }
  }

  bool try_value(const Variable& v, double value) {
    if (best_.decision.flights[v.flight].shifts[v.edge] == value) return false;
    auto d = best_.decision;
    d.flights[v.flight].shifts[v.edge] = value;
    auto r = eval_(d);
    if (!r) return false;
    Candidate c{std::move(d), std::move(*r)};
    if (!better(c, best_)) return false;
    best_ = std::move(c);
    return true;
  }

  // Structurally identical flights are interchangeable; swap their decisions
  // when the swap wins the tie-break.
  void canonicalize() {
    const auto n = snapshot_.plans.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!snapshot_.plans[i].same_structure(snapshot_.plans[j])) continue;
        if (!std::ranges::equal(snapshot_.observations_of(i), snapshot_.observations_of(j))) continue;
        if (best_.decision.flights[i] == best_.decision.flights[j]) continue;
        auto d = best_.decision;
        std::swap(d.flights[i], d.flights[j]);
        auto r = eval_(d);
        if (!r) continue;
        Candidate c{std::move(d), std::move(*r)};
        if (better(c, best_)) best_ = std::move(c);
      }
  }

  const AirspaceSnapshot& snapshot_;
  const OptimizerConfig& config_;
  Evaluator eval_;
  RngState rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Candidate best_;
};

std::vector<std::string> regulated_flights(const DecisionVector& d, const AirspaceSnapshot& snapshot) {
  std::vector<std::string> ids;
  for (std::size_t f = 0; f < d.flights.size(); ++f) {
    const auto& fd = d.flights[f];
    const bool shifted = std::any_of(fd.shifts.begin(), fd.shifts.end(), [](double x) { return x != 0.0; });
    if (shifted || fd.route_index != snapshot.plans[f].active_route()) ids.push_back(snapshot.plans[f].id());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

double total_abs_shift(const DecisionVector& d, const AirspaceSnapshot& snapshot) {
  double s = 0.0;
  for (std::size_t f = 0; f < d.flights.size(); ++f)
    for (const auto e : snapshot.plans[f].route_edges(d.flights[f].route_index))
      if (!d.flights[f].shifts.empty()) s += std::abs(d.flights[f].shifts[e]);
  return s;
}

}  // namespace

std::span<const Observation> AirspaceSnapshot::observations_of(std::size_t flight) const {
  if (flight >= observations.size()) return {};
  return observations[flight];
}

void OptimizerConfig::validate() const {
  if (!(p >= 1.0)) throw std::invalid_argument("equity exponent p must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (!(soft_weight >= 0.0) || !(reroute_penalty >= 0.0) || !(variance_weight >= 0.0))
    throw std::invalid_argument("penalty weights must be nonnegative");
  if (offspring == 0) throw std::invalid_argument("offspring count must be positive");
}

DecisionVector DecisionVector::baseline(const AirspaceSnapshot& snapshot) {
  DecisionVector d;
  for (const auto& plan : snapshot.plans) d.flights.push_back({plan.active_route(), EdgeShifts(plan.edges().size(), 0.0)});
  return d;
}

std::size_t DecisionVector::dimension() const {
  std::size_t n = 0;
  for (const auto& f : flights) n += 1 + f.shifts.size();
  return n;
}

double delay_cost(std::span<const double> expected, std::span<const double> scheduled, double p) {
  if (expected.size() != scheduled.size())
    throw std::invalid_argument("expected and scheduled arrival vectors differ in length");
  if (!(p >= 1.0)) throw std::invalid_argument("equity exponent p must be >= 1");
  double cost = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) cost += std::pow(std::abs(expected[i] - scheduled[i]), p);
  return cost;
}

std::vector<TrajectoryBelief> beliefs_for(const DecisionVector& decision, const AirspaceSnapshot& snapshot) {
  check_dimensions(decision, snapshot);
  std::vector<TrajectoryBelief> beliefs;
  for (std::size_t f = 0; f < snapshot.plans.size(); ++f) beliefs.push_back(belief_for(snapshot, f, decision.flights[f]));
  return beliefs;
}

EvaluationReport evaluate(const DecisionVector& decision, const AirspaceSnapshot& snapshot,
                          const OptimizerConfig& config) {
  config.validate();
  const auto beliefs = beliefs_for(decision, snapshot);
  return report_from_beliefs(beliefs, decision, snapshot, config);
}

int compare_candidates(const DecisionVector& a, const EvaluationReport& ra, const DecisionVector& b,
                       const EvaluationReport& rb, const AirspaceSnapshot& snapshot, const OptimizerConfig& config) {
  if (config.mode == ConstraintMode::hard) {
    if (ra.feasible != rb.feasible) return ra.feasible ? -1 : 1;
    if (!ra.feasible && std::abs(ra.violation - rb.violation) > 1e-12) return ra.violation < rb.violation ? -1 : 1;
  }
  if (std::abs(ra.total - rb.total) > kCostTolerance) return ra.total < rb.total ? -1 : 1;

  const auto ia = regulated_flights(a, snapshot);
  const auto ib = regulated_flights(b, snapshot);
  if (ia != ib) return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end()) ? -1 : 1;
  const double sa = total_abs_shift(a, snapshot);
  const double sb = total_abs_shift(b, snapshot);
  if (std::abs(sa - sb) > 1e-12) return sa < sb ? -1 : 1;
  return 0;
}

OptimizationResult optimize(const AirspaceSnapshot& snapshot, const OptimizerConfig& config) {
  config.validate();
  if (snapshot.plans.empty()) throw std::invalid_argument("optimize needs at least one flight");
  return Search(snapshot, config).run();
}

std::vector<Clearance> make_clearances(std::span<const TrajectoryBelief> beliefs) {
  std::vector<Clearance> out;
  for (const auto& b : beliefs)
    for (std::size_t i = 0; i < b.points.size(); ++i) {
      const double mu = b.point_pdfs[i].expectation();
      const double sd = std::sqrt(b.point_pdfs[i].variance());
      out.push_back({b.flight_id, b.points[i], mu, mu - 3.0 * sd, mu + 3.0 * sd});
    }
  return out;
}

}  // namespace atfm
