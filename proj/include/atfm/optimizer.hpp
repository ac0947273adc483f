#pragma once

// Clearance search: one route choice per flight plus bounded travel-time mean
// shifts per edge, scored by a super-linear delay cost under per-slice sector
// congestion constraints.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atfm/flight_model.hpp"
#include "atfm/sector_model.hpp"

namespace atfm {

// Immutable view of the airspace that the optimizer works on.
struct AirspaceSnapshot {
  std::vector<FlightPlan> plans;
  std::vector<std::vector<Observation>> observations;  // per flight; may be empty
  std::vector<Sector> sectors;
  Slicing slicing;
  PropagationOptions propagation;

  std::span<const Observation> observations_of(std::size_t flight) const;
};

enum class ConstraintMode { hard, soft };

struct OptimizerConfig {
  double p = 1.0;
  double epsilon = 0.75;
  ConstraintMode mode = ConstraintMode::hard;
  double soft_weight = 100.0;
  double reroute_penalty = 10.0;
  double variance_weight = 0.0;
  std::size_t inner_samples = 0;  // 0 = exact evaluation
  std::size_t stall_window = 150;
  std::size_t max_iters = 2000;
  std::size_t offspring = 6;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FlightDecision {
  std::size_t route_index = 0;
  EdgeShifts shifts;  // one per plan edge

  friend bool operator==(const FlightDecision&, const FlightDecision&) = default;
};

struct DecisionVector {
  std::vector<FlightDecision> flights;

  // Active routes, no shifts.
  static DecisionVector baseline(const AirspaceSnapshot& snapshot);
  std::size_t dimension() const;

  friend bool operator==(const DecisionVector&, const DecisionVector&) = default;
};

struct EvaluationReport {
  double delay_cost = 0.0;
  double variance_term = 0.0;
  double congestion_penalty = 0.0;
  double reroute_penalty = 0.0;
  double total = 0.0;
  std::size_t reroutes = 0;
  double violation = 0.0;  // sum of max(0, P(C) - epsilon)
  double max_congestion = 0.0;
  bool feasible = true;
  std::vector<double> expected_arrivals;
  std::vector<double> arrival_variances;
  SectorTimeline timeline;
};

// sum_i |expected_i - scheduled_i|^p
double delay_cost(std::span<const double> expected, std::span<const double> scheduled, double p);

std::vector<TrajectoryBelief> beliefs_for(const DecisionVector& decision, const AirspaceSnapshot& snapshot);

EvaluationReport evaluate(const DecisionVector& decision, const AirspaceSnapshot& snapshot,
                          const OptimizerConfig& config);

enum class OptimizeStatus { ok, no_feasible_solution };

struct HistoryEntry {
  std::size_t iteration = 0;
  std::size_t evaluations = 0;
  double total = 0.0;
  double violation = 0.0;
  bool feasible = false;
};

struct OptimizationResult {
  DecisionVector best;
  EvaluationReport report;
  std::vector<HistoryEntry> history;
  OptimizeStatus status = OptimizeStatus::ok;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

OptimizationResult optimize(const AirspaceSnapshot& snapshot, const OptimizerConfig& config);

// Ordering used by the search: feasibility first in hard mode, then cost,
// then the deterministic tie-break (lowest regulated flight id, then the
// smallest total |shift|). Negative when a ranks ahead of b.
int compare_candidates(const DecisionVector& a, const EvaluationReport& ra, const DecisionVector& b,
                       const EvaluationReport& rb, const AirspaceSnapshot& snapshot, const OptimizerConfig& config);

struct Clearance {
  std::string flight_id;
  std::string point;
  double target = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Expected overflight time +- 3 sigma at every point of each active route.
std::vector<Clearance> make_clearances(std::span<const TrajectoryBelief> beliefs);

}  // namespace atfm
