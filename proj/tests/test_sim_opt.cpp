#include <doctest.h>

#include <cmath>
#include <sstream>

#include "atfm/monitor.hpp"
#include "atfm/optimizer.hpp"
#include "atfm/scenario_sim.hpp"
#include "oracles.hpp"
#include "toy_fixture.hpp"

using namespace atfm;
using doctest::Approx;

TEST_SUITE("scenario_sim") {
  TEST_CASE("same seed, same set, whatever the worker count") {
    const auto snap = fixture::toy_snapshot();
    const std::vector<EdgeShifts> shifts(2);
    const auto a = sample_scenarios(snap.plans, shifts, 5000, 17, {1});
    const auto b = sample_scenarios(snap.plans, shifts, 5000, 17, {4});
    const auto c = sample_scenarios(snap.plans, shifts, 5000, 18, {1});
    CHECK(a == b);
    CHECK_FALSE(a == c);
  }

  TEST_CASE("each scenario is a consistent trajectory") {
    const auto snap = fixture::toy_snapshot();
    const auto set = sample_scenarios(snap.plans, std::vector<EdgeShifts>(2), 200, 3);
    for (std::size_t m = 0; m < set.size; ++m) {
      const auto s = set.scenario(m);
      for (const auto& f : s.flights) {
        CHECK(f.overflight[0] == f.departure);
        for (std::size_t i = 1; i < f.overflight.size(); ++i) {
          CHECK(f.overflight[i] > f.overflight[i - 1]);
          CHECK(f.overflight[i] == Approx(f.overflight[i - 1] + f.travel[i - 1]));
        }
      }
    }
  }

  TEST_CASE("estimates converge to the exact toy values") {
    const auto snap = fixture::toy_snapshot();
    const auto set = sample_scenarios(snap.plans, std::vector<EdgeShifts>(2), 100000, 1);
    const auto tl = estimate_congestion(set, snap.sectors, snap.slicing, 0.75);
    REQUIRE(tl.rows.size() == 1);
    CHECK(std::abs(tl.rows[0].probability - 196.0 / 225.0) <= tl.rows[0].half_width + 1e-3);
    for (const auto& est : estimate_expected_arrivals(set)) {
      CHECK(std::abs(est.mean - 46.0) <= est.half_width);
      CHECK(est.variance == Approx(290.0 / 12.0).epsilon(0.03));
    }
  }

  TEST_CASE("arrival samples pass a KS test against the exact cdf") {
    const auto plan = fixture::toy_flight("1");
    const std::vector<FlightPlan> plans{plan};
    const auto set = sample_scenarios(plans, std::vector<EdgeShifts>(1), 20000, 77);
    const auto exact = propagate(plan).arrival();
    const double d = oracle::ks_statistic(set.arrivals(0), [&](double t) { return exact.cdf(t); });
    CHECK(d < oracle::ks_critical_1pct(set.size));
  }

  TEST_CASE("deterministic inputs give the exact answer from one scenario") {
    const auto plan = FlightPlan::create("d", PointSpec{0.0}, 20.0,
                                         {{"1", "2", PointSpec{12.0}, 12.0, 14.0}, {"2", "3", PointSpec{8.0}, 8.0, 9.0}},
                                         {{"1", "2", "3"}});
    const std::vector<FlightPlan> plans{plan, plan};
    const auto set = sample_scenarios(plans, std::vector<EdgeShifts>(2), 1, 9);
    CHECK(set.arrivals(0).front() == 20.0);
    const std::vector<Sector> sectors{{"S", 1, {{"2", "3"}}}};
    const Slicing slicing{10.0, 10.0, 20.0};
    const auto beliefs = std::vector<TrajectoryBelief>{propagate(plan), propagate(plan)};
    const auto exact = congestion_timeline(beliefs, sectors, slicing, 0.75);
    const auto mc = estimate_congestion(set, sectors, slicing, 0.75);
    REQUIRE(mc.rows.size() == exact.rows.size());
    for (std::size_t i = 0; i < mc.rows.size(); ++i) CHECK(mc.rows[i].probability == exact.rows[i].probability);
  }

  TEST_CASE("observed points take the observed time") {
    const auto plan = fixture::toy_flight("1");
    const auto b = observe(plan, propagate(plan), "1", 0.0);
    const std::vector<TrajectoryBelief> bs{b};
    const auto set = sample_scenarios(bs, 1000, 4);
    for (std::size_t m = 0; m < set.size; ++m) CHECK(set.flights[0].at(m, 0) == 0.0);
    const auto est = estimate_expected_arrivals(set);
    CHECK(std::abs(est[0].mean - 43.5) <= est[0].half_width);
  }

  TEST_CASE("jsonl dump has one line per scenario") {
    const auto snap = fixture::toy_snapshot();
    const auto set = sample_scenarios(snap.plans, std::vector<EdgeShifts>(2), 7, 1);
    std::ostringstream os;
    write_jsonl(os, set);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  }
}

TEST_SUITE("optimizer") {
  TEST_CASE("delay cost") {
    const std::vector<double> e{48.0, 46.0}, s{46.0, 46.0};
    CHECK(delay_cost(e, s, 1.0) == Approx(2.0));
    CHECK(delay_cost(e, s, 2.0) == Approx(4.0));
    CHECK_THROWS_AS(delay_cost(e, s, 0.5), std::invalid_argument);
  }

  TEST_CASE("the regulated toy decision costs 2 and is feasible") {
    const auto snap = fixture::toy_snapshot();
    auto d = DecisionVector::baseline(snap);
    d.flights[0].shifts = {2.0, 0.0, 0.0};
    OptimizerConfig cfg;
    const auto r = evaluate(d, snap, cfg);
    CHECK(r.delay_cost == Approx(2.0).epsilon(1e-12));
    CHECK(r.max_congestion == Approx(56.0 / 75.0).epsilon(1e-12));
    CHECK(r.feasible);
    const auto base = evaluate(DecisionVector::baseline(snap), snap, cfg);
    CHECK_FALSE(base.feasible);
    CHECK(base.delay_cost == Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("hard mode matches the grid oracle") {
    const auto snap = fixture::toy_snapshot();
    OptimizerConfig cfg;
    const auto res = optimize(snap, cfg);
    const auto grid = oracle::ToyOracle::grid_optimum(0.75);
    CHECK(res.status == OptimizeStatus::ok);
    CHECK(res.report.feasible);
    CHECK(res.report.delay_cost <= 2.0 + 1e-9);
    CHECK(std::abs(res.report.delay_cost - grid.cost) <= 0.1);
    CHECK_FALSE(res.history.empty());
  }

  TEST_CASE("tie-break regulates the lowest flight id") {
    const auto snap = fixture::toy_snapshot();
    const auto res = optimize(snap, OptimizerConfig{});
    const auto& f1 = res.best.flights[0].shifts;
    const auto& f2 = res.best.flights[1].shifts;
    const auto any = [](const EdgeShifts& s) {
      return std::any_of(s.begin(), s.end(), [](double x) { return x != 0.0; });
    };
    CHECK(any(f1));
    CHECK_FALSE(any(f2));
  }

  TEST_CASE("soft mode reproduces the hard solution on the toy") {
    const auto snap = fixture::toy_snapshot();
    OptimizerConfig hard, soft;
    soft.mode = ConstraintMode::soft;
    const auto a = optimize(snap, hard);
    const auto b = optimize(snap, soft);
    CHECK(b.report.feasible);
    CHECK(b.report.delay_cost == Approx(a.report.delay_cost).epsilon(1e-4));
  }

  TEST_CASE("optimization is reproducible") {
    const auto snap = fixture::toy_snapshot();
    OptimizerConfig cfg;
    cfg.seed = 5;
    CHECK(optimize(snap, cfg).best == optimize(snap, cfg).best);
  }

  TEST_CASE("no congestion, no regulation") {
    auto snap = fixture::toy_snapshot();
    snap.sectors[0].capacity = 2;
    const auto res = optimize(snap, OptimizerConfig{});
    CHECK(res.best == DecisionVector::baseline(snap));
    CHECK(res.report.delay_cost == Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("unreachable threshold reports no feasible solution") {
    auto snap = fixture::toy_snapshot();
    OptimizerConfig cfg;
    cfg.epsilon = 0.01;
    cfg.stall_window = 30;
    const auto res = optimize(snap, cfg);
    CHECK(res.status == OptimizeStatus::no_feasible_solution);
    CHECK(res.report.violation > 0.0);
  }

  TEST_CASE("rerouting around a congested sector") {
    using fixture::edge;
    const auto make = [&](std::string id, std::size_t active) {
      return FlightPlan::create(std::move(id), UniformSpec{0, 2}, 14,
                                {edge("A", "B", 5, 7), edge("B", "D", 5, 7), edge("A", "C", 5, 7), edge("C", "D", 5, 7)},
                                {{"A", "B", "D"}, {"A", "C", "D"}}, active);
    };
    AirspaceSnapshot snap;
    snap.plans = {make("a", 0), make("b", 0)};
    snap.observations.resize(2);
    snap.sectors = {{"SB", 1, {{"A", "B"}}}, {"SC", 1, {{"A", "C"}}}};
    snap.slicing = {20.0, 0.0, 20.0};
    OptimizerConfig cfg;
    cfg.reroute_penalty = 1.0;
    const auto res = optimize(snap, cfg);
    CHECK(res.report.feasible);
    CHECK(res.report.reroutes == 1);
    CHECK(res.best.flights[0].route_index == 1);
  }

  TEST_CASE("clearances bracket the expectation") {
    const auto bs = beliefs_for(DecisionVector::baseline(fixture::toy_snapshot()), fixture::toy_snapshot());
    const auto cs = make_clearances(bs);
    REQUIRE(cs.size() == 8);
    CHECK(cs[3].point == "4");
    CHECK(cs[3].target == Approx(46.0));
    CHECK(cs[3].upper - cs[3].target == Approx(3.0 * std::sqrt(290.0 / 12.0)));
  }

  TEST_CASE("monte-carlo evaluation is close to exact") {
    const auto snap = fixture::toy_snapshot();
    OptimizerConfig cfg;
    cfg.inner_samples = 20000;
    const auto mc = evaluate(DecisionVector::baseline(snap), snap, cfg);
    CHECK(std::abs(mc.max_congestion - 196.0 / 225.0) < 0.02);
  }
}

TEST_SUITE("monitor") {
  namespace {
  AirspaceState toy_state() { return AirspaceState::initial(fixture::toy_snapshot().plans); }
  ObservationEvent departure(double ts, std::string f, double t) {
    ObservationEvent e;
    e.timestamp = ts;
    e.flight = std::move(f);
    e.kind = EventKind::departure;
    e.observed_time = t;
    return e;
  }
  }  // namespace

  TEST_CASE("departure observation at t=0") {
    const auto s = ingest(toy_state(), departure(0.0, "1", 0.0));
    CHECK(s.version == 1);
    CHECK(s.beliefs[0].arrival().expectation() == Approx(43.5).epsilon(1e-12));
    CHECK(s.beliefs[0].arrival().variance() == Approx(65.0 / 12.0).epsilon(1e-12));
    CHECK(s.beliefs[1].arrival().expectation() == Approx(46.0).epsilon(1e-12));
  }

  TEST_CASE("replaying the log equals the incremental state") {
    auto s = toy_state();
    ObservationEvent over;
    over.timestamp = 12.0;
    over.flight = "1";
    over.point = "2";
    over.observed_time = 11.0;
    for (const auto& e : {departure(0.0, "1", 0.0), departure(3.0, "2", 4.0), over}) s = ingest(s, e);
    const auto r = replay(toy_state(), s.log);
    REQUIRE(r.beliefs.size() == s.beliefs.size());
    for (std::size_t f = 0; f < s.beliefs.size(); ++f) {
      CHECK(r.beliefs[f].arrival().expectation() == Approx(s.beliefs[f].arrival().expectation()).epsilon(1e-12));
      CHECK(r.beliefs[f].arrival().variance() == Approx(s.beliefs[f].arrival().variance()).epsilon(1e-12));
    }
    CHECK(r.version == s.version);
  }

  TEST_CASE("bad events are rejected without touching the state") {
    const auto s = ingest(toy_state(), departure(5.0, "1", 0.0));
    CHECK_THROWS_AS(ingest(s, departure(4.0, "2", 0.0)), MonitorError);
    CHECK_THROWS_AS(ingest(s, departure(6.0, "nope", 0.0)), MonitorError);
    ObservationEvent off;
    off.timestamp = 6.0;
    off.flight = "2";
    off.point = "7";
    CHECK_THROWS_AS(ingest(s, off), MonitorError);
    CHECK(s.version == 1);
  }

  TEST_CASE("loop emits a baseline update and reacts to congestion changes") {
    const auto snap = fixture::toy_snapshot();
    const std::vector<ObservationEvent> none;
    auto r = run_loop(toy_state(), none, snap.sectors, snap.slicing, OptimizerConfig{});
    REQUIRE(r.updates.size() == 1);
    CHECK(r.updates[0].trigger == "initial");
    CHECK(r.updates[0].predicted.rows[0].probability == Approx(196.0 / 225.0).epsilon(1e-12));

    const std::vector<ObservationEvent> evs{departure(0.0, "1", 0.0), departure(0.5, "2", 9.0)};
    r = run_loop(toy_state(), evs, snap.sectors, snap.slicing, OptimizerConfig{});
    REQUIRE(r.updates.size() >= 2);
    CHECK(r.updates.back().version == 2);
    CHECK(r.errors.empty());
  }

  TEST_CASE("non-strict loop records errors and carries on; strict stops") {
    const auto snap = fixture::toy_snapshot();
    const std::vector<ObservationEvent> evs{departure(0.0, "ghost", 0.0), departure(1.0, "1", 0.0)};
    const auto r = run_loop(toy_state(), evs, snap.sectors, snap.slicing, OptimizerConfig{});
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].index == 0);
    CHECK(r.state.version == 1);
    LoopOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(run_loop(toy_state(), evs, snap.sectors, snap.slicing, OptimizerConfig{}, strict), MonitorError);
  }

  TEST_CASE("loop output is deterministic") {
    const auto snap = fixture::toy_snapshot();
    const std::vector<ObservationEvent> evs{departure(0.0, "1", 0.0), departure(20.0, "2", 18.0)};
    const auto a = run_loop(toy_state(), evs, snap.sectors, snap.slicing, OptimizerConfig{});
    const auto b = run_loop(toy_state(), evs, snap.sectors, snap.slicing, OptimizerConfig{});
    REQUIRE(a.updates.size() == b.updates.size());
    for (std::size_t i = 0; i < a.updates.size(); ++i) {
      CHECK(a.updates[i].version == b.updates[i].version);
      CHECK(a.updates[i].report.total == b.updates[i].report.total);
    }
  }
}
