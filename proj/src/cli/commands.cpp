#include "atfm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "atfm/monitor.hpp"
#include "atfm/scenario_io.hpp"
#include "atfm/scenario_sim.hpp"
#include "atfm/simd/kernels.hpp"

namespace atfm::cli {

using nlohmann::json;

namespace {

std::string num(double v, int precision = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::ofstream open_out(const Options& opt, const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  const auto path = opt.out_dir / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

ScenarioFile load(const Options& opt) {
  auto sc = load_scenario(opt.scenario);
  auto& c = sc.config;
  if (opt.slices) {
    if (!(*opt.slices > 0.0)) throw std::invalid_argument("--slices must be positive");
    c.slice_width = *opt.slices;
  }
  if (opt.epsilon) {
    if (!(*opt.epsilon >= 0.0 && *opt.epsilon <= 1.0)) throw std::invalid_argument("--epsilon must lie in [0, 1]");
    c.epsilon = *opt.epsilon;
  }
  if (opt.p) {
    if (!(*opt.p >= 1.0)) throw std::invalid_argument("--p must be at least 1");
    c.p = *opt.p;
  }
  if (opt.samples) {
    if (*opt.samples == 0) throw std::invalid_argument("--samples must be at least 1");
    c.samples = *opt.samples;
  }
  if (opt.seed) c.seed = *opt.seed;
  if (opt.discretize) {
    if (!(*opt.discretize > 0.0)) throw std::invalid_argument("--discretize must be positive");
    c.discretize = *opt.discretize;
  }
  if (opt.constraint) c.constraint = *opt.constraint;
  return sc;
}

// Maps library failures onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ScenarioError& e) {
    err << (e.parse_error() ? "parse error" : "invalid scenario") << '\n';
    for (const auto& d : e.diagnostics()) err << "  " << (d.path.empty() ? "/" : d.path) << ": " << d.message << '\n';
    return e.parse_error() ? kUsage : kInvariant;
  } catch (const DiscretizationRequired& e) {
    err << "error: " << e.what() << "\n  rerun with --discretize <step> (e.g. --discretize 0.5)\n";
    return kInvariant;
  } catch (const MonitorError& e) {
    err << "error: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

std::vector<TrajectoryBelief> exact_beliefs(const ScenarioFile& sc) {
  std::vector<TrajectoryBelief> beliefs;
  beliefs.reserve(sc.flights.size());
  for (const auto& f : sc.flights) beliefs.push_back(propagate(f, {}, {}, sc.propagation()));
  return beliefs;
}

json timeline_json(const SectorTimeline& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row{{"sector", r.sector_id}, {"t0", r.t0}, {"t1", r.t1}, {"probability", r.probability},
             {"flagged", r.flagged}};
    if (r.half_width > 0.0) row["half_width"] = r.half_width;
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* status_name(OptimizeStatus s) { return s == OptimizeStatus::ok ? "ok" : "no_feasible_solution"; }

json report_json(const EvaluationReport& r, std::span<const FlightPlan> plans) {
  json arrivals = json::array();
  for (std::size_t i = 0; i < plans.size() && i < r.expected_arrivals.size(); ++i)
    arrivals.push_back({{"flight", plans[i].id()},
                        {"expected_arrival", r.expected_arrivals[i]},
                        {"variance", r.arrival_variances[i]},
                        {"scheduled_arrival", plans[i].scheduled_arrival()}});
  return {{"delay_cost", r.delay_cost},
          {"variance_term", r.variance_term},
          {"congestion_penalty", r.congestion_penalty},
          {"reroute_penalty", r.reroute_penalty},
          {"total", r.total},
          {"reroutes", r.reroutes},
          {"violation", r.violation},
          {"max_congestion", r.max_congestion},
          {"feasible", r.feasible},
          {"epsilon", r.timeline.epsilon},
          {"arrivals", arrivals},
          {"congestion", timeline_json(r.timeline)}};
}

json clearances_json(std::span<const Clearance> clearances) {
  json out = json::array();
  for (const auto& c : clearances)
    out.push_back({{"flight", c.flight_id}, {"point", c.point}, {"target", c.target}, {"lower", c.lower},
                   {"upper", c.upper}});
  return out;
}

json decisions_json(const DecisionVector& d, std::span<const FlightPlan> plans) {
  json out = json::array();
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& fd = d.flights[i];
    json shifts = json::object();
    for (std::size_t e = 0; e < fd.shifts.size(); ++e)
      if (fd.shifts[e] != 0.0) shifts[plans[i].edges()[e].id()] = fd.shifts[e];
    out.push_back({{"flight", plans[i].id()},
                   {"route", fd.route_index},
                   {"rerouted", fd.route_index != plans[i].active_route()},
                   {"shifts", shifts}});
  }
  return out;
}

Slicing sample_slicing(const ScenarioFile& sc, const ScenarioSet& set) {
  if (sc.config.horizon) return sc.slicing({});
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& f : set.flights)
    for (const double t : f.overflight) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  const double w = sc.config.slice_width;
  if (!(lo <= hi)) return {w, 0.0, 0.0};
  return {w, std::floor(lo / w) * w, std::ceil(hi / w) * w};
}

void write_pdfs(std::ostream& os, const ScenarioFile& sc, const ScenarioSet& set) {
  constexpr std::size_t kGrid = 201;
  os << "flight,point,t,exact_density,sampled_density\n";
  for (std::size_t f = 0; f < set.flights.size(); ++f) {
    const auto belief = propagate(sc.flights[f], {}, {}, sc.propagation());
    for (std::size_t i = 0; i < belief.points.size(); ++i) {
      const auto& pdf = belief.point_pdfs[i];
      if (pdf.is_point_mass()) continue;
      const auto curve = density_curve(pdf, kGrid);
      const double lo = pdf.lower();
      const double width = (pdf.upper() - lo) / static_cast<double>(kGrid - 1);
      // Histogram bins are centred on the grid points.
      std::vector<double> counts(kGrid, 0.0);
      for (const double t : set.column(f, i)) {
        const double k = std::floor((t - lo) / width + 0.5);
        if (k >= 0.0 && k < static_cast<double>(kGrid)) counts[static_cast<std::size_t>(k)] += 1.0;
      }
      for (std::size_t k = 0; k < curve.t.size(); ++k)
        os << belief.flight_id << ',' << belief.points[i] << ',' << num(curve.t[k], 6) << ','
           << num(curve.density[k], 9) << ',' << num(counts[k] / (static_cast<double>(set.size) * width), 9) << '\n';
    }
  }
}

}  // namespace

int cmd_validate(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto check = check_scenario(read_text(opt.scenario));
    if (check.scenario) {
      out << "OK: " << check.scenario->flights.size() << " flights, " << check.scenario->sectors.size()
          << " sectors\n";
      return int(kOk);
    }
    err << (check.parse_error ? "parse error" : "invalid scenario") << '\n';
    for (const auto& d : check.diagnostics) err << "  " << (d.path.empty() ? "/" : d.path) << ": " << d.message << '\n';
    return check.parse_error ? int(kUsage) : int(kInvariant);
  });
}

int cmd_predict(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sc = load(opt);
    const auto beliefs = exact_beliefs(sc);
    const auto timeline = congestion_timeline(beliefs, sc.sectors, sc.slicing(beliefs), sc.config.epsilon);

    auto arrivals = open_out(opt, "arrivals.csv");
    arrivals << "flight,expected_arrival,variance,scheduled_arrival,expected_delay\n";
    for (std::size_t f = 0; f < beliefs.size(); ++f) {
      const auto& a = beliefs[f].arrival();
      const double sched = sc.flights[f].scheduled_arrival();
      arrivals << beliefs[f].flight_id << ',' << num(a.expectation()) << ',' << num(a.variance()) << ','
               << num(sched) << ',' << num(a.expectation() - sched) << '\n';
    }
    auto congestion = open_out(opt, "congestion.csv");
    write_csv(congestion, timeline);

    out << "predicted " << beliefs.size() << " flights over " << timeline.rows.size() << " sector slices; max congestion "
        << num(timeline.max_probability(), 6) << (timeline.any_flagged() ? " (flagged)" : "") << '\n';
    return int(kOk);
  });
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sc = load(opt);
    const std::vector<EdgeShifts> shifts(sc.flights.size());
    const auto set = sample_scenarios(sc.flights, shifts, sc.config.samples, sc.config.seed, {opt.workers});
    const auto timeline = estimate_congestion(set, sc.sectors, sample_slicing(sc, set), sc.config.epsilon);

    auto arrivals = open_out(opt, "arrivals.csv");
    arrivals << "flight,expected_arrival,variance,scheduled_arrival,expected_delay,half_width\n";
    if (set.size > 0 && !set.flights.empty()) {
      const auto est = estimate_expected_arrivals(set);
      for (std::size_t f = 0; f < est.size(); ++f) {
        const double sched = sc.flights[f].scheduled_arrival();
        arrivals << est[f].flight_id << ',' << num(est[f].mean) << ',' << num(est[f].variance) << ',' << num(sched)
                 << ',' << num(est[f].mean - sched) << ',' << num(est[f].half_width) << '\n';
      }
    }
    auto congestion = open_out(opt, "congestion.csv");
    write_csv(congestion, timeline, true);

    if (opt.dump_pdfs) {
      auto pdfs = open_out(opt, "pdfs.csv");
      write_pdfs(pdfs, sc, set);
    }
    if (opt.dump_scenarios) {
      auto scenarios = open_out(opt, "scenarios.jsonl");
      write_jsonl(scenarios, set);
    }
    out << "simulated " << set.size << " scenarios (seed " << sc.config.seed << ", kernels " << simd::active().name
        << "); max congestion " << num(timeline.max_probability(), 6) << '\n';
    return int(kOk);
  });
}

int cmd_optimize(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sc = load(opt);
    const auto snapshot = sc.snapshot();
    const auto config = sc.optimizer_config();
    const auto result = optimize(snapshot, config);
    const auto beliefs = beliefs_for(result.best, snapshot);

    json clearances{{"status", status_name(result.status)},
                    {"decisions", decisions_json(result.best, snapshot.plans)},
                    {"clearances", clearances_json(make_clearances(beliefs))}};
    open_out(opt, "clearances.json") << clearances.dump(2) << '\n';

    json evaluation = report_json(result.report, snapshot.plans);
    evaluation["status"] = status_name(result.status);
    evaluation["iterations"] = result.iterations;
    evaluation["evaluations"] = result.evaluations;
    evaluation["mode"] = config.mode == ConstraintMode::hard ? "hard" : "soft";
    evaluation["p"] = config.p;
    open_out(opt, "evaluation.json") << evaluation.dump(2) << '\n';

    auto history = open_out(opt, "history.csv");
    history << "iteration,evaluations,total,violation,feasible\n";
    for (const auto& h : result.history)
      history << h.iteration << ',' << h.evaluations << ',' << num(h.total) << ',' << num(h.violation) << ','
              << (h.feasible ? 1 : 0) << '\n';

    out << "status " << status_name(result.status) << ", delay cost " << num(result.report.delay_cost, 6)
        << ", max congestion " << num(result.report.max_congestion, 6) << " after " << result.evaluations
        << " evaluations\n";
    const bool infeasible = config.mode == ConstraintMode::hard && result.status == OptimizeStatus::no_feasible_solution;
    return infeasible ? int(kInfeasible) : int(kOk);
  });
}

int cmd_monitor(const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sc = load(opt);
    EventFile events;
    if (!opt.events.empty()) {
      std::ifstream in(opt.events);
      if (!in) throw std::runtime_error("cannot open " + opt.events.string());
      events = read_events(in);
    }
    for (const auto& e : events.errors) err << opt.events.string() << ':' << e.line << ": " << e.message << '\n';
    if (opt.strict && !events.errors.empty()) return int(kUsage);

    std::vector<ObservationEvent> stream;
    for (const auto& e : events.events) stream.push_back(e.event);

    const auto snapshot = sc.snapshot();
    auto initial = AirspaceState::initial(sc.flights, sc.propagation());
    auto updates = open_out(opt, "updates.jsonl");
    const auto sink = [&](const ClearanceUpdate& u) {
      json line{{"version", u.version},
                {"event_time", u.event_time},
                {"events_processed", u.events_processed},
                {"trigger", u.trigger},
                {"status", status_name(u.status)},
                {"predicted_congestion", timeline_json(u.predicted)},
                {"report", report_json(u.report, snapshot.plans)},
                {"clearances", clearances_json(u.clearances)}};
      updates << line.dump() << '\n';
    };

    LoopOptions loop;
    loop.strict = opt.strict;
    loop.speed = opt.speed;
    LoopResult result;
    try {
      result = run_loop(std::move(initial), stream, snapshot.sectors, snapshot.slicing, sc.optimizer_config(), loop,
                        sink);
    } catch (const MonitorError& e) {
      // Strict mode stops at the first rejected event; name its line.
      const auto index = [&] {
        std::size_t ok = 0;
        auto s = AirspaceState::initial(sc.flights, sc.propagation());
        for (; ok < stream.size(); ++ok) {
          try {
            s = ingest(s, stream[ok]);
          } catch (const MonitorError&) {
            break;
          }
        }
        return ok;
      }();
      if (index < events.events.size()) err << opt.events.string() << ':' << events.events[index].line << ": ";
      err << e.what() << '\n';
      return int(kInvariant);
    }
    for (const auto& e : result.errors)
      err << opt.events.string() << ':' << events.events[e.index].line << ": " << e.message << '\n';

    auto log = open_out(opt, "state_log.jsonl");
    for (std::size_t i = 0; i < result.state.log.size(); ++i) {
      auto j = json::parse(event_to_json(result.state.log[i]));
      j["version"] = i + 1;
      log << j.dump() << '\n';
    }
    out << "processed " << result.state.log.size() << " of " << stream.size() << " events, " << result.updates.size()
        << " clearance updates, " << (result.errors.size() + events.errors.size()) << " rejected\n";
    return int(kOk);
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic air traffic flow model: prediction, simulation, optimization and monitoring"};
  app.require_subcommand(1);
  Options opt;
  std::string constraint;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", opt.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "Output directory");
    sub->add_option("--slices", opt.slices, "Slice width in minutes");
    sub->add_option("--epsilon", opt.epsilon, "Congestion threshold");
    sub->add_option("--discretize", opt.discretize, "Project densities onto a grid of this step");
  };
  const auto add_optimizer = [&](CLI::App* sub) {
    sub->add_option("--p", opt.p, "Delay cost exponent");
    sub->add_option("--constraint", constraint, "Congestion constraint handling")
        ->check(CLI::IsMember({"hard", "soft"}));
    sub->add_option("--seed", opt.seed, "Optimizer seed");
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", opt.scenario, "Scenario JSON file")->required();
  auto* predict = app.add_subcommand("predict", "Exact arrival and congestion prediction");
  add_common(predict);
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo arrival and congestion estimates");
  add_common(simulate);
  simulate->add_option("--samples", opt.samples, "Number of scenarios");
  simulate->add_option("--seed", opt.seed, "Master seed");
  simulate->add_option("--workers", opt.workers, "Sampling threads")->check(CLI::PositiveNumber);
  simulate->add_flag("--dump-pdfs", opt.dump_pdfs, "Write density curves per metering point");
  simulate->add_flag("--dump-scenarios", opt.dump_scenarios, "Write every sampled scenario as JSON lines");
  auto* optimize_cmd = app.add_subcommand("optimize", "Search clearances under congestion constraints");
  add_common(optimize_cmd);
  add_optimizer(optimize_cmd);
  auto* monitor = app.add_subcommand("monitor", "Replay observations and stream clearance updates");
  add_common(monitor);
  add_optimizer(monitor);
  monitor->add_option("--events", opt.events, "JSON-lines event file")->check(CLI::ExistingFile);
  monitor->add_flag("--strict", opt.strict, "Stop at the first rejected event");
  monitor->add_option("--speed", opt.speed, "Replay speed in event minutes per second (0 = as fast as possible)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? int(kOk) : int(kUsage);
  }
  if (!constraint.empty()) opt.constraint = constraint == "hard" ? ConstraintMode::hard : ConstraintMode::soft;

  if (validate->parsed()) return cmd_validate(opt, out, err);
  if (predict->parsed()) return cmd_predict(opt, out, err);
  if (simulate->parsed()) return cmd_simulate(opt, out, err);
  if (optimize_cmd->parsed()) return cmd_optimize(opt, out, err);
  return cmd_monitor(opt, out, err);
}

}  // namespace atfm::cli
