#include "atfm/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace atfm {

using nlohmann::json;

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Walks a parsed document, recording a diagnostic for every bad field.
class Reader {
 public:
  std::vector<Diagnostic> diagnostics;

  void fail(const std::string& path, std::string message) { diagnostics.push_back({path, std::move(message)}); }

  const json* member(const json& obj, const std::string& path, const char* key, bool required = true) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "/" + key, "missing required field");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required = true) {
    const auto* v = member(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number() || !std::isfinite(v->get<double>())) {
      fail(path + "/" + key, "expected a finite number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& path, const char* key,
                                      bool required = true) {
    const auto* v = member(obj, path, key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(path + "/" + key, "expected an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  std::optional<std::string> id(const json& v, const std::string& path) {
    if (v.is_string() && !v.get<std::string>().empty()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    fail(path, "expected a non-empty string or integer id");
    return std::nullopt;
  }

  std::optional<std::string> id(const json& obj, const std::string& path, const char* key) {
    const auto* v = member(obj, path, key);
    if (!v) return std::nullopt;
    return id(*v, path + "/" + key);
  }

  const json* array(const json& obj, const std::string& path, const char* key, bool required = true) {
    const auto* v = member(obj, path, key, required);
    if (!v) return nullptr;
    if (!v->is_array()) {
      fail(path + "/" + key, "expected an array");
      return nullptr;
    }
    return v;
  }

  std::optional<DistSpec> distribution(const json& v, const std::string& path) {
    if (!v.is_object()) {
      fail(path, "expected a distribution object");
      return std::nullopt;
    }
    const auto* type = member(v, path, "type");
    if (!type) return std::nullopt;
    if (!type->is_string()) {
      fail(path + "/type", "expected a string");
      return std::nullopt;
    }
    const auto kind = type->get<std::string>();
    if (kind == "uniform") {
      const auto lo = number(v, path, "lower");
      const auto hi = number(v, path, "upper");
      if (!lo || !hi) return std::nullopt;
      if (!(*lo < *hi)) {
        fail(path, "uniform needs lower < upper");
        return std::nullopt;
      }
      return UniformSpec{*lo, *hi};
    }
    if (kind == "point") {
      const auto t = number(v, path, "t");
      if (!t) return std::nullopt;
      return PointSpec{*t};
    }
    if (kind == "slot") {
      // Departure window [ctot - 5, ctot + 10] around the calculated take-off time.
      const auto ctot = number(v, path, "ctot");
      if (!ctot) return std::nullopt;
      return UniformSpec{*ctot - 5.0, *ctot + 10.0};
    }
    fail(path + "/type", "unknown distribution type '" + kind + "' (uniform, point, slot)");
    return std::nullopt;
  }
};

std::optional<PointKind> point_kind(std::string_view s) {
  if (s == "ingoing") return PointKind::ingoing;
  if (s == "outgoing") return PointKind::outgoing;
  if (s == "interior") return PointKind::interior;
  return std::nullopt;
}

void read_config(Reader& r, const json& doc, ScenarioConfig& c) {
  const auto* cfg = r.member(doc, "", "config", false);
  if (!cfg) return;
  const std::string path = "/config";
  if (!cfg->is_object()) {
    r.fail(path, "expected an object");
    return;
  }
  const auto positive = [&](const char* key, double& out) {
    if (auto v = r.number(*cfg, path, key, false)) {
      if (*v > 0.0)
        out = *v;
      else
        r.fail(path + "/" + key, "must be positive");
    }
  };
  const auto count = [&](const char* key, std::size_t& out, std::int64_t min) {
    if (auto v = r.integer(*cfg, path, key, false)) {
      if (*v >= min)
        out = static_cast<std::size_t>(*v);
      else
        r.fail(path + "/" + key, "must be at least " + std::to_string(min));
    }
  };
  const auto non_negative = [&](const char* key, double& out) {
    if (auto v = r.number(*cfg, path, key, false)) {
      if (*v >= 0.0)
        out = *v;
      else
        r.fail(path + "/" + key, "must not be negative");
    }
  };

  positive("slice_width", c.slice_width);
  if (const auto* h = r.array(*cfg, path, "horizon", false)) {
    if (h->size() != 2 || !(*h)[0].is_number() || !(*h)[1].is_number() ||
        !((*h)[0].get<double>() < (*h)[1].get<double>()))
      r.fail(path + "/horizon", "expected [start, end] with start < end");
    else
      c.horizon = std::pair{(*h)[0].get<double>(), (*h)[1].get<double>()};
  }
  if (auto v = r.number(*cfg, path, "epsilon", false)) {
    if (*v >= 0.0 && *v <= 1.0)
      c.epsilon = *v;
    else
      r.fail(path + "/epsilon", "must lie in [0, 1]");
  }
  if (auto v = r.number(*cfg, path, "p", false)) {
    if (*v >= 1.0)
      c.p = *v;
    else
      r.fail(path + "/p", "must be at least 1");
  }
  if (const auto* m = r.member(*cfg, path, "constraint", false)) {
    if (*m == "hard")
      c.constraint = ConstraintMode::hard;
    else if (*m == "soft")
      c.constraint = ConstraintMode::soft;
    else
      r.fail(path + "/constraint", "expected \"hard\" or \"soft\"");
  }
  non_negative("soft_weight", c.soft_weight);
  non_negative("reroute_penalty", c.reroute_penalty);
  non_negative("variance_weight", c.variance_weight);
  count("samples", c.samples, 1);
  count("inner_samples", c.inner_samples, 0);
  if (auto v = r.integer(*cfg, path, "seed", false)) {
    if (*v >= 0)
      c.seed = static_cast<std::uint64_t>(*v);
    else
      r.fail(path + "/seed", "must not be negative");
  }
  count("stall_window", c.stall_window, 1);
  count("max_iters", c.max_iters, 1);
  count("piece_cap", c.piece_cap, 1);
  if (r.member(*cfg, path, "discretize", false)) {
    double step = 0.0;
    positive("discretize", step);
    if (step > 0.0) c.discretize = step;
  }
}

}  // namespace

ScenarioError::ScenarioError(std::vector<Diagnostic> diagnostics, bool parse_error)
    : std::runtime_error([&] {
        std::string s = parse_error ? "malformed scenario" : "invalid scenario";
        for (const auto& d : diagnostics) s += "\n  " + d.path + ": " + d.message;
        return s;
      }()),
      diagnostics_(std::move(diagnostics)),
      parse_error_(parse_error) {}

PropagationOptions ScenarioFile::propagation() const {
  PropagationOptions o;
  o.piece_cap = config.piece_cap;
  o.discretize_step = config.discretize;
  return o;
}

OptimizerConfig ScenarioFile::optimizer_config() const {
  OptimizerConfig o;
  o.p = config.p;
  o.epsilon = config.epsilon;
  o.mode = config.constraint;
  o.soft_weight = config.soft_weight;
  o.reroute_penalty = config.reroute_penalty;
  o.variance_weight = config.variance_weight;
  o.inner_samples = config.inner_samples;
  o.stall_window = config.stall_window;
  o.max_iters = config.max_iters;
  o.seed = config.seed;
  return o;
}

Slicing ScenarioFile::slicing(std::span<const TrajectoryBelief> beliefs) const {
  if (config.horizon) return {config.slice_width, config.horizon->first, config.horizon->second};
  return default_slicing(beliefs, config.slice_width);
}

AirspaceSnapshot ScenarioFile::snapshot() const {
  AirspaceSnapshot s;
  s.plans = flights;
  s.observations.resize(flights.size());
  s.sectors = sectors;
  s.propagation = propagation();
  if (config.horizon) {
    s.slicing = slicing({});
  } else {
    std::vector<TrajectoryBelief> beliefs;
    for (const auto& f : flights) beliefs.push_back(propagate(f, {}, {}, s.propagation));
    s.slicing = slicing(beliefs);
  }
  return s;
}

ScenarioCheck check_scenario(std::string_view text) {
  ScenarioCheck out;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    out.parse_error = true;
    out.diagnostics.push_back({"line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)), e.what()});
    return out;
  }

  Reader r;
  ScenarioFile sc;
  if (!doc.is_object()) {
    r.fail("", "top level must be an object");
    out.diagnostics = std::move(r.diagnostics);
    return out;
  }

  if (auto v = r.integer(doc, "", "schema_version")) {
    if (*v != kSchemaVersion)
      r.fail("/schema_version", "unsupported version " + std::to_string(*v) + ", expected " +
                                    std::to_string(kSchemaVersion));
  }

  std::set<std::string> point_ids;
  const auto* airspace = r.member(doc, "", "airspace");
  if (airspace && !airspace->is_object()) r.fail("/airspace", "expected an object");
  if (airspace && airspace->is_object()) {
    if (const auto* pts = r.array(*airspace, "/airspace", "points")) {
      for (std::size_t i = 0; i < pts->size(); ++i) {
        const auto path = "/airspace/points/" + std::to_string(i);
        const auto& p = (*pts)[i];
        MeteringPoint mp;
        const auto pid = r.id(p, path, "id");
        if (!pid) continue;
        mp.id = *pid;
        if (!point_ids.insert(mp.id).second) r.fail(path + "/id", "duplicate point id " + mp.id);
        if (const auto* pos = r.array(p, path, "position", false)) {
          if (pos->size() != 3 || !std::all_of(pos->begin(), pos->end(), [](const json& x) { return x.is_number(); }))
            r.fail(path + "/position", "expected [longitude, latitude, altitude]");
          else
            for (int k = 0; k < 3; ++k) mp.position[k] = (*pos)[k].get<double>();
        }
        if (const auto* k = r.member(p, path, "kind", false)) {
          const auto kind = k->is_string() ? point_kind(k->get<std::string>()) : std::nullopt;
          if (!kind)
            r.fail(path + "/kind", "expected ingoing, outgoing or interior");
          else
            mp.kind = *kind;
        }
        sc.points.push_back(std::move(mp));
      }
    }

    if (const auto* secs = r.array(*airspace, "/airspace", "sectors")) {
      std::set<std::string> sector_ids;
      for (std::size_t i = 0; i < secs->size(); ++i) {
        const auto path = "/airspace/sectors/" + std::to_string(i);
        const auto& s = (*secs)[i];
        Sector sector;
        if (auto sid = r.id(s, path, "id")) {
          sector.id = *sid;
          if (!sector_ids.insert(sector.id).second) r.fail(path + "/id", "duplicate sector id " + sector.id);
        }
        if (auto cap = r.integer(s, path, "capacity")) {
          if (*cap < 1)
            r.fail(path + "/capacity", "capacity must be at least 1, got " + std::to_string(*cap));
          else
            sector.capacity = static_cast<int>(*cap);
        }
        if (const auto* bs = r.array(s, path, "boundaries")) {
          if (bs->empty()) r.fail(path + "/boundaries", "at least one (entry, exit) pair is required");
          for (std::size_t k = 0; k < bs->size(); ++k) {
            const auto bpath = path + "/boundaries/" + std::to_string(k);
            const auto entry = r.id((*bs)[k], bpath, "entry");
            const auto exit = r.id((*bs)[k], bpath, "exit");
            if (!entry || !exit) continue;
            for (const auto& [name, pid] : {std::pair{"entry", *entry}, std::pair{"exit", *exit}})
              if (!point_ids.count(pid)) r.fail(bpath + "/" + name, "unknown metering point " + pid);
            if (*entry == *exit) r.fail(bpath, "entry and exit must differ");
            sector.boundaries.emplace_back(*entry, *exit);
          }
        }
        sc.sectors.push_back(std::move(sector));
      }
    }
  }

  if (const auto* flights = r.array(doc, "", "flights")) {
    std::set<std::string> flight_ids;
    for (std::size_t i = 0; i < flights->size(); ++i) {
      const auto path = "/flights/" + std::to_string(i);
      const auto& f = (*flights)[i];
      const auto before = r.diagnostics.size();
      const auto fid = r.id(f, path, "id");
      if (fid && !flight_ids.insert(*fid).second) r.fail(path + "/id", "duplicate flight id " + *fid);
      std::optional<DistSpec> departure;
      if (const auto* d = r.member(f, path, "departure")) departure = r.distribution(*d, path + "/departure");
      const auto scheduled = r.number(f, path, "scheduled_arrival");

      std::vector<RouteEdge> edges;
      if (const auto* es = r.array(f, path, "edges")) {
        for (std::size_t k = 0; k < es->size(); ++k) {
          const auto epath = path + "/edges/" + std::to_string(k);
          const auto& e = (*es)[k];
          const auto from = r.id(e, epath, "from");
          const auto to = r.id(e, epath, "to");
          std::optional<DistSpec> travel;
          if (const auto* t = r.member(e, epath, "travel")) travel = r.distribution(*t, epath + "/travel");
          const auto lo = r.number(e, epath, "lower_bound");
          const auto hi = r.number(e, epath, "upper_bound");
          if (from && !point_ids.count(*from)) r.fail(epath + "/from", "unknown metering point " + *from);
          if (to && !point_ids.count(*to)) r.fail(epath + "/to", "unknown metering point " + *to);
          if (lo && hi && *lo > *hi) r.fail(epath, "lower_bound exceeds upper_bound");
          if (from && to && travel && lo && hi) {
            RouteEdge edge{*from, *to, *travel, *lo, *hi};
            const double mean = mean_of(*travel);
            if (mean < *lo - 1e-9 || mean > *hi + 1e-9)
              r.fail(epath, BoundsViolation(edge.id(), mean, *lo, *hi).what());
            edges.push_back(std::move(edge));
          }
        }
      }

      std::vector<std::vector<std::string>> routes;
      if (const auto* rs = r.array(f, path, "routes")) {
        if (rs->empty()) r.fail(path + "/routes", "at least one route is required");
        for (std::size_t k = 0; k < rs->size(); ++k) {
          const auto rpath = path + "/routes/" + std::to_string(k);
          if (!(*rs)[k].is_array()) {
            r.fail(rpath, "expected an array of point ids");
            continue;
          }
          std::vector<std::string> route;
          for (std::size_t j = 0; j < (*rs)[k].size(); ++j)
            if (auto pid = r.id((*rs)[k][j], rpath + "/" + std::to_string(j))) route.push_back(*pid);
          routes.push_back(std::move(route));
        }
      }
      std::size_t active = 0;
      if (auto a = r.integer(f, path, "active_route", false)) {
        if (*a < 0 || static_cast<std::size_t>(*a) >= std::max<std::size_t>(routes.size(), 1))
          r.fail(path + "/active_route", "route index out of range");
        else
          active = static_cast<std::size_t>(*a);
      }

      if (r.diagnostics.size() != before || !fid || !departure || !scheduled) continue;
      try {
        sc.flights.push_back(FlightPlan::create(*fid, *departure, *scheduled, std::move(edges), std::move(routes), active));
      } catch (const std::exception& e) {
        r.fail(path, e.what());
      }
    }
  }

  read_config(r, doc, sc.config);

  out.diagnostics = std::move(r.diagnostics);
  if (out.diagnostics.empty()) out.scenario = std::move(sc);
  return out;
}

ScenarioFile parse_scenario(std::string_view text) {
  auto check = check_scenario(text);
  if (!check.scenario) throw ScenarioError(std::move(check.diagnostics), check.parse_error);
  return std::move(*check.scenario);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioFile load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text(path)); }

ObservationEvent parse_event(std::string_view line) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("event must be a JSON object");

  Reader r;
  ObservationEvent ev;
  const auto ts = r.number(j, "", "timestamp");
  const auto flight = r.id(j, "", "flight");
  const auto* type = r.member(j, "", "type");
  if (ts) ev.timestamp = *ts;
  if (flight) ev.flight = *flight;
  if (type) {
    if (*type == "overflight") {
      ev.kind = EventKind::overflight;
      if (auto p = r.id(j, "", "point")) ev.point = *p;
      if (auto t = r.number(j, "", "time")) ev.observed_time = *t;
    } else if (*type == "departure") {
      ev.kind = EventKind::departure;
      if (j.contains("point"))
        if (auto p = r.id(j, "", "point")) ev.point = *p;
      if (auto t = r.number(j, "", "time")) ev.observed_time = *t;
    } else if (*type == "diversion") {
      ev.kind = EventKind::diversion;
      if (auto k = r.integer(j, "", "route")) {
        if (*k < 0)
          r.fail("/route", "must not be negative");
        else
          ev.route_index = static_cast<std::size_t>(*k);
      }
    } else {
      r.fail("/type", "expected overflight, departure or diversion");
    }
  }
  if (!r.diagnostics.empty()) {
    std::string msg;
    for (const auto& d : r.diagnostics) msg += (msg.empty() ? "" : "; ") + d.path.substr(1) + ": " + d.message;
    throw std::invalid_argument(msg);
  }
  return ev;
}

std::string event_to_json(const ObservationEvent& event) {
  json j;
  j["timestamp"] = event.timestamp;
  j["flight"] = event.flight;
  switch (event.kind) {
    case EventKind::overflight:
      j["type"] = "overflight";
      j["point"] = event.point;
      j["time"] = event.observed_time;
      break;
    case EventKind::departure:
      j["type"] = "departure";
      if (!event.point.empty()) j["point"] = event.point;
      j["time"] = event.observed_time;
      break;
    case EventKind::diversion:
      j["type"] = "diversion";
      j["route"] = event.route_index;
      break;
  }
  return j.dump();
}

EventFile read_events(std::istream& in) {
  EventFile out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.events.push_back({n, parse_event(line)});
    } catch (const std::exception& e) {
      out.errors.push_back({n, e.what()});
    }
  }
  return out;
}

}  // namespace atfm
