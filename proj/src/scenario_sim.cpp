#include "atfm/scenario_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "atfm/simd/kernels.hpp"

namespace atfm {

namespace {

void sample_range(std::span<const TrajectoryBelief> beliefs, ScenarioSet& set, std::size_t begin, std::size_t end) {
  for (std::size_t m = begin; m < end; ++m)
    for (std::size_t f = 0; f < beliefs.size(); ++f) {
      const auto& b = beliefs[f];
      auto& out = set.flights[f];
      const std::size_t n = b.points.size();
      double* times = out.overflight.data() + m * n;
      double* travel = out.travel.data() + m * (n - 1);

      auto rng = RngState::derive(set.master_seed, {m, f, 0});
      const double dep = sample(b.point_pdfs[0], rng);
      out.departure[m] = dep;
      times[0] = b.observed[0] ? *b.observed[0] : dep;
      for (std::size_t e = 0; e + 1 < n; ++e) {
        auto edge_rng = RngState::derive(set.master_seed, {m, f, e + 1});
        travel[e] = sample(b.edge_pdfs[e], edge_rng);
        times[e + 1] = b.observed[e + 1] ? *b.observed[e + 1] : times[e] + travel[e];
      }
    }
}

}  // namespace

Scenario ScenarioSet::scenario(std::size_t m) const {
  if (m >= size) throw std::out_of_range("scenario index out of range");
  Scenario s;
  for (const auto& f : flights) {
    Scenario::Flight out;
    out.flight_id = f.flight_id;
    out.departure = f.departure[m];
    const auto n = f.point_count();
    out.travel.assign(f.travel.begin() + static_cast<std::ptrdiff_t>(m * (n - 1)),
                      f.travel.begin() + static_cast<std::ptrdiff_t>((m + 1) * (n - 1)));
    out.overflight.assign(f.overflight.begin() + static_cast<std::ptrdiff_t>(m * n),
                          f.overflight.begin() + static_cast<std::ptrdiff_t>((m + 1) * n));
    s.flights.push_back(std::move(out));
  }
  return s;
}

std::vector<double> ScenarioSet::column(std::size_t flight, std::size_t point) const {
  const auto& f = flights.at(flight);
  const auto n = f.point_count();
  std::vector<double> out(size);
  for (std::size_t m = 0; m < size; ++m) out[m] = f.overflight[m * n + point];
  return out;
}

ScenarioSet sample_scenarios(std::span<const TrajectoryBelief> beliefs, std::size_t M, std::uint64_t master_seed,
                             SampleOptions options) {
  if (M < 1) throw std::invalid_argument("need at least one scenario");
  ScenarioSet set;
  set.master_seed = master_seed;
  set.size = M;
  for (const auto& b : beliefs) {
    FlightSamples fs;
    fs.flight_id = b.flight_id;
    fs.points = b.points;
    fs.departure.resize(M);
    fs.travel.resize(M * (b.points.size() - 1));
    fs.overflight.resize(M * b.points.size());
    set.flights.push_back(std::move(fs));
  }

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, M);
  if (workers == 1) {
    sample_range(beliefs, set, 0, M);
    return set;
  }
  // Workers write disjoint scenario rows.
  std::vector<std::jthread> pool;
  const std::size_t chunk = (M + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(M, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] { sample_range(beliefs, set, begin, end); });
  }
  pool.clear();
  return set;
}

ScenarioSet sample_scenarios(std::span<const FlightPlan> plans, std::span<const EdgeShifts> shifts, std::size_t M,
                             std::uint64_t master_seed, SampleOptions options) {
  if (!shifts.empty() && shifts.size() != plans.size())
    throw std::invalid_argument("one shift vector per flight plan expected");
  std::vector<TrajectoryBelief> beliefs;
  for (std::size_t f = 0; f < plans.size(); ++f)
    beliefs.push_back(propagate(plans[f], shifts.empty() ? EdgeShifts{} : shifts[f]));
  return sample_scenarios(beliefs, M, master_seed, options);
}

SectorTimeline estimate_congestion(const ScenarioSet& set, std::span<const Sector> sectors, const Slicing& slicing,
                                   double epsilon) {
  SectorTimeline timeline;
  timeline.epsilon = epsilon;
  const auto slices = make_slices(slicing);
  const double M = static_cast<double>(set.size);
  std::vector<std::int64_t> counts(set.size);

  for (const auto& sector : sectors) {
    struct Interval {
      std::vector<double> entry, exit;
    };
    std::vector<Interval> crossing;
    for (std::size_t f = 0; f < set.flights.size(); ++f) {
      const auto c = find_crossing(sector, set.flights[f].points);
      if (c) crossing.push_back({set.column(f, c->entry), set.column(f, c->exit)});
    }
    for (const auto& slice : slices) {
      std::size_t congested = 0;
      if (static_cast<long long>(crossing.size()) > sector.capacity) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& iv : crossing) simd::accumulate_presence(iv.entry, iv.exit, slice.t0, slice.t1, counts);
        congested = simd::count_above(counts, sector.capacity);
      }
      const double p = static_cast<double>(congested) / M;
      const double hw = 3.0 * std::sqrt(p * (1.0 - p) / M);
      timeline.rows.push_back({sector.id, slice.t0, slice.t1, p, p > epsilon, hw});
    }
  }
  return timeline;
}

std::vector<ArrivalEstimate> estimate_expected_arrivals(const ScenarioSet& set) {
  if (set.size == 0) throw std::invalid_argument("no scenarios to estimate from");
  std::vector<ArrivalEstimate> out;
  const double M = static_cast<double>(set.size);
  for (std::size_t f = 0; f < set.flights.size(); ++f) {
    const auto arr = set.arrivals(f);
    const double mean = simd::lane_sum(arr) / M;
    // A single scenario has no spread estimate; report zero.
    const double var = set.size > 1 ? simd::lane_sum_sq_dev(arr, mean) / (M - 1.0) : 0.0;
    out.push_back({set.flights[f].flight_id, mean, var, 3.0 * std::sqrt(var / M)});
  }
  return out;
}

void write_jsonl(std::ostream& os, const ScenarioSet& set) {
  for (std::size_t m = 0; m < set.size; ++m) {
    const auto s = set.scenario(m);
    nlohmann::json line;
    line["scenario"] = m;
    auto& flights = line["flights"] = nlohmann::json::array();
    for (std::size_t f = 0; f < s.flights.size(); ++f) {
      const auto& fl = s.flights[f];
      nlohmann::json times = nlohmann::json::object();
      for (std::size_t i = 0; i < fl.overflight.size(); ++i) times[set.flights[f].points[i]] = fl.overflight[i];
      flights.push_back({{"flight", fl.flight_id}, {"departure", fl.departure}, {"travel", fl.travel},
                         {"overflight", times}});
    }
    os << line.dump() << '\n';
  }
}

}  // namespace atfm
