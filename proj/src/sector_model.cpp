#include "atfm/sector_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "atfm/simd/kernels.hpp"

namespace atfm {

std::optional<Crossing> find_crossing(const Sector& sector, std::span<const std::string> route_points) {
  for (const auto& [entry, exit] : sector.boundaries) {
    const auto in = std::find(route_points.begin(), route_points.end(), entry);
    if (in == route_points.end()) continue;
    const auto out = std::find(in + 1, route_points.end(), exit);
    if (out == route_points.end()) continue;
    return Crossing{static_cast<std::size_t>(in - route_points.begin()),
                    static_cast<std::size_t>(out - route_points.begin())};
  }
  return std::nullopt;
}

double presence_probability(const TrajectoryBelief& belief, const Sector& sector, TimeSlice slice) {
  const auto crossing = find_crossing(sector, belief.points);
  if (!crossing) return 0.0;
  const auto& entry = belief.point_pdfs[crossing->entry];
  const auto& exit = belief.point_pdfs[crossing->exit];
  // Entering after t1 and leaving before t0 are disjoint since exit >= entry.
  const double enters_late = 1.0 - entry.cdf(slice.t1);
  const double leaves_early = exit.cdf_below(slice.t0);
  return std::clamp(1.0 - (enters_late + leaves_early), 0.0, 1.0);
}

std::vector<double> occupancy_distribution(std::span<const double> presence) {
  std::vector<double> pmf(presence.size() + 1, 0.0);
  std::vector<double> next(presence.size() + 1, 0.0);
  pmf[0] = 1.0;
  for (std::size_t i = 0; i < presence.size(); ++i) {
    simd::poisson_binomial_step(std::span<const double>(pmf.data(), i + 1), std::span<double>(next.data(), i + 2),
                                presence[i]);
    std::swap(pmf, next);
  }
  return pmf;
}

std::vector<double> occupancy_distribution(std::span<const TrajectoryBelief> beliefs, const Sector& sector,
                                           TimeSlice slice) {
  std::vector<double> presence;
  presence.reserve(beliefs.size());
  for (const auto& b : beliefs) presence.push_back(presence_probability(b, sector, slice));
  return occupancy_distribution(presence);
}

double tail_above(std::span<const double> pmf, int capacity) {
  double tail = 0.0;
  for (std::size_t k = pmf.size(); k-- > 0;) {
    if (static_cast<long long>(k) <= capacity) break;
    tail += pmf[k];
  }
  return std::clamp(tail, 0.0, 1.0);
}

double congestion_probability(std::span<const TrajectoryBelief> beliefs, const Sector& sector, TimeSlice slice) {
  return tail_above(occupancy_distribution(beliefs, sector, slice), sector.capacity);
}

std::vector<TimeSlice> make_slices(const Slicing& slicing) {
  if (!(slicing.width > 0.0)) throw std::invalid_argument("slice width must be positive");
  std::vector<TimeSlice> slices;
  for (std::size_t k = 0;; ++k) {
    const double t0 = slicing.start + static_cast<double>(k) * slicing.width;
    if (!(t0 < slicing.end)) break;
    slices.push_back({t0, t0 + slicing.width});
  }
  return slices;
}

Slicing default_slicing(std::span<const TrajectoryBelief> beliefs, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("slice width must be positive");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& b : beliefs)
    for (const auto& pdf : b.point_pdfs) {
      lo = std::min(lo, pdf.lower());
      hi = std::max(hi, pdf.upper());
    }
  if (!(lo <= hi)) return {width, 0.0, 0.0};
  return {width, std::floor(lo / width) * width, std::ceil(hi / width) * width};
}

bool SectorTimeline::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.flagged; });
}

double SectorTimeline::max_probability() const {
  double m = 0.0;
  for (const auto& r : rows) m = std::max(m, r.probability);
  return m;
}

double SectorTimeline::excess() const {
  double e = 0.0;
  for (const auto& r : rows) e += std::max(0.0, r.probability - epsilon);
  return e;
}

const TimelineRow* SectorTimeline::find(std::string_view sector, double t0, double t1) const {
  for (const auto& r : rows)
    if (r.sector_id == sector && r.t0 == t0 && r.t1 == t1) return &r;
  return nullptr;
}

SectorTimeline congestion_timeline(std::span<const TrajectoryBelief> beliefs, std::span<const Sector> sectors,
                                   const Slicing& slicing, double epsilon) {
  SectorTimeline timeline;
  timeline.epsilon = epsilon;
  const auto slices = make_slices(slicing);
  for (const auto& sector : sectors)
    for (const auto& slice : slices) {
      const double p = congestion_probability(beliefs, sector, slice);
      timeline.rows.push_back({sector.id, slice.t0, slice.t1, p, p > epsilon, 0.0});
    }
  return timeline;
}

void write_csv(std::ostream& os, const SectorTimeline& timeline, bool with_half_width) {
  os << "sector_id,t0,t1,congestion_probability,flagged";
  if (with_half_width) os << ",half_width";
  os << '\n';
  char buf[256];
  for (const auto& r : timeline.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.12f,%d", r.sector_id.c_str(), r.t0, r.t1, r.probability,
                  r.flagged ? 1 : 0);
    os << buf;
    if (with_half_width) {
      std::snprintf(buf, sizeof buf, ",%.12f", r.half_width);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace atfm
