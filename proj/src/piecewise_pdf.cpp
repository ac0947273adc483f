#include "atfm/piecewise_pdf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "atfm/polynomial.hpp"
#include "atfm/simd/kernels.hpp"

namespace atfm {

namespace {

// Round-off below this is clamped away; anything more negative is a bug.
constexpr double kNegativeClamp = 1e-12;
// Breakpoints closer than this are treated as one.
constexpr double kBreakMerge = 1e-9;
constexpr int kNegativityProbes = 16;

double piece_magnitude(std::span<const double> c, double width) {
  double m = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) m += std::abs(c[j]) * std::pow(width, static_cast<double>(j));
  return m;
}

bool all_zero(std::span<const double> c) {
  return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
}

// Binomial coefficients up to row n.
std::vector<std::vector<double>> pascal(std::size_t n) {
  std::vector<std::vector<double>> rows(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    rows[k].assign(k + 1, 1.0);
    for (std::size_t m = 1; m < k; ++m) rows[k][m] = rows[k - 1][m - 1] + rows[k - 1][m];
  }
  return rows;
}

// Polynomial (in v) of the integral over s in [lower(v), upper(v)] of
// p(s) * q(v - s). lower/upper are polynomials in v of degree <= 1.
poly::Coeffs overlap_integral(std::span<const double> p, std::span<const double> q,
                              const poly::Coeffs& lower, const poly::Coeffs& upper) {
  const std::size_t max_power = p.size() + q.size();
  std::vector<poly::Coeffs> upow{{1.0}}, lpow{{1.0}};
  for (std::size_t n = 1; n <= max_power; ++n) {
    upow.push_back(poly::multiply(upow.back(), upper));
    lpow.push_back(poly::multiply(lpow.back(), lower));
  }
  const auto binom = pascal(q.size());

  poly::Coeffs out(max_power + 1, 0.0);
  // q(v - s) = sum_k q_k sum_m C(k,m) v^(k-m) (-s)^m
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    for (std::size_t m = 0; m <= k; ++m) {
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      const double qk_m = q[k] * binom[k][m] * sign;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] == 0.0) continue;
        const std::size_t n = j + m + 1;
        const double coef = p[j] * qk_m / static_cast<double>(n);
        // coef * v^(k-m) * (U^n - L^n)
        const auto& un = upow[n];
        const auto& ln = lpow[n];
        const std::size_t span_len = std::max(un.size(), ln.size());
        for (std::size_t d = 0; d < span_len; ++d) {
          const double diff = (d < un.size() ? un[d] : 0.0) - (d < ln.size() ? ln[d] : 0.0);
          if (diff == 0.0) continue;
          const std::size_t deg = d + (k - m);
          if (deg >= out.size()) out.resize(deg + 1, 0.0);
          out[deg] += coef * diff;
        }
      }
    }
  }
  return out;
}

struct Part {
  double start;
  double end;
  poly::Coeffs coeffs;  // in (z - start)
};

void append_pair_parts(double xa, double wa, std::span<const double> p, double xb, double wb,
                       std::span<const double> q, std::vector<Part>& parts) {
  const double origin = xa + xb;
  const double narrow = std::min(wa, wb);
  const double wide = std::max(wa, wb);

  // Rising, plateau-like and falling regimes of the overlap [max(0,w-wb), min(wa,w)].
  struct Regime {
    double w_start, w_end;
    poly::Coeffs lower, upper;  // in v = w - w_start
  };
  std::vector<Regime> regimes;
  regimes.push_back({0.0, narrow, {0.0}, {0.0, 1.0}});
  if (wide > narrow) {
    if (wa <= wb)
      regimes.push_back({narrow, wide, {0.0}, {wa}});
    else
      regimes.push_back({narrow, wide, {0.0, 1.0}, {wb, 1.0}});
  }
  regimes.push_back({wide, wa + wb, {wide - wb, 1.0}, {wa}});

  for (const auto& r : regimes) {
    if (!(r.w_end > r.w_start)) continue;
    // q(w - s) with w = v + w_start.
    const auto q_local = poly::taylor_shift(q, r.w_start);
    auto h = overlap_integral(p, q_local, r.lower, r.upper);
    parts.push_back({origin + r.w_start, origin + r.w_end, std::move(h)});
  }
}

std::size_t nearest_index(const std::vector<double>& sorted, double x) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
  if (it == sorted.end()) return sorted.size() - 1;
  if (it != sorted.begin() && (x - *(it - 1)) < (*it - x)) --it;
  return static_cast<std::size_t>(it - sorted.begin());
}

}  // namespace

DiscretizationRequired::DiscretizationRequired(std::size_t pieces, std::size_t cap)
    : std::runtime_error("convolution needs " + std::to_string(pieces) + " pieces, cap is " +
                         std::to_string(cap) + "; discretization required"),
      pieces_(pieces),
      cap_(cap) {}

PiecewisePdf PiecewisePdf::from_pieces(std::vector<double> breakpoints,
                                       std::vector<std::vector<double>> pieces) {
  if (breakpoints.size() < 2 || pieces.size() + 1 != breakpoints.size())
    throw std::invalid_argument("piecewise pdf needs n+1 breakpoints for n pieces");
  for (std::size_t k = 0; k < breakpoints.size(); ++k) {
    if (!std::isfinite(breakpoints[k])) throw std::invalid_argument("non-finite breakpoint");
    if (k > 0 && !(breakpoints[k] > breakpoints[k - 1]))
      throw std::invalid_argument("breakpoints must be strictly increasing");
  }
  for (auto& c : pieces)
    if (c.empty()) c.push_back(0.0);

  PiecewisePdf f;
  f.breaks_ = std::move(breakpoints);
  f.pieces_ = std::move(pieces);
  f.finish();
  return f;
}

PiecewisePdf PiecewisePdf::dirac(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("point mass location must be finite");
  PiecewisePdf f;
  f.breaks_ = {t};
  f.cumulative_ = {0.0};
  f.point_ = t;
  return f;
}

void PiecewisePdf::finish() {
  double worst = 0.0;
  double peak = 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const double w = breaks_[k + 1] - breaks_[k];
    for (int i = 0; i <= kNegativityProbes; ++i) {
      const double v = poly::eval(pieces_[k], w * i / kNegativityProbes);
      worst = std::min(worst, v);
      peak = std::max(peak, v);
    }
  }
  if (worst < -kNegativeClamp) {
    std::ostringstream msg;
    msg << "density goes negative (" << worst << ")";
    throw std::domain_error(msg.str());
  }

  double total = 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k)
    total += poly::moment(pieces_[k], 0, breaks_[k + 1] - breaks_[k]);
  if (!(std::abs(total - 1.0) <= 1e-6)) {
    std::ostringstream msg;
    msg << "density integrates to " << total << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
  if (total != 1.0)
    for (auto& c : pieces_)
      for (auto& v : c) v /= total;

  antiderivs_.clear();
  cumulative_.assign(1, 0.0);
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    antiderivs_.push_back(poly::antiderivative(pieces_[k]));
    cumulative_.push_back(cumulative_.back() + poly::eval(antiderivs_.back(), breaks_[k + 1] - breaks_[k]));
  }
}

int PiecewisePdf::degree() const {
  int d = 0;
  for (const auto& c : pieces_) d = std::max(d, static_cast<int>(c.size()) - 1);
  return d;
}

std::size_t PiecewisePdf::locate(double t) const {
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  const auto idx = static_cast<std::ptrdiff_t>(it - breaks_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(pieces_.size()) - 1));
}

double PiecewisePdf::density(double t) const {
  if (point_) return t == *point_ ? std::numeric_limits<double>::infinity() : 0.0;
  if (t < lower() || t > upper()) return 0.0;
  const auto k = locate(t);
  return std::max(0.0, poly::eval(pieces_[k], t - breaks_[k]));
}

double PiecewisePdf::cdf(double t) const {
  if (point_) return t >= *point_ ? 1.0 : 0.0;
  if (t <= lower()) return 0.0;
  if (t >= upper()) return 1.0;
  const auto k = locate(t);
  return std::clamp(cumulative_[k] + poly::eval(antiderivs_[k], t - breaks_[k]), 0.0, 1.0);
}

double PiecewisePdf::cdf_below(double t) const {
  if (point_) return t > *point_ ? 1.0 : 0.0;
  return cdf(t);
}

std::vector<double> PiecewisePdf::cdf_many(std::span<const double> sorted_t) const {
  std::vector<double> out(sorted_t.size());
  if (point_) {
    for (std::size_t i = 0; i < sorted_t.size(); ++i) out[i] = cdf(sorted_t[i]);
    return out;
  }
  std::vector<double> local;
  std::size_t i = 0;
  while (i < sorted_t.size()) {
    const double t = sorted_t[i];
    if (t <= lower() || t >= upper()) {
      out[i] = cdf(t);
      ++i;
      continue;
    }
    const auto k = locate(t);
    const double right = breaks_[k + 1];
    std::size_t j = i;
    local.clear();
    while (j < sorted_t.size() && sorted_t[j] < right && sorted_t[j] >= breaks_[k]) {
      local.push_back(sorted_t[j] - breaks_[k]);
      ++j;
    }
    simd::horner(antiderivs_[k], local, std::span<double>(out).subspan(i, local.size()));
    for (std::size_t m = i; m < j; ++m) out[m] = std::clamp(cumulative_[k] + out[m], 0.0, 1.0);
    i = j;
  }
  return out;
}

double PiecewisePdf::expectation() const {
  if (point_) return *point_;
  double e = 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const double w = breaks_[k + 1] - breaks_[k];
    e += breaks_[k] * poly::moment(pieces_[k], 0, w) + poly::moment(pieces_[k], 1, w);
  }
  return e;
}

double PiecewisePdf::variance() const {
  if (point_) return 0.0;
  const double mu = expectation();
  double v = 0.0;
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const double w = breaks_[k + 1] - breaks_[k];
    const double d = breaks_[k] - mu;
    v += d * d * poly::moment(pieces_[k], 0, w) + 2.0 * d * poly::moment(pieces_[k], 1, w) +
         poly::moment(pieces_[k], 2, w);
  }
  return std::max(0.0, v);
}

PiecewisePdf uniform_pdf(UniformSpec spec) {
  if (!std::isfinite(spec.lower) || !std::isfinite(spec.upper) || !(spec.upper > spec.lower))
    throw std::invalid_argument("uniform needs finite bounds with lower < upper");
  return PiecewisePdf::from_pieces({spec.lower, spec.upper}, {{1.0 / (spec.upper - spec.lower)}});
}

PiecewisePdf point_mass(double t) { return PiecewisePdf::dirac(t); }

PiecewisePdf shift(const PiecewisePdf& f, double delta) {
  if (f.is_point_mass()) return point_mass(*f.point_location() + delta);
  std::vector<double> breaks(f.breakpoints().begin(), f.breakpoints().end());
  for (auto& b : breaks) b += delta;
  std::vector<std::vector<double>> pieces;
  for (std::size_t k = 0; k < f.piece_count(); ++k) pieces.emplace_back(f.piece(k).begin(), f.piece(k).end());
  return PiecewisePdf::from_pieces(std::move(breaks), std::move(pieces));
}

PiecewisePdf convolve(const PiecewisePdf& a, const PiecewisePdf& b, ConvolveOptions options) {
  if (a.is_point_mass()) return shift(b, *a.point_location());
  if (b.is_point_mass()) return shift(a, *b.point_location());

  std::vector<Part> parts;
  parts.reserve(a.piece_count() * b.piece_count() * 3);
  const auto xa = a.breakpoints();
  const auto xb = b.breakpoints();
  for (std::size_t i = 0; i < a.piece_count(); ++i) {
    if (all_zero(a.piece(i))) continue;
    for (std::size_t j = 0; j < b.piece_count(); ++j) {
      if (all_zero(b.piece(j))) continue;
      append_pair_parts(xa[i], xa[i + 1] - xa[i], a.piece(i), xb[j], xb[j + 1] - xb[j], b.piece(j), parts);
    }
  }

  std::vector<double> raw;
  raw.reserve(parts.size() * 2 + 2);
  raw.push_back(a.lower() + b.lower());
  raw.push_back(a.upper() + b.upper());
  for (const auto& part : parts) {
    raw.push_back(part.start);
    raw.push_back(part.end);
  }
  std::sort(raw.begin(), raw.end());
  std::vector<double> grid;
  for (double x : raw) {
    if (!grid.empty() && x - grid.back() <= kBreakMerge * std::max(1.0, std::abs(x))) continue;
    grid.push_back(x);
  }
  // The exact outer support wins over any merged neighbour.
  grid.front() = a.lower() + b.lower();
  grid.back() = a.upper() + b.upper();

  const std::size_t n_pieces = grid.size() - 1;
  if (n_pieces > options.piece_cap) throw DiscretizationRequired(n_pieces, options.piece_cap);

  std::vector<std::vector<double>> pieces(n_pieces, std::vector<double>{0.0});
  for (const auto& part : parts) {
    const auto first = nearest_index(grid, part.start);
    const auto last = nearest_index(grid, part.end);
    for (std::size_t k = first; k < last; ++k)
      pieces[k] = poly::add(pieces[k], poly::taylor_shift(part.coeffs, grid[k] - part.start));
  }
  for (std::size_t k = 0; k < n_pieces; ++k) {
    const double w = grid[k + 1] - grid[k];
    poly::trim(pieces[k], w, 1e-14 * std::max(piece_magnitude(pieces[k], w), 1e-300));
  }
  return simplify(PiecewisePdf::from_pieces(std::move(grid), std::move(pieces)));
}

PiecewisePdf simplify(const PiecewisePdf& f) {
  if (f.is_point_mass() || f.piece_count() < 2) return f;
  const auto x = f.breakpoints();
  std::vector<double> breaks{x[0]};
  std::vector<std::vector<double>> pieces{{f.piece(0).begin(), f.piece(0).end()}};
  double current_start = x[0];
  for (std::size_t k = 1; k < f.piece_count(); ++k) {
    const auto next = f.piece(k);
    const double w_next = x[k + 1] - x[k];
    const auto continued = poly::taylor_shift(pieces.back(), x[k] - current_start);
    const std::size_t n = std::max(continued.size(), next.size());
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = j < continued.size() ? continued[j] : 0.0;
      const double b = j < next.size() ? next[j] : 0.0;
      diff += std::abs(a - b) * std::pow(w_next, static_cast<double>(j));
    }
    if (diff <= 1e-13 * std::max(1.0, piece_magnitude(next, w_next))) continue;
    breaks.push_back(x[k]);
    pieces.emplace_back(next.begin(), next.end());
    current_start = x[k];
  }
  breaks.push_back(x.back());
  if (pieces.size() == f.piece_count()) return f;
  return PiecewisePdf::from_pieces(std::move(breaks), std::move(pieces));
}

double sample(const PiecewisePdf& f, RngState& rng) {
  const double u = rng.uniform01();
  if (f.is_point_mass()) return *f.point_location();

  const auto cum = f.cumulative();
  const auto x = f.breakpoints();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cum.begin()) - 1));
  if (k >= f.piece_count()) return f.upper();

  const auto p = f.piece(k);
  const double w = x[k + 1] - x[k];
  const double target = u - cum[k];
  const double mass = cum[k + 1] - cum[k];
  if (p.size() == 1) return x[k] + std::min(w, target / p[0]);

  const auto F = poly::antiderivative(p);
  double lo = 0.0, hi = w;
  double s = mass > 0.0 ? w * target / mass : 0.5 * w;
  for (int iter = 0; iter < 100; ++iter) {
    const double g = poly::eval(F, s) - target;
    if (g > 0.0)
      hi = s;
    else
      lo = s;
    if (std::abs(g) < 1e-16 || hi - lo < 1e-14 * w) break;
    const double d = poly::eval(p, s);
    double next = d > 0.0 ? s - g / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    s = next;
  }
  return x[k] + s;
}

Discretized discretize(const PiecewisePdf& f, double grid_step) {
  if (!(grid_step > 0.0) || !std::isfinite(grid_step)) throw std::invalid_argument("grid step must be positive");
  if (f.is_point_mass()) return {f, 0.0};

  const double lo = f.lower();
  const double hi = f.upper();
  const auto cells = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / grid_step - 1e-9)));
  std::vector<double> grid(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) grid[i] = lo + static_cast<double>(i) * grid_step;
  grid.back() = hi;

  const auto cdf_at = f.cdf_many(grid);
  std::vector<std::vector<double>> pieces(cells);
  for (std::size_t i = 0; i < cells; ++i)
    pieces[i] = {std::max(0.0, cdf_at[i + 1] - cdf_at[i]) / (grid[i + 1] - grid[i])};

  // Interior probes of the interpolated CDF against the exact one.
  constexpr int kProbes = 16;
  std::vector<double> probes;
  std::vector<double> interp;
  probes.reserve(cells * kProbes);
  for (std::size_t i = 0; i < cells; ++i)
    for (int j = 1; j < kProbes; ++j) {
      const double frac = static_cast<double>(j) / kProbes;
      probes.push_back(grid[i] + frac * (grid[i + 1] - grid[i]));
      interp.push_back(cdf_at[i] + frac * (cdf_at[i + 1] - cdf_at[i]));
    }
  const auto exact = f.cdf_many(probes);
  double deviation = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) deviation = std::max(deviation, std::abs(exact[i] - interp[i]));

  return {simplify(PiecewisePdf::from_pieces(std::move(grid), std::move(pieces))), deviation};
}

DensityCurve density_curve(const PiecewisePdf& f, std::size_t n) {
  DensityCurve curve;
  if (f.is_point_mass() || n < 2) {
    curve.t = {f.expectation()};
    curve.density = {f.is_point_mass() ? std::numeric_limits<double>::infinity() : f.density(f.expectation())};
    return curve;
  }
  curve.t.resize(n);
  curve.density.resize(n);
  const double lo = f.lower(), hi = f.upper();
  for (std::size_t i = 0; i < n; ++i) curve.t[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);

  const auto x = f.breakpoints();
  std::vector<double> local;
  std::size_t i = 0;
  for (std::size_t k = 0; k < f.piece_count() && i < n; ++k) {
    const bool last = k + 1 == f.piece_count();
    local.clear();
    std::size_t j = i;
    while (j < n && (curve.t[j] < x[k + 1] || last)) local.push_back(curve.t[j++] - x[k]);
    simd::horner(f.piece(k), local, std::span<double>(curve.density).subspan(i, local.size()));
    i = j;
  }
  for (auto& d : curve.density) d = std::max(0.0, d);
  return curve;
}

std::string describe(const PiecewisePdf& f) {
  std::ostringstream os;
  if (f.is_point_mass()) {
    os << "point(" << *f.point_location() << ")";
  } else {
    os << "pdf[" << f.lower() << ", " << f.upper() << "] pieces=" << f.piece_count() << " degree=" << f.degree();
  }
  return os.str();
}

}  // namespace atfm
