#pragma once

// Exact algebra on one-dimensional densities represented as piecewise
// polynomials over a bounded support. Times are in minutes.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atfm/rng.hpp"

namespace atfm {

inline constexpr double kPdfTolerance = 1e-9;
inline constexpr std::size_t kDefaultPieceCap = 512;

// Thrown by convolve when the exact result would exceed the piece cap.
class DiscretizationRequired : public std::runtime_error {
 public:
  DiscretizationRequired(std::size_t pieces, std::size_t cap);
  std::size_t pieces() const { return pieces_; }
  std::size_t cap() const { return cap_; }

 private:
  std::size_t pieces_;
  std::size_t cap_;
};

struct UniformSpec {
  double lower = 0.0;
  double upper = 1.0;

  friend bool operator==(const UniformSpec&, const UniformSpec&) = default;
};

class PiecewisePdf {
 public:
  // Validates the invariants (increasing breakpoints, nonnegative density,
  // unit mass) and renormalises away round-off. Each piece is a polynomial in
  // the local coordinate s = t - breakpoints[k].
  static PiecewisePdf from_pieces(std::vector<double> breakpoints,
                                  std::vector<std::vector<double>> pieces);

  static PiecewisePdf dirac(double t);

  bool is_point_mass() const { return point_.has_value(); }
  std::optional<double> point_location() const { return point_; }

  double lower() const { return breaks_.front(); }
  double upper() const { return breaks_.back(); }

  std::span<const double> breakpoints() const { return breaks_; }
  std::size_t piece_count() const { return pieces_.size(); }
  std::span<const double> piece(std::size_t k) const { return pieces_[k]; }
  int degree() const;

  double density(double t) const;

  // P(X <= t); right-continuous.
  double cdf(double t) const;
  // P(X < t); differs from cdf only at a point mass.
  double cdf_below(double t) const;

  // Probability carried by [lower(), t] evaluated on many sorted points at once.
  std::vector<double> cdf_many(std::span<const double> sorted_t) const;

  double expectation() const;
  double variance() const;

  // Cumulative mass at each breakpoint (size piece_count()+1).
  std::span<const double> cumulative() const { return cumulative_; }

  friend bool operator==(const PiecewisePdf&, const PiecewisePdf&) = default;

 private:
  PiecewisePdf() = default;
  void finish();
  std::size_t locate(double t) const;

  std::vector<double> breaks_;
  std::vector<std::vector<double>> pieces_;
  std::vector<std::vector<double>> antiderivs_;
  std::vector<double> cumulative_;
  std::optional<double> point_;
};

PiecewisePdf uniform_pdf(UniformSpec spec);
PiecewisePdf point_mass(double t);

struct ConvolveOptions {
  std::size_t piece_cap = kDefaultPieceCap;
};

// Exact density of the sum of two independent variables.
PiecewisePdf convolve(const PiecewisePdf& a, const PiecewisePdf& b, ConvolveOptions options = {});

PiecewisePdf shift(const PiecewisePdf& f, double delta);

// Inverse-CDF draw; consumes exactly one uniform from rng.
double sample(const PiecewisePdf& f, RngState& rng);

struct Discretized {
  PiecewisePdf pdf;
  double max_cdf_deviation = 0.0;
};

// Piecewise-constant approximation on a uniform grid anchored at f.lower().
Discretized discretize(const PiecewisePdf& f, double grid_step);

// Merges adjacent pieces that carry the same polynomial.
PiecewisePdf simplify(const PiecewisePdf& f);

// Density sampled on n evenly spaced points across the support.
struct DensityCurve {
  std::vector<double> t;
  std::vector<double> density;
};
DensityCurve density_curve(const PiecewisePdf& f, std::size_t n);

std::string describe(const PiecewisePdf& f);

}  // namespace atfm
