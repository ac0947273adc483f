#pragma once

// Dense univariate polynomials, coefficients in increasing degree.

#include <span>
#include <vector>

namespace atfm::poly {

using Coeffs = std::vector<double>;

double eval(std::span<const double> c, double x);

Coeffs add(std::span<const double> a, std::span<const double> b);
Coeffs multiply(std::span<const double> a, std::span<const double> b);
Coeffs scale(std::span<const double> a, double k);

// q(s) = p(s + h)
Coeffs taylor_shift(std::span<const double> p, double h);

// Antiderivative vanishing at 0.
Coeffs antiderivative(std::span<const double> p);

Coeffs derivative(std::span<const double> p);

// Drops high-order coefficients whose contribution over [0, width] is below tol.
void trim(Coeffs& c, double width, double tol);

// Integral of s^n * p(s) over [0, width].
double moment(std::span<const double> p, int n, double width);

}  // namespace atfm::poly
