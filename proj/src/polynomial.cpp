#include "atfm/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace atfm::poly {

double eval(std::span<const double> c, double x) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

Coeffs add(std::span<const double> a, std::span<const double> b) {
  Coeffs out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

Coeffs multiply(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  Coeffs out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Coeffs scale(std::span<const double> a, double k) {
  Coeffs out(a.begin(), a.end());
  for (auto& v : out) v *= k;
  return out;
}

Coeffs taylor_shift(std::span<const double> p, double h) {
  // Repeated synthetic division (Horner's scheme for shifting).
  Coeffs q(p.begin(), p.end());
  if (h == 0.0) return q;
  const std::size_t n = q.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = n - 1; j-- > i;) q[j] += h * q[j + 1];
  return q;
}

Coeffs antiderivative(std::span<const double> p) {
  Coeffs out(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) out[i + 1] = p[i] / static_cast<double>(i + 1);
  return out;
}

Coeffs derivative(std::span<const double> p) {
  if (p.size() <= 1) return {0.0};
  Coeffs out(p.size() - 1);
  for (std::size_t i = 1; i < p.size(); ++i) out[i - 1] = p[i] * static_cast<double>(i);
  return out;
}

void trim(Coeffs& c, double width, double tol) {
  while (c.size() > 1) {
    const double contribution = std::abs(c.back()) * std::pow(width, static_cast<double>(c.size() - 1));
    if (contribution > tol) break;
    c.pop_back();
  }
}

double moment(std::span<const double> p, int n, double width) {
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const int e = static_cast<int>(j) + n + 1;
    total += p[j] * std::pow(width, e) / e;
  }
  return total;
}

}  // namespace atfm::poly
