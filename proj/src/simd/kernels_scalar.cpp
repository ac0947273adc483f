#include "atfm/simd/kernels.hpp"

#include "kernels_internal.hpp"

namespace atfm::simd {
namespace {

void pb_step_scalar(const double* in, double* out, std::size_t n, double p) {
  const double q = 1.0 - p;
  if (n == 0) {
    out[0] = 0.0;
    return;
  }
  out[0] = in[0] * q;
  for (std::size_t k = 1; k < n; ++k) out[k] = in[k] * q + in[k - 1] * p;
  out[n] = in[n - 1] * p;
}

void accumulate_presence_scalar(const double* entry, const double* exit, std::size_t m, double t0,
                                double t1, std::int64_t* counts) {
  for (std::size_t i = 0; i < m; ++i) counts[i] += (entry[i] <= t1 && exit[i] >= t0) ? 1 : 0;
}

std::size_t count_above_scalar(const std::int64_t* counts, std::size_t m, std::int64_t threshold) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m; ++i) n += counts[i] > threshold ? 1 : 0;
  return n;
}

void horner_scalar(const double* c, std::size_t nc, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = horner_one(c, nc, x[i]);
}

double lane_sum_scalar(const double* x, std::size_t n) {
  double s[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) s[j] += x[i + j];
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (std::size_t i = full; i < n; ++i) total += x[i];
  return total;
}

double lane_sum_sq_dev_scalar(const double* x, std::size_t n, double mean) {
  double s[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) {
      const double d = x[i + j] - mean;
      s[j] += d * d;
    }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (std::size_t i = full; i < n; ++i) {
    const double d = x[i] - mean;
    total += d * d;
  }
  return total;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar,
                                 "scalar",
                                 pb_step_scalar,
                                 accumulate_presence_scalar,
                                 count_above_scalar,
                                 horner_scalar,
                                 lane_sum_scalar,
                                 lane_sum_sq_dev_scalar};
  return table;
}

}  // namespace atfm::simd
