#include <arm_neon.h>

#include "atfm/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace atfm::simd {
namespace {

void pb_step_neon(const double* in, double* out, std::size_t n, double p) {
  const double q = 1.0 - p;
  if (n == 0) {
    out[0] = 0.0;
    return;
  }
  out[0] = in[0] * q;
  const float64x2_t vq = vdupq_n_f64(q);
  const float64x2_t vp = vdupq_n_f64(p);
  std::size_t k = 1;
  for (; k + 2 <= n; k += 2) {
    const float64x2_t cur = vld1q_f64(in + k);
    const float64x2_t prev = vld1q_f64(in + k - 1);
    // vmulq + vaddq, not vfmaq: must match the scalar rounding.
    vst1q_f64(out + k, vaddq_f64(vmulq_f64(cur, vq), vmulq_f64(prev, vp)));
  }
  for (; k < n; ++k) out[k] = in[k] * q + in[k - 1] * p;
  out[n] = in[n - 1] * p;
}

void accumulate_presence_neon(const double* entry, const double* exit, std::size_t m, double t0,
                              double t1, std::int64_t* counts) {
  const float64x2_t v0 = vdupq_n_f64(t0);
  const float64x2_t v1 = vdupq_n_f64(t1);
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const uint64x2_t hit = vandq_u64(vcleq_f64(vld1q_f64(entry + i), v1),
                                     vcgeq_f64(vld1q_f64(exit + i), v0));
    const int64x2_t c = vld1q_s64(counts + i);
    vst1q_s64(counts + i, vsubq_s64(c, vreinterpretq_s64_u64(hit)));
  }
  for (; i < m; ++i) counts[i] += (entry[i] <= t1 && exit[i] >= t0) ? 1 : 0;
}

std::size_t count_above_neon(const std::int64_t* counts, std::size_t m, std::int64_t threshold) {
  const int64x2_t thr = vdupq_n_s64(threshold);
  std::size_t n = 0;
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const uint64x2_t gt = vcgtq_s64(vld1q_s64(counts + i), thr);
    n += static_cast<std::size_t>(vgetq_lane_u64(gt, 0) & 1u) +
         static_cast<std::size_t>(vgetq_lane_u64(gt, 1) & 1u);
  }
  for (; i < m; ++i) n += counts[i] > threshold ? 1 : 0;
  return n;
}

void horner_neon(const double* c, std::size_t nc, const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  if (nc > 0) {
    for (; i + 2 <= n; i += 2) {
      const float64x2_t vx = vld1q_f64(x + i);
      float64x2_t r = vdupq_n_f64(c[nc - 1]);
      for (std::size_t j = nc - 1; j-- > 0;) r = vaddq_f64(vmulq_f64(r, vx), vdupq_n_f64(c[j]));
      vst1q_f64(out + i, r);
    }
  }
  for (; i < n; ++i) out[i] = horner_one(c, nc, x[i]);
}

// Two 2-lane registers reproduce the four-lane reduction layout.
double lane_sum_neon(const double* x, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (std::size_t i = full; i < n; ++i) total += x[i];
  return total;
}

double lane_sum_sq_dev_neon(const double* x, std::size_t n, double mean) {
  const float64x2_t vm = vdupq_n_f64(mean);
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), vm);
    const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), vm);
    lo = vaddq_f64(lo, vmulq_f64(d0, d0));
    hi = vaddq_f64(hi, vmulq_f64(d1, d1));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (std::size_t i = full; i < n; ++i) {
    const double d = x[i] - mean;
    total += d * d;
  }
  return total;
}

}  // namespace

const KernelTable& neon_kernels() {
  static const KernelTable table{Isa::neon,
                                 "neon",
                                 pb_step_neon,
                                 accumulate_presence_neon,
                                 count_above_neon,
                                 horner_neon,
                                 lane_sum_neon,
                                 lane_sum_sq_dev_neon};
  return table;
}

}  // namespace atfm::simd
