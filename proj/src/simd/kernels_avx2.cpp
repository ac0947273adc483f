#include <immintrin.h>

#include "atfm/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace atfm::simd {
namespace {

void pb_step_avx2(const double* in, double* out, std::size_t n, double p) {
  const double q = 1.0 - p;
  if (n == 0) {
    out[0] = 0.0;
    return;
  }
  out[0] = in[0] * q;
  const __m256d vq = _mm256_set1_pd(q);
  const __m256d vp = _mm256_set1_pd(p);
  std::size_t k = 1;
  for (; k + 4 <= n; k += 4) {
    const __m256d cur = _mm256_loadu_pd(in + k);
    const __m256d prev = _mm256_loadu_pd(in + k - 1);
    _mm256_storeu_pd(out + k, _mm256_add_pd(_mm256_mul_pd(cur, vq), _mm256_mul_pd(prev, vp)));
  }
  for (; k < n; ++k) out[k] = in[k] * q + in[k - 1] * p;
  out[n] = in[n - 1] * p;
}

void accumulate_presence_avx2(const double* entry, const double* exit, std::size_t m, double t0,
                              double t1, std::int64_t* counts) {
  const __m256d v0 = _mm256_set1_pd(t0);
  const __m256d v1 = _mm256_set1_pd(t1);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256d in_before = _mm256_cmp_pd(_mm256_loadu_pd(entry + i), v1, _CMP_LE_OQ);
    const __m256d out_after = _mm256_cmp_pd(_mm256_loadu_pd(exit + i), v0, _CMP_GE_OQ);
    // All-ones lanes read as -1 in two's complement.
    const __m256i hit = _mm256_castpd_si256(_mm256_and_pd(in_before, out_after));
    auto* dst = reinterpret_cast<__m256i*>(counts + i);
    _mm256_storeu_si256(dst, _mm256_sub_epi64(_mm256_loadu_si256(dst), hit));
  }
  for (; i < m; ++i) counts[i] += (entry[i] <= t1 && exit[i] >= t0) ? 1 : 0;
}

std::size_t count_above_avx2(const std::int64_t* counts, std::size_t m, std::int64_t threshold) {
  const __m256i thr = _mm256_set1_epi64x(threshold);
  std::size_t n = 0;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(counts + i));
    const int mask = _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(c, thr)));
    n += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
  }
  for (; i < m; ++i) n += counts[i] > threshold ? 1 : 0;
  return n;
}

void horner_avx2(const double* c, std::size_t nc, const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  if (nc > 0) {
    const __m256d top = _mm256_set1_pd(c[nc - 1]);
    for (; i + 4 <= n; i += 4) {
      const __m256d vx = _mm256_loadu_pd(x + i);
      __m256d r = top;
      for (std::size_t j = nc - 1; j-- > 0;)
        r = _mm256_add_pd(_mm256_mul_pd(r, vx), _mm256_set1_pd(c[j]));
      _mm256_storeu_pd(out + i, r);
    }
  }
  for (; i < n; ++i) out[i] = horner_one(c, nc, x[i]);
}

double reduce_lanes(__m256d acc) {
  alignas(32) double s[4];
  _mm256_store_pd(s, acc);
  return (s[0] + s[1]) + (s[2] + s[3]);
}

double lane_sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = reduce_lanes(acc);
  for (std::size_t i = full; i < n; ++i) total += x[i];
  return total;
}

double lane_sum_sq_dev_avx2(const double* x, std::size_t n, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t full = n - n % kLanes;
  for (std::size_t i = 0; i < full; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double total = reduce_lanes(acc);
  for (std::size_t i = full; i < n; ++i) {
    const double d = x[i] - mean;
    total += d * d;
  }
  return total;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::avx2,
                                 "avx2",
                                 pb_step_avx2,
                                 accumulate_presence_avx2,
                                 count_above_avx2,
                                 horner_avx2,
                                 lane_sum_avx2,
                                 lane_sum_sq_dev_avx2};
  return table;
}

}  // namespace atfm::simd
