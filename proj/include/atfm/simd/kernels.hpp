#pragma once

// Data-parallel inner loops shared by the exact and Monte-Carlo paths.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, a vector variant. Variants perform the same IEEE operations in
// the same order per element (reductions use a fixed four-lane layout in both),
// so the dispatched table is bit-for-bit interchangeable with the scalar one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace atfm::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  const char* name;

  // out[k] = in[k]*(1-p) + in[k-1]*p for k in [0, n]; out has n+1 slots.
  void (*poisson_binomial_step)(const double* in, double* out, std::size_t n, double p);

  // counts[m] += (entry[m] <= t1 && exit[m] >= t0)
  void (*accumulate_presence)(const double* entry, const double* exit, std::size_t m,
                              double t0, double t1, std::int64_t* counts);

  // Number of m with counts[m] > threshold.
  std::size_t (*count_above)(const std::int64_t* counts, std::size_t m, std::int64_t threshold);

  // out[i] = sum_j coeffs[j] * x[i]^j, Horner order.
  void (*horner)(const double* coeffs, std::size_t ncoeff, const double* x, double* out,
                 std::size_t n);

  double (*lane_sum)(const double* x, std::size_t n);
  double (*lane_sum_sq_dev)(const double* x, std::size_t n, double mean);
};

const KernelTable& scalar_table();

// nullptr when the variant is not compiled in or the running CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Best table for this CPU. ATFM_SIMD=scalar in the environment forces the
// reference kernels.
const KernelTable& active();

std::string_view isa_name(Isa isa);

// Span-level conveniences over the active table.

inline void poisson_binomial_step(std::span<const double> in, std::span<double> out, double p) {
  active().poisson_binomial_step(in.data(), out.data(), in.size(), p);
}

inline void accumulate_presence(std::span<const double> entry, std::span<const double> exit,
                                double t0, double t1, std::span<std::int64_t> counts) {
  active().accumulate_presence(entry.data(), exit.data(), counts.size(), t0, t1, counts.data());
}

inline std::size_t count_above(std::span<const std::int64_t> counts, std::int64_t threshold) {
  return active().count_above(counts.data(), counts.size(), threshold);
}

inline void horner(std::span<const double> coeffs, std::span<const double> x, std::span<double> out) {
  active().horner(coeffs.data(), coeffs.size(), x.data(), out.data(), x.size());
}

inline double lane_sum(std::span<const double> x) { return active().lane_sum(x.data(), x.size()); }

inline double lane_sum_sq_dev(std::span<const double> x, double mean) {
  return active().lane_sum_sq_dev(x.data(), x.size(), mean);
}

}  // namespace atfm::simd
