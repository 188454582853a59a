// SPDX-License-Identifier: Apache-2.0
// Built with -mavx2; only reached after the dispatcher has checked the CPU.
#include <immintrin.h>

#include "variants.hpp"

namespace scaopo::kernels::detail {
namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(a, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void blend_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const double keep = 1.0 - alpha;
  const __m256d a = _mm256_set1_pd(alpha);
  const __m256d k = _mm256_set1_pd(keep);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yk = _mm256_mul_pd(k, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(yk, _mm256_mul_pd(a, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = keep * y[i] + alpha * x[i];
}

// MINPD/MAXPD return the second operand when either is NaN, so NaN inputs
// pass through exactly as in clamp_one.
inline __m256d clamp_vec(__m256d x, __m256d lo, __m256d hi) {
  return _mm256_max_pd(lo, _mm256_min_pd(hi, x));
}

void clamp_avx2(double* x, std::size_t n, double lo, double hi) {
  const __m256d l = _mm256_set1_pd(lo);
  const __m256d h = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, clamp_vec(_mm256_loadu_pd(x + i), l, h));
  for (; i < n; ++i) x[i] = clamp_one(x[i], lo, hi);
}

void dual_minimizer_avx2(const DualMinimizerInput& in, double* out, std::size_t n) {
  const double denom = 2.0 * weighted_curvature(in);
  const __m256d dv = _mm256_set1_pd(denom);
  const __m256d lo = _mm256_set1_pd(-in.bound);
  const __m256d hi = _mm256_set1_pd(in.bound);
  const __m256d sign = _mm256_set1_pd(-0.0);
  const std::size_t m = in.weights.size();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d g = _mm256_loadu_pd(in.gradients[i] + j);
      const __m256d t = _mm256_loadu_pd(in.anchors[i] + j);
      const __m256d term = _mm256_sub_pd(g, _mm256_mul_pd(_mm256_set1_pd(2.0 * in.sigmas[i]), t));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(in.weights[i]), term));
    }
    const __m256d x = _mm256_div_pd(_mm256_xor_pd(acc, sign), dv);
    _mm256_storeu_pd(out + j, clamp_vec(x, lo, hi));
  }
  for (; j < n; ++j) out[j] = dual_minimizer_one(in, j, denom);
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{dot_avx2,  squared_distance_avx2, axpy_avx2,
                             blend_avx2, clamp_avx2,           dual_minimizer_avx2};
  return t;
}

}  // namespace scaopo::kernels::detail
