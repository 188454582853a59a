// SPDX-License-Identifier: Apache-2.0
#include <arm_neon.h>

#include "variants.hpp"

namespace scaopo::kernels::detail {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    acc = vaddq_f64(acc, vmulq_f64(d, d));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(a, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void blend_neon(double alpha, const double* x, double* y, std::size_t n) {
  const double keep = 1.0 - alpha;
  const float64x2_t a = vdupq_n_f64(alpha);
  const float64x2_t k = vdupq_n_f64(keep);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vmulq_f64(k, vld1q_f64(y + i)), vmulq_f64(a, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = keep * y[i] + alpha * x[i];
}

// Compare-and-select keeps NaN inputs unchanged, matching clamp_one.
inline float64x2_t clamp_vec(float64x2_t x, float64x2_t lo, float64x2_t hi) {
  const float64x2_t below = vbslq_f64(vcltq_f64(x, lo), lo, x);
  return vbslq_f64(vcltq_f64(hi, below), hi, below);
}

void clamp_neon(double* x, std::size_t n, double lo, double hi) {
  const float64x2_t l = vdupq_n_f64(lo);
  const float64x2_t h = vdupq_n_f64(hi);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, clamp_vec(vld1q_f64(x + i), l, h));
  for (; i < n; ++i) x[i] = clamp_one(x[i], lo, hi);
}

void dual_minimizer_neon(const DualMinimizerInput& in, double* out, std::size_t n) {
  const double denom = 2.0 * weighted_curvature(in);
  const float64x2_t dv = vdupq_n_f64(denom);
  const float64x2_t lo = vdupq_n_f64(-in.bound);
  const float64x2_t hi = vdupq_n_f64(in.bound);
  const std::size_t m = in.weights.size();
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const float64x2_t g = vld1q_f64(in.gradients[i] + j);
      const float64x2_t t = vld1q_f64(in.anchors[i] + j);
      const float64x2_t term = vsubq_f64(g, vmulq_f64(vdupq_n_f64(2.0 * in.sigmas[i]), t));
      acc = vaddq_f64(acc, vmulq_f64(vdupq_n_f64(in.weights[i]), term));
    }
    vst1q_f64(out + j, clamp_vec(vdivq_f64(vnegq_f64(acc), dv), lo, hi));
  }
  for (; j < n; ++j) out[j] = dual_minimizer_one(in, j, denom);
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable t{dot_neon,  squared_distance_neon, axpy_neon,
                             blend_neon, clamp_neon,           dual_minimizer_neon};
  return t;
}

}  // namespace scaopo::kernels::detail
