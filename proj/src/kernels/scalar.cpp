// SPDX-License-Identifier: Apache-2.0
#include "variants.hpp"

namespace scaopo::kernels::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void blend_scalar(double alpha, const double* x, double* y, std::size_t n) {
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < n; ++i) y[i] = keep * y[i] + alpha * x[i];
}

void clamp_scalar(double* x, std::size_t n, double lo, double hi) {
  for (std::size_t i = 0; i < n; ++i) x[i] = clamp_one(x[i], lo, hi);
}

void dual_minimizer_scalar(const DualMinimizerInput& in, double* out, std::size_t n) {
  const double denom = 2.0 * weighted_curvature(in);
  for (std::size_t j = 0; j < n; ++j) out[j] = dual_minimizer_one(in, j, denom);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{dot_scalar,  squared_distance_scalar, axpy_scalar,
                             blend_scalar, clamp_scalar,           dual_minimizer_scalar};
  return t;
}

}  // namespace scaopo::kernels::detail
