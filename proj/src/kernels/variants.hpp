// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scaopo/kernels.hpp"

namespace scaopo::kernels::detail {

const KernelTable& scalar_table();
#if defined(SCAOPO_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(SCAOPO_HAVE_NEON)
const KernelTable& neon_table();
#endif

// Shared by every variant so the scalar tails round exactly like the reference.
inline double clamp_one(double x, double lo, double hi) {
  return x < lo ? lo : (hi < x ? hi : x);
}

inline double weighted_curvature(const DualMinimizerInput& in) {
  double a = 0.0;
  for (std::size_t i = 0; i < in.weights.size(); ++i) a += in.weights[i] * in.sigmas[i];
  return a;
}

inline double dual_minimizer_one(const DualMinimizerInput& in, std::size_t j, double denom) {
  double acc = 0.0;
  for (std::size_t i = 0; i < in.weights.size(); ++i) {
    const double term = in.gradients[i][j] - (2.0 * in.sigmas[i]) * in.anchors[i][j];
    acc = acc + in.weights[i] * term;
  }
  return clamp_one(-acc / denom, -in.bound, in.bound);
}

}  // namespace scaopo::kernels::detail
