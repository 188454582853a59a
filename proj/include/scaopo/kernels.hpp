// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops of the SCA iteration.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The variant is
// picked once at startup from the CPU feature bits and can be overridden with
// force_isa() or the SCAOPO_ISA environment variable ("scalar", "avx2",
// "neon").
//
// Elementwise kernels (axpy, blend, clamp, dual_minimizer) evaluate the same
// operations in the same order in every variant and therefore agree bitwise.
// Reductions (dot, squared_distance) use lane-parallel accumulators and agree
// only to rounding.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace scaopo::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// ISA currently used by the dispatched entry points.
Isa active_isa();

/// ISAs this binary was built with and the CPU can execute. Always contains scalar.
std::vector<Isa> available_isas();

/// Overrides the dispatched ISA. Throws std::invalid_argument if unavailable.
void force_isa(Isa isa);

/// Inputs of the coordinatewise Lagrangian minimizer over a box.
///
/// For weights w_i, curvatures s_i, gradients g_i and anchors t_i the
/// Lagrangian sum_i w_i (g_i.(x - t_i) + s_i |x - t_i|^2) is minimized at
///   x_j = clamp(-b_j / (2 a), -bound, bound),
///   a   = sum_i w_i s_i,
///   b_j = sum_i w_i (g_ij - 2 s_i t_ij).
struct DualMinimizerInput {
  std::span<const double* const> gradients;
  std::span<const double* const> anchors;
  std::span<const double> weights;
  std::span<const double> sigmas;
  double bound = 0.0;
};

double dot(std::span<const double> x, std::span<const double> y);
double squared_distance(std::span<const double> x, std::span<const double> y);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y = (1 - alpha) * y + alpha * x
void blend(double alpha, std::span<const double> x, std::span<double> y);

/// x = min(max(x, lo), hi)
void clamp(std::span<double> x, double lo, double hi);

/// Writes the minimizer into out; `a` must be positive (checked by callers).
void dual_minimizer(const DualMinimizerInput& in, std::span<double> out);

/// Entry points of one ISA variant; used by the equivalence tests.
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*blend)(double, const double*, double*, std::size_t);
  void (*clamp)(double*, std::size_t, double, double);
  void (*dual_minimizer)(const DualMinimizerInput&, double*, std::size_t);
};

const KernelTable& table(Isa isa);

}  // namespace scaopo::kernels
