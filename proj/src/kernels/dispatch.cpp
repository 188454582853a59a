// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "variants.hpp"

namespace scaopo::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(SCAOPO_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(SCAOPO_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect() {
  if (const char* env = std::getenv("SCAOPO_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
      if (want == isa_name(isa) && cpu_supports(isa)) return isa;
  }
  if (cpu_supports(Isa::avx2)) return Isa::avx2;
  if (cpu_supports(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel operands differ in length");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa active_isa() { return current().load(); }

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
    if (cpu_supports(isa)) out.push_back(isa);
  return out;
}

void force_isa(Isa isa) {
  if (!cpu_supports(isa)) throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
  current().store(isa);
}

const KernelTable& table(Isa isa) {
  switch (isa) {
#if defined(SCAOPO_HAVE_AVX2)
    case Isa::avx2:
      return detail::avx2_table();
#endif
#if defined(SCAOPO_HAVE_NEON)
    case Isa::neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size());
  return active().dot(x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size());
  return active().squared_distance(x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void blend(double alpha, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size());
  active().blend(alpha, x.data(), y.data(), x.size());
}

void clamp(std::span<double> x, double lo, double hi) { active().clamp(x.data(), x.size(), lo, hi); }

void dual_minimizer(const DualMinimizerInput& in, std::span<double> out) {
  const std::size_t m = in.weights.size();
  if (in.gradients.size() != m || in.anchors.size() != m || in.sigmas.size() != m)
    throw std::invalid_argument("dual_minimizer: inconsistent model count");
  active().dual_minimizer(in, out.data(), out.size());
}

}  // namespace scaopo::kernels
