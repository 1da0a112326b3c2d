#include "fewdp/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace fewdp::kernels {

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

Isa detect_isa() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
  return Isa::scalar;
#elif defined(__aarch64__)
  return Isa::neon;
#else
  return Isa::scalar;
#endif
}

namespace {
std::atomic<int> g_forced{-1};
}

Isa active_isa() {
  const int f = g_forced.load(std::memory_order_relaxed);
  if (f >= 0) return static_cast<Isa>(f);
  static const Isa detected = detect_isa();
  return detected;
}

void force_isa(Isa isa) {
  switch (isa) {
    case Isa::scalar: break;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (!__builtin_cpu_supports("avx2")) throw std::runtime_error("avx2 not supported on this cpu");
      break;
#else
      throw std::runtime_error("avx2 kernels not built on this platform");
#endif
    case Isa::neon:
#if !defined(__aarch64__)
      throw std::runtime_error("neon kernels not built on this platform");
#else
      break;
#endif
  }
  g_forced.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void reset_isa() { g_forced.store(-1, std::memory_order_relaxed); }

const KernelTable& table(Isa isa) {
  switch (isa) {
    case Isa::scalar: return scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2: return avx2_table();
#endif
#if defined(__aarch64__)
    case Isa::neon: return neon_table();
#endif
    default: return scalar_table();
  }
}

namespace {
inline const KernelTable& active() { return table(active_isa()); }
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot(x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

double norm2(std::span<const double> x) { return std::sqrt(sum_squares(x)); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  active().axpy(a, x.data(), y.data(), x.size());
}

void scale(std::span<double> x, double a) { active().scale(x.data(), a, x.size()); }

void film(std::span<const double> a, std::span<const double> g, std::span<const double> b,
          std::span<double> out) {
  if (a.size() != g.size() || a.size() != b.size() || a.size() != out.size())
    throw std::invalid_argument("film: length mismatch");
  active().film(a.data(), g.data(), b.data(), out.data(), a.size());
}

void add(std::span<double> y, std::span<const double> x) {
  if (x.size() != y.size()) throw std::invalid_argument("add: length mismatch");
  active().add(y.data(), x.data(), x.size());
}

void relu(std::span<const double> z, std::span<double> out) {
  if (z.size() != out.size()) throw std::invalid_argument("relu: length mismatch");
  active().relu(z.data(), out.data(), z.size());
}

}  // namespace fewdp::kernels
