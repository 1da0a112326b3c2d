#pragma once

#include <cstddef>
#include <span>

namespace fewdp::kernels {

enum class Isa { scalar, avx2, neon };

const char* isa_name(Isa isa);

// Best instruction set available on this machine (detected once).
Isa detect_isa();

// Variant used by the public entry points below. Defaults to detect_isa();
// force_isa() overrides it (equivalence tests pin both variants).
Isa active_isa();
void force_isa(Isa isa);
void reset_isa();

struct KernelTable {
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scale)(double* x, double a, std::size_t n);
  // out[i] = g[i]*a[i] + b[i]
  void (*film)(const double* a, const double* g, const double* b, double* out, std::size_t n);
  void (*add)(double* y, const double* x, std::size_t n);  // y += x
  void (*relu)(const double* z, double* out, std::size_t n);
};

const KernelTable& table(Isa isa);

double dot(std::span<const double> x, std::span<const double> y);
double sum_squares(std::span<const double> x);
double norm2(std::span<const double> x);
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(std::span<double> x, double a);
void film(std::span<const double> a, std::span<const double> g, std::span<const double> b,
          std::span<double> out);
void add(std::span<double> y, std::span<const double> x);
void relu(std::span<const double> z, std::span<double> out);

}  // namespace fewdp::kernels
