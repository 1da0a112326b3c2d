#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fewdp {

// Poisson-subsampled Gaussian mechanism, composed over identical steps.
struct MechanismParams {
  double sigma = 1.0;  // noise multiplier (noise std / clip norm)
  double q = 0.0;      // per-step inclusion probability
  long steps = 0;

  void validate() const;
};

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-5;

  void validate() const;
};

enum class AccountantKind { rdp, prv };
const char* accountant_name(AccountantKind k);
AccountantKind accountant_from_name(std::string_view name);

// Numerical budget of the privacy-loss-distribution accountant. The reported
// epsilon is a valid upper bound and conservative by at most eps_error plus
// the delta slack implied by the two fractions.
struct PrvOptions {
  double eps_error = 0.01;
  double tail_fraction = 0.02;      // of delta, budgeted per tail for truncation
  double coupling_fraction = 0.02;  // of delta, budgeted for grid rounding
  std::size_t max_grid = std::size_t{1} << 24;
};

class GridExhaustionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& msg, double sigma_lo, double sigma_hi, double eps_at_lo,
                   double eps_at_hi)
      : std::runtime_error(msg), sigma_lo(sigma_lo), sigma_hi(sigma_hi), eps_at_lo(eps_at_lo),
        eps_at_hi(eps_at_hi) {}
  double sigma_lo, sigma_hi, eps_at_lo, eps_at_hi;
};

// Orders at which Renyi divergence is tracked.
std::span<const double> rdp_alpha_grid();

// Per-step Renyi divergence of the subsampled Gaussian at order alpha.
// Stable log-domain binomial series at integer orders, numerical integration
// at fractional ones. May return +inf when the order is out of numeric reach.
double subsampled_gaussian_rdp(double q, double sigma, double alpha);

// (epsilon, delta)-DP via Renyi composition and the improved conversion
//   eps = min_alpha [ T rho(a) + log((a-1)/a) - (log delta + log a)/(a-1) ].
double rdp_epsilon(const MechanismParams& params, double delta);

// (epsilon, delta)-DP via FFT self-composition of the discretized
// privacy-loss distribution, both adjacency directions, upper-bounded.
double prv_epsilon(const MechanismParams& params, double delta, const PrvOptions& opts = {});

double account_epsilon(AccountantKind kind, const MechanismParams& params, double delta,
                       const PrvOptions& opts = {});

// Noise multiplier such that the chosen accountant meets target.epsilon at
// target.delta within tol, by bisection over sigma in [0.1, 1000].
double calibrate_sigma(const PrivacyBudget& target, double q, long steps, AccountantKind kind,
                       double tol = 1e-3, const PrvOptions& opts = {});

// Epsilon of the same mechanism re-evaluated at to_delta.
double convert_delta(const MechanismParams& params, double from_delta, double to_delta,
                     AccountantKind kind, const PrvOptions& opts = {});

// Introspection used by the validity tests: total discretized mass per
// adjacency direction before convolution, and the grid geometry.
struct PrvDiagnostics {
  double mass_remove = 0.0;
  double mass_add = 0.0;
  double grid_step = 0.0;
  double window = 0.0;
  std::size_t grid_points = 0;
};
PrvDiagnostics prv_diagnostics(const MechanismParams& params, double delta,
                               const PrvOptions& opts = {});

}  // namespace fewdp
