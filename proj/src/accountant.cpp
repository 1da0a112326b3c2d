#include "fewdp/accountant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace fewdp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}
}  // namespace

void MechanismParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("mechanism: sigma must be > 0");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("mechanism: q must be in [0, 1]");
  if (steps < 0) throw std::invalid_argument("mechanism: steps must be >= 0");
}

void PrivacyBudget::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("budget: epsilon must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("budget: delta must be in (0, 1)");
}

const char* accountant_name(AccountantKind k) { return k == AccountantKind::rdp ? "rdp" : "prv"; }

AccountantKind accountant_from_name(std::string_view name) {
  if (name == "rdp") return AccountantKind::rdp;
  if (name == "prv") return AccountantKind::prv;
  throw std::invalid_argument("unknown accountant: " + std::string(name));
}

namespace {

std::vector<double> build_alpha_grid() {
  std::vector<double> g;
  g.push_back(1.1);
  for (int k = 0; k <= 35; ++k) g.push_back(1.25 + 0.25 * k);  // 1.25 .. 10.0
  for (int a = 11; a <= 64; ++a) g.push_back(a);
  g.push_back(128);
  g.push_back(256);
  g.push_back(512);
  return g;
}

const std::vector<double>& alpha_grid() {
  static const std::vector<double> g = build_alpha_grid();
  return g;
}

// log C(alpha, k) for integer alpha via cached lgamma of integers.
double log_binom(int alpha, int k) {
  static const std::vector<double> lg = [] {
    std::vector<double> v(1030);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return v;
  }();
  return lg[static_cast<std::size_t>(alpha)] - lg[static_cast<std::size_t>(k)] -
         lg[static_cast<std::size_t>(alpha - k)];
}

double rdp_integer_order(double q, double sigma, int alpha) {
  const double s2 = sigma * sigma;
  const double logq = std::log(q);
  const double log1mq = std::log1p(-q);
  double acc = -kInf;
  for (int k = 0; k <= alpha; ++k) {
    const double t = log_binom(alpha, k) + k * logq + (alpha - k) * log1mq +
                     (static_cast<double>(k) * k - k) / (2.0 * s2);
    acc = log_add_exp(acc, t);
  }
  return acc / (alpha - 1.0);
}

// log of the privacy-loss ratio at point z for the pair
// ((1-q) N(0,s^2) + q N(1,s^2),  N(0,s^2)).
double loss_log_ratio(double q, double sigma, double z) {
  return log_add_exp(std::log1p(-q), std::log(q) + (2.0 * z - 1.0) / (2.0 * sigma * sigma));
}

struct FracIntegrand {
  double q, sigma, alpha;
  // log of phi(u) * exp(alpha * g(sigma u))
  double operator()(double u) const {
    return -0.5 * u * u - 0.91893853320467274178 /* log sqrt(2 pi) */ +
           alpha * loss_log_ratio(q, sigma, sigma * u);
  }
};

double simpson_shifted(const FracIntegrand& f, double a, double b, double shift, int n) {
  // composite Simpson of exp(f(u) - shift); n intervals (even)
  const double h = (b - a) / n;
  double s = std::exp(f(a) - shift) + std::exp(f(b) - shift);
  for (int i = 1; i < n; ++i) {
    const double w = (i % 2 == 1) ? 4.0 : 2.0;
    s += w * std::exp(f(a + i * h) - shift);
  }
  return s * h / 3.0;
}

double adaptive_chunk(const FracIntegrand& f, double a, double b, double shift, double tol,
                      int depth) {
  const double whole = simpson_shifted(f, a, b, shift, 8);
  const double mid = 0.5 * (a + b);
  const double halves = simpson_shifted(f, a, mid, shift, 8) + simpson_shifted(f, mid, b, shift, 8);
  if (depth <= 0 || std::fabs(whole - halves) <= tol * (1.0 + std::fabs(halves))) return halves;
  return adaptive_chunk(f, a, mid, shift, tol, depth - 1) +
         adaptive_chunk(f, mid, b, shift, tol, depth - 1);
}

double rdp_fractional_order(double q, double sigma, double alpha) {
  const FracIntegrand f{q, sigma, alpha};
  // The integrand can be bimodal: one mode near u=0, one near u=alpha/sigma.
  const double u_far = alpha / sigma;
  const double lo = -40.0;
  const double hi = u_far + 40.0;
  // coarse scan for the log-shift
  double shift = -kInf;
  const int scan = 512;
  for (int i = 0; i <= scan; ++i) {
    shift = std::max(shift, f(lo + (hi - lo) * i / scan));
  }
  if (!std::isfinite(shift)) return kInf;
  double total = 0.0;
  // split at the mixture kink region and the far mode to help the refinement
  std::array<double, 5> knots{lo, -5.0, 5.0, u_far, hi};
  std::sort(knots.begin(), knots.end());
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i + 1] <= knots[i]) continue;
    total += adaptive_chunk(f, knots[i], knots[i + 1], shift, 1e-12, 24);
  }
  const double logA = shift + std::log(total);
  return logA / (alpha - 1.0);
}

}  // namespace

std::span<const double> rdp_alpha_grid() { return alpha_grid(); }

double subsampled_gaussian_rdp(double q, double sigma, double alpha) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rdp: sigma must be > 0");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("rdp: q must be in [0, 1]");
  if (!(alpha > 1.0)) throw std::invalid_argument("rdp: alpha must be > 1");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  if (alpha == std::floor(alpha) && alpha >= 2.0 && alpha <= 1024.0)
    return rdp_integer_order(q, sigma, static_cast<int>(alpha));
  return rdp_fractional_order(q, sigma, alpha);
}

double rdp_epsilon(const MechanismParams& params, double delta) {
  params.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("rdp: delta must be in (0, 1)");
  if (params.steps == 0 || params.q == 0.0) return 0.0;
  double best = kInf;
  for (double a : alpha_grid()) {
    const double rho = subsampled_gaussian_rdp(params.q, params.sigma, a);
    if (!std::isfinite(rho)) continue;  // out-of-reach order: skip, keep the min over the rest
    const double eps = static_cast<double>(params.steps) * rho + std::log((a - 1.0) / a) -
                       (std::log(delta) + std::log(a)) / (a - 1.0);
    if (std::isfinite(eps)) best = std::min(best, eps);
  }
  if (!std::isfinite(best))
    throw std::invalid_argument("rdp: no usable order for these parameters");
  return std::max(best, 0.0);
}

double account_epsilon(AccountantKind kind, const MechanismParams& params, double delta,
                       const PrvOptions& opts) {
  return kind == AccountantKind::rdp ? rdp_epsilon(params, delta)
                                     : prv_epsilon(params, delta, opts);
}

double calibrate_sigma(const PrivacyBudget& target, double q, long steps, AccountantKind kind,
                       double tol, const PrvOptions& opts) {
  target.validate();
  if (!(target.epsilon > 0.0)) throw std::invalid_argument("calibrate: target epsilon must be > 0");
  if (steps < 1) throw std::invalid_argument("calibrate: steps must be >= 1");
  double lo = 0.1, hi = 1000.0;
  auto eps_at = [&](double sigma) -> double {
    const MechanismParams params{sigma, q, steps};
    if (kind == AccountantKind::prv) {
      // When even the Renyi bound is far beyond the target, the noise is
      // orders of magnitude too small; skip the loss-distribution grid, whose
      // window grows with that bound. RDP's looseness in this mechanism
      // family stays well under the 2x margin.
      if (rdp_epsilon(params, target.delta) > 2.0 * target.epsilon + 1.0) return kInf;
    }
    try {
      return account_epsilon(kind, params, target.delta, opts);
    } catch (const GridExhaustionError&) {
      if (rdp_epsilon(params, target.delta) > 2.0 * target.epsilon + 1.0) return kInf;
      throw;
    }
  };
  const double eps_lo = eps_at(lo);
  const double eps_hi = eps_at(hi);
  if (eps_lo < target.epsilon - tol || eps_hi > target.epsilon + tol) {
    throw CalibrationError(
        "calibrate: target epsilon " + std::to_string(target.epsilon) +
            " unreachable within sigma bounds [0.1, 1000]; eps(0.1)=" + std::to_string(eps_lo) +
            ", eps(1000)=" + std::to_string(eps_hi),
        lo, hi, eps_lo, eps_hi);
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = std::sqrt(lo * hi);  // epsilon is roughly log-linear in sigma
    const double e = eps_at(mid);
    if (std::fabs(e - target.epsilon) <= 0.5 * tol) return mid;
    if (e > target.epsilon) lo = mid;
    else hi = mid;
  }
  return mid;
}

double convert_delta(const MechanismParams& params, double from_delta, double to_delta,
                     AccountantKind kind, const PrvOptions& opts) {
  if (!(from_delta > 0.0 && from_delta < 1.0))
    throw std::invalid_argument("convert_delta: from_delta must be in (0, 1)");
  if (!(to_delta > 0.0 && to_delta < 1.0))
    throw std::invalid_argument("convert_delta: to_delta must be in (0, 1)");
  return account_epsilon(kind, params, to_delta, opts);
}

}  // namespace fewdp
