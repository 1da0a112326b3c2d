// Privacy-loss-distribution accountant: discretize the per-step loss of the
// subsampled Gaussian on a uniform grid (both adjacency directions), compose
// T identical steps by exponentiation-by-squaring in the Fourier domain, and
// invert delta(eps). Grid spacing follows a Hoeffding bound on accumulated
// rounding so the reported epsilon is conservative by at most eps_error once
// the delta slack (tail truncation + aliasing + coupling) is subtracted from
// the query.
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "fewdp/accountant.hpp"

namespace fewdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

double norm_cdf(double t) { return 0.5 * std::erfc(-t * 0.7071067811865475244); }

// One adjacency direction of the pair P = (1-q)N(0,s^2)+qN(1,s^2), Q = N(0,s^2).
// remove: loss = log(P/Q) under P (increasing in x);
// add:    loss = log(Q/P) under Q (decreasing in x).
struct LossModel {
  double q, sigma;
  bool remove;

  double loss_at(double x) const {
    const double l = log_add_exp(std::log1p(-q), std::log(q) + (2.0 * x - 1.0) / (2.0 * sigma * sigma));
    return remove ? l : -l;
  }

  // x solving log(P/Q)(x) = l
  double x_at_ratio(double l) const {
    if (l > 30.0) return sigma * sigma * (l - std::log(q)) + 0.5;
    const double inner = std::expm1(l) + q;  // e^l - (1-q)
    if (!(inner > 0.0)) return -kInf;
    return sigma * sigma * std::log(inner / q) + 0.5;
  }

  double up_cdf(double x) const {
    if (x == -kInf) return 0.0;
    if (remove)
      return (1.0 - q) * norm_cdf(x / sigma) + q * norm_cdf((x - 1.0) / sigma);
    return norm_cdf(x / sigma);
  }

  double loss_cdf(double l) const {
    if (remove) return up_cdf(x_at_ratio(l));
    // decreasing loss: P[loss <= l] = P[x >= x_at_ratio(-l)]
    const double x = x_at_ratio(-l);
    if (x == -kInf) return 1.0;
    return 1.0 - up_cdf(x);
  }

  double mean_loss() const {
    const double lo = -40.0 * sigma;
    const double hi = (remove ? 1.0 : 0.0) + 40.0 * sigma;
    const int n = 4096;
    const double h = (hi - lo) / n;
    auto pdf = [&](double x) {
      const double inv = 1.0 / (sigma * 2.5066282746310005024);
      if (remove)
        return (1.0 - q) * inv * std::exp(-0.5 * x * x / (sigma * sigma)) +
               q * inv * std::exp(-0.5 * (x - 1.0) * (x - 1.0) / (sigma * sigma));
      return inv * std::exp(-0.5 * x * x / (sigma * sigma));
    };
    double s = loss_at(lo) * pdf(lo) + loss_at(hi) * pdf(hi);
    for (int i = 1; i < n; ++i) {
      const double x = lo + i * h;
      s += ((i % 2 == 1) ? 4.0 : 2.0) * loss_at(x) * pdf(x);
    }
    return s * h / 3.0;
  }
};

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * 3.14159265358979323846 / static_cast<double>(len) * (inverse ? -1.0 : 1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

std::complex<double> cpow_by_squaring(std::complex<double> z, long e) {
  std::complex<double> acc(1.0, 0.0);
  while (e > 0) {
    if (e & 1) acc *= z;
    z *= z;
    e >>= 1;
  }
  return acc;
}

struct ComposedLoss {
  std::vector<double> t;   // ascending positions (mean-shift applied)
  std::vector<double> s1;  // suffix sums of mass
  std::vector<double> s2;  // suffix sums of mass * exp(-t)

  double delta_at(double eps) const {
    // smallest index with t > eps
    const auto it = std::upper_bound(t.begin(), t.end(), eps);
    if (it == t.end()) return 0.0;
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double d = s1[k] - std::exp(eps) * s2[k];
    return d > 0.0 ? d : 0.0;
  }
};

struct PrvWorkspace {
  ComposedLoss remove_dir, add_dir;
  double window = 0.0;
  double grid_step = 0.0;
  std::size_t grid_points = 0;
  double mass_remove = 0.0, mass_add = 0.0;
  double t_max = 0.0;

  double delta_at(double eps) const {
    return std::max(remove_dir.delta_at(eps), add_dir.delta_at(eps));
  }
};

double rdp_tail_bound(double q, double sigma, long steps, double mass) {
  double best = kInf;
  for (double a : rdp_alpha_grid()) {
    const double rho = subsampled_gaussian_rdp(q, sigma, a);
    if (!std::isfinite(rho)) continue;
    best = std::min(best, static_cast<double>(steps) * rho + std::log(1.0 / mass) / (a - 1.0));
  }
  return best;
}

ComposedLoss compose_direction(const LossModel& model, long steps, double h, std::size_t n,
                               std::size_t size, double* total_mass) {
  // per-step pmf on grid i*h, i in [-n, n], by CDF differences at cell edges
  std::vector<double> pmf(2 * n + 1);
  double prev = model.loss_cdf((-static_cast<double>(n) - 0.5) * h);
  double total = 0.0;
  for (std::size_t i = 0; i < 2 * n + 1; ++i) {
    const double edge = (static_cast<double>(i) - static_cast<double>(n) + 0.5) * h;
    const double c = model.loss_cdf(edge);
    pmf[i] = std::max(c - prev, 0.0);
    prev = c;
    total += pmf[i];
  }
  if (total_mass) *total_mass = total;

  // mean-preserving global shift
  double mean_disc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i)
    mean_disc += pmf[i] * (static_cast<double>(i) - static_cast<double>(n)) * h;
  const double shift = model.mean_loss() - (total > 0.0 ? mean_disc / total : 0.0);

  // wrap negative positions to the top of the FFT buffer
  std::vector<std::complex<double>> buf(size);
  for (std::size_t i = 0; i <= n; ++i) buf[i] = pmf[n + i];
  for (std::size_t i = 0; i < n; ++i) buf[size - n + i] = pmf[i];
  fft(buf, false);
  for (auto& z : buf) z = cpow_by_squaring(z, steps);
  fft(buf, true);

  // Buffer index j holds loss position (j <= size/2 ? j : j - size) * h.
  // Lay positions out ascending: wrapped negative half first.
  ComposedLoss out;
  out.t.resize(size);
  std::vector<double> mass(size);
  const double pos_shift = static_cast<double>(steps) * shift;
  std::size_t k = 0;
  for (std::size_t j = size / 2 + 1; j < size; ++j, ++k) {
    out.t[k] = (static_cast<double>(j) - static_cast<double>(size)) * h + pos_shift;
    mass[k] = std::max(buf[j].real(), 0.0);
  }
  for (std::size_t j = 0; j <= size / 2; ++j, ++k) {
    out.t[k] = static_cast<double>(j) * h + pos_shift;
    mass[k] = std::max(buf[j].real(), 0.0);
  }
  out.s1.assign(size + 1, 0.0);
  out.s2.assign(size + 1, 0.0);
  for (std::size_t i = size; i-- > 0;) {
    out.s1[i] = out.s1[i + 1] + mass[i];
    out.s2[i] = out.s2[i + 1] + mass[i] * std::exp(-out.t[i]);
  }
  return out;
}

PrvWorkspace build_workspace(const MechanismParams& params, double delta, const PrvOptions& opts) {
  const double m_tail = opts.tail_fraction * delta;
  const double d_coup = opts.coupling_fraction * delta;
  double window = rdp_tail_bound(params.q, params.sigma, params.steps, m_tail);
  if (!std::isfinite(window))
    throw GridExhaustionError("prv: no finite loss window for these parameters");
  window = std::max(window, 1.0) * 1.2 + 2.0;
  const double h =
      opts.eps_error / std::sqrt(2.0 * static_cast<double>(params.steps) * std::log(2.0 / d_coup));
  const std::size_t n = static_cast<std::size_t>(std::ceil(window / h));
  if (2 * n + 1 > opts.max_grid)
    throw GridExhaustionError(
        "prv: requested resolution needs " + std::to_string(2 * n + 1) +
        " grid points (limit " + std::to_string(opts.max_grid) +
        "); widen the grid via PrvOptions::max_grid or relax eps_error");
  std::size_t size = 1;
  while (size < 2 * n + 2) size <<= 1;

  PrvWorkspace ws;
  ws.window = window;
  ws.grid_step = h;
  ws.grid_points = 2 * n + 1;
  ws.remove_dir = compose_direction(LossModel{params.q, params.sigma, true}, params.steps, h, n,
                                    size, &ws.mass_remove);
  ws.add_dir = compose_direction(LossModel{params.q, params.sigma, false}, params.steps, h, n,
                                 size, &ws.mass_add);
  ws.t_max = std::max(ws.remove_dir.t.back(), ws.add_dir.t.back());
  return ws;
}

}  // namespace

double prv_epsilon(const MechanismParams& params, double delta, const PrvOptions& opts) {
  params.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("prv: delta must be in (0, 1)");
  if (params.steps == 0 || params.q == 0.0) return 0.0;

  const PrvWorkspace ws = build_workspace(params, delta, opts);
  const double slack = (2.0 * opts.tail_fraction + opts.coupling_fraction) * delta;
  const double target = delta - slack;
  if (!(target > 0.0)) throw std::invalid_argument("prv: delta too small for the slack budget");

  if (ws.delta_at(0.0) <= target) return opts.eps_error;
  double lo = 0.0, hi = ws.t_max;
  if (ws.delta_at(hi) > target)
    throw GridExhaustionError("prv: epsilon at the requested delta exceeds the grid window; "
                              "widen the grid via PrvOptions::max_grid");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ws.delta_at(mid) > target) lo = mid;
    else hi = mid;
  }
  return hi + opts.eps_error;
}

PrvDiagnostics prv_diagnostics(const MechanismParams& params, double delta,
                               const PrvOptions& opts) {
  params.validate();
  PrvDiagnostics d;
  if (params.steps == 0 || params.q == 0.0) return d;
  const PrvWorkspace ws = build_workspace(params, delta, opts);
  d.mass_remove = ws.mass_remove;
  d.mass_add = ws.mass_add;
  d.grid_step = ws.grid_step;
  d.window = ws.window;
  d.grid_points = ws.grid_points;
  return d;
}

}  // namespace fewdp
