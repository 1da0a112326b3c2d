#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fewdp/accountant.hpp"

using namespace fewdp;

namespace {

// independent numeric Renyi divergence of N(1, s^2) vs N(0, s^2):
// (1/(a-1)) log E_{x~N(0,s^2)}[ (N1(x)/N0(x))^a ], by composite Simpson.
double renyi_gaussian_numeric(double sigma, double alpha) {
  const double lo = -60.0 * sigma, hi = 60.0 * sigma + 1.0;
  const int n = 200000;
  const double h = (hi - lo) / n;
  auto f = [&](double x) {
    const double log_ratio = (2.0 * x - 1.0) / (2.0 * sigma * sigma);
    const double log_n0 = -0.5 * x * x / (sigma * sigma);
    return std::exp(log_n0 + alpha * log_ratio);
  };
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += ((i % 2 == 1) ? 4.0 : 2.0) * f(lo + i * h);
  s *= h / 3.0 / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
  return std::log(s) / (alpha - 1.0);
}

}  // namespace

TEST_CASE("no steps means no privacy loss") {
  const MechanismParams p{4.0, 0.5, 0};
  CHECK(rdp_epsilon(p, 1e-5) == 0.0);
  CHECK(prv_epsilon(p, 1e-5) == 0.0);
}

TEST_CASE("q=0 means no privacy loss") {
  const MechanismParams p{1.0, 0.0, 1000};
  CHECK(rdp_epsilon(p, 1e-5) == 0.0);
  CHECK(prv_epsilon(p, 1e-5) == 0.0);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(rdp_epsilon(MechanismParams{0.0, 0.5, 1}, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(rdp_epsilon(MechanismParams{1.0, 1.5, 1}, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(rdp_epsilon(MechanismParams{1.0, 0.5, -1}, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(rdp_epsilon(MechanismParams{1.0, 0.5, 1}, 0.0), std::invalid_argument);
}

TEST_CASE("q=1 per-order divergence is alpha over two sigma squared") {
  const double sigma = 4.0;
  for (double alpha : {2.0, 3.0, 8.0, 32.0}) {
    CHECK(subsampled_gaussian_rdp(1.0, sigma, alpha) ==
          doctest::Approx(alpha / (2 * sigma * sigma)).epsilon(1e-12));
    // numeric Renyi-divergence oracle
    CHECK(subsampled_gaussian_rdp(1.0, sigma, alpha) ==
          doctest::Approx(renyi_gaussian_numeric(sigma, alpha)).epsilon(1e-6));
  }
}

TEST_CASE("fractional orders agree between series-free integration and small-q series") {
  // at integer alpha both paths exist; they must agree
  for (double q : {0.05, 0.3, 0.9}) {
    for (double sigma : {0.8, 2.0}) {
      for (double alpha : {2.0, 4.0, 7.0}) {
        const double by_series = subsampled_gaussian_rdp(q, sigma, alpha);
        // force the integration path via a nearby fractional order pair
        const double lo = subsampled_gaussian_rdp(q, sigma, alpha - 1e-6);
        const double hi = subsampled_gaussian_rdp(q, sigma, alpha + 1e-6);
        CHECK(by_series == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("calibrated budget recomputed at 1e-5 lands in the published band") {
  // |D| = 10 analog: full-batch (q=1), any epoch count in range
  for (long steps : {1L, 20L, 200L}) {
    const double sigma = calibrate_sigma(PrivacyBudget{1.0, 0.1}, 1.0, steps, AccountantKind::rdp);
    const double eps_rdp = rdp_epsilon(MechanismParams{sigma, 1.0, steps}, 1e-5);
    CHECK(eps_rdp >= 3.30);
    CHECK(eps_rdp <= 3.32);
    const double eps_prv = prv_epsilon(MechanismParams{sigma, 1.0, steps}, 1e-5);
    CHECK(eps_prv >= 3.00);
    CHECK(eps_prv <= 3.15);
    CHECK(eps_prv <= eps_rdp);
  }
}

TEST_CASE("delta conversion examples") {
  // identical delta: identical epsilon
  const MechanismParams p{3.0, 0.25, 400};
  CHECK(convert_delta(p, 1e-5, 1e-5, AccountantKind::rdp) == rdp_epsilon(p, 1e-5));

  // |D| = 100 analog at eps = 2 (delta 1/100 -> 1e-5)
  {
    const double q = 0.5;
    const long steps = 100;
    const double sigma = calibrate_sigma(PrivacyBudget{2.0, 0.01}, q, steps, AccountantKind::rdp);
    const double eps = convert_delta(MechanismParams{sigma, q, steps}, 0.01, 1e-5,
                                     AccountantKind::rdp);
    CHECK(eps >= 3.56);
    CHECK(eps <= 3.64);
  }
  // |D| = 5000 analog at eps = 8 (delta 1/5000 -> 1e-5)
  {
    const double q = 0.1;
    const long steps = 500;
    const double sigma =
        calibrate_sigma(PrivacyBudget{8.0, 1.0 / 5000}, q, steps, AccountantKind::rdp);
    const double eps = convert_delta(MechanismParams{sigma, q, steps}, 1.0 / 5000, 1e-5,
                                     AccountantKind::rdp);
    CHECK(eps >= 9.28);
    CHECK(eps <= 9.51);
  }
  // smaller delta never shrinks epsilon
  CHECK(convert_delta(p, 1e-3, 1e-7, AccountantKind::rdp) >=
        convert_delta(p, 1e-3, 1e-3, AccountantKind::rdp));
}

TEST_CASE("calibration round trip and monotonicity in the target") {
  for (double target : {0.5, 1.0, 8.0}) {
    const double sigma =
        calibrate_sigma(PrivacyBudget{target, 1e-5}, 0.02, 500, AccountantKind::rdp);
    const double eps = rdp_epsilon(MechanismParams{sigma, 0.02, 500}, 1e-5);
    CHECK(std::fabs(eps - target) <= 1e-3);
  }
  const double s8 = calibrate_sigma(PrivacyBudget{8.0, 1e-5}, 0.1, 200, AccountantKind::rdp);
  const double s1 = calibrate_sigma(PrivacyBudget{1.0, 1e-5}, 0.1, 200, AccountantKind::rdp);
  CHECK(s8 < s1);
}

TEST_CASE("doubling steps never decreases epsilon") {
  for (double sigma : {0.8, 2.0, 8.0}) {
    for (double q : {0.05, 0.5, 1.0}) {
      for (long steps : {1L, 16L, 256L}) {
        const double a = rdp_epsilon(MechanismParams{sigma, q, steps}, 1e-5);
        const double b = rdp_epsilon(MechanismParams{sigma, q, 2 * steps}, 1e-5);
        CHECK(b >= a - 1e-9);
      }
    }
  }
}

TEST_CASE("prv stays below rdp plus documented slack") {
  const PrvOptions opts;
  for (double sigma : {1.0, 3.0}) {
    for (double q : {0.1, 1.0}) {
      const MechanismParams p{sigma, q, 64};
      const double slack = opts.eps_error + prv_diagnostics(p, 1e-5, opts).grid_step;
      CHECK(prv_epsilon(p, 1e-5, opts) <= rdp_epsilon(p, 1e-5) + slack);
    }
  }
}

TEST_CASE("discretized loss distribution keeps its mass") {
  const MechanismParams p{2.0, 0.3, 100};
  const PrvOptions opts;
  const auto d = prv_diagnostics(p, 1e-5, opts);
  const double budget = 2 * opts.tail_fraction * 1e-5;
  CHECK(d.mass_remove == doctest::Approx(1.0).epsilon(budget + 1e-9));
  CHECK(d.mass_add == doctest::Approx(1.0).epsilon(budget + 1e-9));
  CHECK(d.grid_points >= 3);
}

TEST_CASE("grid exhaustion is reported with guidance") {
  PrvOptions tiny;
  tiny.max_grid = 64;
  CHECK_THROWS_AS(prv_epsilon(MechanismParams{0.7, 0.5, 10000}, 1e-9, tiny), GridExhaustionError);
}

TEST_CASE("unreachable calibration reports the bracket") {
  // at sigma=1000 the epsilon is still above such a tiny target
  try {
    calibrate_sigma(PrivacyBudget{1e-6, 1e-9}, 1.0, 100000, AccountantKind::rdp);
    FAIL("expected CalibrationError");
  } catch (const CalibrationError& e) {
    CHECK(e.sigma_lo == 0.1);
    CHECK(e.sigma_hi == 1000.0);
    CHECK(e.eps_at_hi > 1e-6);
  }
}
