#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fcifem/spline1d.hpp"

namespace fcifem {
namespace {

std::vector<Spline1D> all_splines() {
  std::vector<Spline1D> out;
  for (int order : {1, 2}) {
    out.emplace_back(order, 1.0, 10, SplineBoundary::periodic);
    out.emplace_back(order, 0.25, 13, SplineBoundary::periodic, -1.0);
    out.emplace_back(order, 0.1, 21, SplineBoundary::clamped);
    out.emplace_back(order, 0.3, 7, SplineBoundary::clamped, -0.4);
  }
  return out;
}

double sum_of_basis(const Spline1D& s, double x) {
  double sum = 0.0;
  for (int i = 0; i < s.n_nodes(); ++i) sum += s.eval_basis(i, x);
  return sum;
}

TEST(Spline1D, HatFunctionValues) {
  const Spline1D s(1, 1.0, 10, SplineBoundary::periodic);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, -1.0), 0.0);
  EXPECT_DOUBLE_EQ(s.eval_basis_deriv(0, 0.5), -1.0);
}

TEST(Spline1D, QuadraticCentredValues) {
  const Spline1D s(2, 1.0, 10, SplineBoundary::periodic);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, 0.0), 0.75);
  EXPECT_DOUBLE_EQ(s.eval_basis_deriv(0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, 1.5), 0.0);
  EXPECT_DOUBLE_EQ(s.eval_basis(0, 0.5), 0.5);
}

TEST(Spline1D, NonzeroRange) {
  const Spline1D lin(1, 1.0, 10, SplineBoundary::periodic);
  EXPECT_EQ(lin.nonzero_range(2.5), std::make_pair(2, 3));
  const Spline1D quad(2, 1.0, 10, SplineBoundary::periodic);
  EXPECT_EQ(quad.nonzero_range(2.3), std::make_pair(1, 3));
  EXPECT_EQ(quad.nonzero_range(2.7), std::make_pair(2, 4));
  // Just below the end of the period the range wraps onto node 0.
  EXPECT_EQ(quad.nonzero_range(9.9), std::make_pair(9, 1));
  EXPECT_EQ(lin.nonzero_range(9.9), std::make_pair(9, 0));
}

TEST(Spline1D, RightContinuousAtKnots) {
  // Linear knots sit on nodes: x = 2 belongs to the piece [2, 3).
  const Spline1D lin(1, 1.0, 10, SplineBoundary::periodic);
  EXPECT_EQ(lin.nonzero_range(2.0), std::make_pair(2, 3));
  EXPECT_DOUBLE_EQ(lin.eval_basis_deriv(2, 2.0), -1.0);
  EXPECT_DOUBLE_EQ(lin.eval_basis_deriv(1, 2.0), 0.0);
  // Quadratic knots sit at half-integers: x = 2.5 belongs to [2.5, 3.5), whose
  // functions are 2, 3, 4 (functions 1 and 4 both vanish there).
  const Spline1D quad(2, 1.0, 10, SplineBoundary::periodic);
  EXPECT_EQ(quad.nonzero_range(2.5), std::make_pair(2, 4));
  EXPECT_DOUBLE_EQ(quad.eval_basis(4, 2.5), 0.0);
  EXPECT_DOUBLE_EQ(quad.eval_basis(1, 2.5), 0.0);
  // Clamped splines use the last piece at the upper end.
  const Spline1D clamped(2, 0.5, 5, SplineBoundary::clamped);
  EXPECT_EQ(clamped.nonzero_range(2.0), std::make_pair(2, 4));
  EXPECT_DOUBLE_EQ(clamped.eval_basis(4, 2.0), 1.0);
}

TEST(Spline1D, ClampedDomainError) {
  const Spline1D s(2, 0.1, 21, SplineBoundary::clamped);
  EXPECT_THROW(s.eval_basis(0, -0.01), std::domain_error);
  EXPECT_THROW(s.eval_basis_deriv(3, 2.01), std::domain_error);
  EXPECT_NO_THROW(s.eval_basis(0, 2.0));
  EXPECT_THROW(Spline1D(3, 0.1, 10, SplineBoundary::clamped), std::invalid_argument);
  EXPECT_THROW(Spline1D(2, 0.0, 10, SplineBoundary::clamped), std::invalid_argument);
  EXPECT_THROW(Spline1D(2, 0.1, 2, SplineBoundary::clamped), std::invalid_argument);
}

TEST(Spline1D, ClampedEndsInterpolateBoundaryCoefficient) {
  for (int order : {1, 2}) {
    const Spline1D s(order, 0.1, 21, SplineBoundary::clamped);
    EXPECT_DOUBLE_EQ(s.eval_basis(0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(s.eval_basis(20, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(s.eval_basis(1, 0.0), 0.0);
  }
  // Away from the ends clamped quadratic functions are the centred ones.
  const Spline1D clamped(2, 0.1, 21, SplineBoundary::clamped);
  const Spline1D periodic(2, 0.1, 21, SplineBoundary::periodic);
  for (double x : {0.55, 0.81, 1.0, 1.37}) {
    for (int i = 4; i <= 16; ++i) EXPECT_NEAR(clamped.eval_basis(i, x), periodic.eval_basis(i, x), 1e-14);
  }
}

TEST(Spline1D, PartitionOfUnity) {
  std::mt19937 rng(1234);
  for (const Spline1D& s : all_splines()) {
    std::uniform_real_distribution<double> dist(s.lower(), s.upper());
    double worst = 0.0;
    double worst_deriv = 0.0;
    for (int n = 0; n < 10000; ++n) {
      const double x = dist(rng);
      worst = std::max(worst, std::abs(sum_of_basis(s, x) - 1.0));
      double d = 0.0;
      for (int i = 0; i < s.n_nodes(); ++i) d += s.eval_basis_deriv(i, x);
      worst_deriv = std::max(worst_deriv, std::abs(d));
    }
    EXPECT_LT(worst, 1e-12) << "order " << s.order();
    EXPECT_LT(worst_deriv, 1e-9) << "order " << s.order();
  }
}

TEST(Spline1D, SinglePeriodicNodeIsConstant) {
  for (int order : {1, 2}) {
    const Spline1D s(order, 0.3, 1, SplineBoundary::periodic);
    for (double x : {0.0, 0.1, 0.29, -5.0}) {
      EXPECT_NEAR(s.eval_basis(0, x), 1.0, 1e-14);
      EXPECT_NEAR(s.eval_basis_deriv(0, x), 0.0, 1e-12);
    }
  }
}

TEST(Spline1D, FirstMomentIdentity) {
  std::mt19937 rng(99);
  for (int order : {1, 2}) {
    const double h = 0.2;
    const Spline1D periodic(order, h, 40, SplineBoundary::periodic);
    // Away from the wrap point the unwrapped window indices are the node indices.
    std::uniform_real_distribution<double> dist(3.0 * h, 37.0 * h);
    for (int n = 0; n < 10000; ++n) {
      const double x = dist(rng);
      const BasisWindow w = periodic.window(x);
      double moment = 0.0;
      for (int m = 0; m < w.count; ++m) moment += (w.first + m) * w.value[m];
      ASSERT_NEAR(moment, x / h, 1e-12);
    }
    const Spline1D clamped(order, h, 41, SplineBoundary::clamped);
    for (int n = 0; n < 1000; ++n) {
      const double x = dist(rng);
      double moment = 0.0;
      for (int i = 0; i < clamped.n_nodes(); ++i) moment += i * clamped.eval_basis(i, x);
      ASSERT_NEAR(moment, x / h, 1e-12);
    }
  }
}

TEST(Spline1D, DerivativeMatchesFiniteDifference) {
  std::mt19937 rng(7);
  const double eps = 1e-6;
  for (const Spline1D& s : all_splines()) {
    std::uniform_real_distribution<double> dist(s.lower() + 2 * eps, s.upper() - 2 * eps);
    for (int n = 0; n < 500; ++n) {
      const double x = dist(rng);
      const auto [first, last] = s.nonzero_range(x);
      for (int i : {first, last}) {
        const double fd = (s.eval_basis(i, x + eps) - s.eval_basis(i, x - eps)) / (2 * eps);
        // Tolerance covers the one-sided kink of hats within eps of a knot.
        ASSERT_NEAR(fd, s.eval_basis_deriv(i, x), 1e-5 / s.spacing() + (s.order() == 1 ? 1.0 / s.spacing() : 0.0));
      }
    }
  }
  // Quadratic derivatives are continuous, so the finite difference is tight.
  const Spline1D q(2, 0.5, 12, SplineBoundary::clamped);
  for (double x : {0.13, 0.77, 1.9, 3.3, 5.45}) {
    for (int i = 0; i < q.n_nodes(); ++i) {
      const double fd = (q.eval_basis(i, x + eps) - q.eval_basis(i, x - eps)) / (2 * eps);
      EXPECT_NEAR(fd, q.eval_basis_deriv(i, x), 1e-7);
    }
  }
}

TEST(Spline1D, PeriodicTranslation) {
  std::mt19937 rng(5);
  for (int order : {1, 2}) {
    const Spline1D s(order, 0.7, 9, SplineBoundary::periodic);
    std::uniform_real_distribution<double> dist(s.lower(), s.upper());
    for (int n = 0; n < 1000; ++n) {
      const double x = dist(rng);
      for (int i = 0; i < s.n_nodes(); ++i) {
        ASSERT_NEAR(s.eval_basis(i, x), s.eval_basis(i + 1, x + s.spacing()), 1e-13);
      }
    }
  }
}

TEST(Spline1D, SupportAndNonnegativity) {
  std::mt19937 rng(11);
  for (const Spline1D& s : all_splines()) {
    std::uniform_real_distribution<double> dist(s.lower(), s.upper());
    for (int n = 0; n < 2000; ++n) {
      const double x = dist(rng);
      int nonzero = 0;
      for (int i = 0; i < s.n_nodes(); ++i) {
        const double v = s.eval_basis(i, x);
        ASSERT_GE(v, 0.0);
        if (v > 0.0) {
          ++nonzero;
          if (s.periodic()) {
            // Distance to the node modulo the period stays within half the support.
            double d = std::fmod(std::abs(x - s.node(i)), s.length());
            d = std::min(d, s.length() - d);
            ASSERT_LT(d, 0.5 * (s.order() + 1) * s.spacing() + 1e-12);
          }
        }
      }
      ASSERT_LE(nonzero, s.order() + 1);
    }
  }
}

}  // namespace
}  // namespace fcifem
