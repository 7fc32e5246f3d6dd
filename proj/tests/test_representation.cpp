#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "fcifem/representation.hpp"

namespace fcifem {
namespace {

constexpr double kPi = std::numbers::pi;
const Box2 kDomain{0.0, 2.0, -1.0, 1.5};

enum class MapKind { straight, taylor, exact };

FcifemSpace tokamak_space(int order, int n, int n_zeta, MapKind kind) {
  const Spline1D r(order, 2.0 / n, n + 1, SplineBoundary::clamped);
  const Spline1D z(order, 2.5 / n, n + 1, SplineBoundary::clamped, -1.0);
  const Spline1D zeta(order, (kPi / 20) / n_zeta, n_zeta, SplineBoundary::periodic);
  std::shared_ptr<const Mapping> m;
  switch (kind) {
    case MapKind::straight:
      m = std::make_shared<AnalyticStraightMapping>(FieldModel::straight(0.7, 1.0), kDomain);
      break;
    case MapKind::taylor:
      m = std::make_shared<TaylorSplineMapping>(build_taylor_mapping(FieldModel::divertor(1.0), r, z, 2, kDomain));
      break;
    case MapKind::exact:
      m = std::make_shared<ExactOdeMapping>(FieldModel::divertor(1.0), kDomain);
      break;
  }
  return FcifemSpace(r, z, zeta, m);
}

FcifemSpace periodic_space(int order, int n_z, int n_zeta) {
  const Spline1D z(order, 2 * kPi / n_z, n_z, SplineBoundary::periodic);
  const Spline1D zeta(order, 2 * kPi / n_zeta, n_zeta, SplineBoundary::periodic);
  auto m = std::make_shared<AnalyticStraightMapping>(FieldModel::straight(1.0, 1.0));
  return FcifemSpace(std::nullopt, z, zeta, m);
}

/// True when every plane image of x maps inside the (R, Z) domain.
bool images_inside(const FcifemSpace& s, const Point3& x) {
  std::array<PlaneImage, 3> img;
  const int n = s.plane_images(x.zeta, img);
  for (int m = 0; m < n; ++m) {
    const MapJet j = s.mapping().jet(x, img[m].s);
    if (!j.valid || !s.plane_box().contains(j.r, j.z)) return false;
  }
  return true;
}

TEST(FcifemSpace, DofNumbering) {
  const FcifemSpace s = tokamak_space(2, 4, 3, MapKind::straight);
  EXPECT_EQ(s.dof_count(), 5 * 5 * 3);
  EXPECT_EQ(s.dof(2, 3, 1), (1 * 5 + 3) * 5 + 2);
  EXPECT_EQ(s.node_of(s.dof(2, 3, 1)), (std::array<int, 3>{2, 3, 1}));
  const Point3 p = s.node_position(s.dof(4, 0, 2));
  EXPECT_DOUBLE_EQ(p.r, 2.0);
  EXPECT_DOUBLE_EQ(p.z, -1.0);
  EXPECT_NEAR(p.zeta, 2 * kPi / 60, 1e-15);
}

TEST(FcifemSpace, RejectsClampedZeta) {
  const Spline1D z(2, 0.1, 11, SplineBoundary::clamped);
  auto m = std::make_shared<IdentityMapping>();
  EXPECT_THROW(FcifemSpace(std::nullopt, z, z, m), std::invalid_argument);
}

TEST(FcifemSpace, PartitionOfUnityPeriodic) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int order : {1, 2}) {
    for (int nz : {43, 40}) {
      const FcifemSpace s = periodic_space(order, nz, 4);
      const CoefficientVector one(s.dof_count(), 1.0);
      double worst = 0.0;
      for (int n = 0; n < 10000; ++n) {
        worst = std::max(worst, std::abs(s.evaluate(one, {0.0, u(rng), u(rng)}) - 1.0));
      }
      EXPECT_LT(worst, 1e-12) << "order " << order;
    }
  }
}

TEST(FcifemSpace, PartitionOfUnityTokamakMappings) {
  for (MapKind kind : {MapKind::straight, MapKind::taylor, MapKind::exact}) {
    for (int order : {1, 2}) {
      for (int n_zeta : {1, 3}) {
        std::mt19937 rng(100 + order);
        std::uniform_real_distribution<double> ur(0.0, 2.0), uz(-1.0, 1.5), uk(0.0, kPi / 20);
        const FcifemSpace s = tokamak_space(order, 20, n_zeta, kind);
        const CoefficientVector one(s.dof_count(), 1.0);
        const int samples = kind == MapKind::exact ? 2000 : 10000;
        int tested = 0;
        double worst = 0.0;
        for (int n = 0; n < samples; ++n) {
          const Point3 x{ur(rng), uz(rng), uk(rng)};
          if (!images_inside(s, x)) continue;
          ++tested;
          worst = std::max(worst, std::abs(s.evaluate(one, x) - 1.0));
        }
        EXPECT_GT(tested, samples / 2);
        EXPECT_LT(worst, 1e-12) << "order " << order << " planes " << n_zeta;
      }
    }
  }
}

TEST(FcifemSpace, ConstantHasZeroGradient) {
  for (MapKind kind : {MapKind::taylor, MapKind::exact}) {
    const FcifemSpace s = tokamak_space(2, 20, 3, kind);
    const CoefficientVector c(s.dof_count(), 2.5);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> ur(0.3, 1.7), uz(-0.7, 1.2), uk(0.0, kPi / 20);
    for (int n = 0; n < 200; ++n) {
      const Point3 x{ur(rng), uz(rng), uk(rng)};
      if (!images_inside(s, x)) continue;
      const Vec3 g = s.evaluate_gradient(c, x);
      for (double v : g) ASSERT_LT(std::abs(v), 1e-10);
    }
  }
}

TEST(FcifemSpace, GradientMatchesFiniteDifference) {
  for (MapKind kind : {MapKind::straight, MapKind::taylor}) {
    const FcifemSpace s = tokamak_space(2, 10, 3, kind);
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    CoefficientVector c(s.dof_count());
    for (int d = 0; d < s.dof_count(); ++d) c[d] = coef(rng);
    std::uniform_real_distribution<double> ur(0.3, 1.7), uz(-0.7, 1.2), uk(0.0, kPi / 20);
    const double e = 1e-6;
    for (int n = 0; n < 100; ++n) {
      const Point3 x{ur(rng), uz(rng), uk(rng)};
      if (!images_inside(s, x)) continue;
      const Vec3 g = s.evaluate_gradient(c, x);
      const double fr = (s.evaluate(c, {x.r + e, x.z, x.zeta}) - s.evaluate(c, {x.r - e, x.z, x.zeta})) / (2 * e);
      const double fz = (s.evaluate(c, {x.r, x.z + e, x.zeta}) - s.evaluate(c, {x.r, x.z - e, x.zeta})) / (2 * e);
      const double fk = (s.evaluate(c, {x.r, x.z, x.zeta + e}) - s.evaluate(c, {x.r, x.z, x.zeta - e})) / (2 * e);
      EXPECT_NEAR(g[0], fr, 1e-5);
      EXPECT_NEAR(g[1], fz, 1e-5);
      EXPECT_NEAR(g[2], fk, 1e-4);
    }
  }
}

TEST(FcifemSpace, QuadraticGradientIsContinuous) {
  // Across zeta knots (half-integers) and arbitrary mapped (R, Z) knots the
  // quadratic representation is C1: one-sided gradients agree to O(eps).
  const FcifemSpace s = tokamak_space(2, 10, 4, MapKind::taylor);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  CoefficientVector c(s.dof_count());
  for (int d = 0; d < s.dof_count(); ++d) c[d] = coef(rng);
  const double hk = s.zeta_axis().spacing();
  const double e = 1e-9;
  for (double zk : {0.5 * hk, 1.5 * hk, 2.5 * hk}) {
    const Point3 lo{0.9, 0.2, zk - e}, hi{0.9, 0.2, zk + e};
    const Vec3 a = s.evaluate_gradient(c, lo), b = s.evaluate_gradient(c, hi);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
  }
  const double hr = s.r_axis().spacing();
  for (double rk : {4.5 * hr, 5.5 * hr}) {
    const Point3 lo{rk - e, 0.3, 0.0}, hi{rk + e, 0.3, 0.0};
    const Vec3 a = s.evaluate_gradient(c, lo), b = s.evaluate_gradient(c, hi);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
  }
}

TEST(FcifemSpace, NodalInterpolationOfLinearFunction) {
  for (int order : {1, 2}) {
    const FcifemSpace s = tokamak_space(order, 20, 2, MapKind::straight);
    const CoefficientVector c = s.interpolate_nodal([](const Point3& p) { return p.r; });
    for (Point3 x : {Point3{0.6, 0.1, 0.03}, Point3{1.33, 0.2, 0.1}, Point3{0.87, -0.3, 0.0}}) {
      EXPECT_NEAR(s.evaluate(c, x), x.r, 1e-12);
      const Vec3 g = s.evaluate_gradient(c, x);
      EXPECT_NEAR(g[0], 1.0, 1e-12);
      EXPECT_NEAR(g[1], 0.0, 1e-12);
      EXPECT_NEAR(g[2], 0.0, 1e-12);
    }
  }
}

double max_interpolation_error(int order, int n_z, int n_zeta, bool gradient) {
  const FcifemSpace s = periodic_space(order, n_z, n_zeta);
  auto f = [](const Point3& p) { return std::sin(p.z - p.zeta); };
  const CoefficientVector c = s.interpolate_nodal(f);
  double worst = 0.0;
  for (int a = 0; a < 37; ++a) {
    for (int b = 0; b < 29; ++b) {
      const Point3 x{0.0, 2 * kPi * (a + 0.31) / 37, 2 * kPi * (b + 0.17) / 29};
      if (gradient) {
        const Vec3 g = s.evaluate_gradient(c, x);
        worst = std::max(worst, std::abs(g[1] - std::cos(x.z - x.zeta)));
        worst = std::max(worst, std::abs(g[2] + std::cos(x.z - x.zeta)));
      } else {
        worst = std::max(worst, std::abs(s.evaluate(c, x) - f(x)));
      }
    }
  }
  return worst;
}

TEST(FcifemSpace, NodalInterpolationConvergesAtSecondOrder) {
  // The nodal-value quasi-interpolant has leading error h^2 f''/8 for
  // quadratic splines; halving h divides it by a factor approaching 4 from
  // below, so 3.9 is used as the threshold.
  for (int order : {1, 2}) {
    for (bool gradient : {false, true}) {
      if (order == 1 && gradient) continue;
      const double coarse = max_interpolation_error(order, 40, 4, gradient);
      const double fine = max_interpolation_error(order, 80, 8, gradient);
      EXPECT_GT(coarse / fine, 3.9) << "order " << order << " gradient " << gradient;
    }
  }
}

TEST(FcifemSpace, FieldAlignedFunctionNeedsFewPlanes) {
  // A field-aligned wave is represented as well with 4 planes as an
  // isotropic Cartesian tensor spline (identity mapping) with 43 planes.
  auto f = [](const Point3& p) { return std::sin(10 * (p.z - p.zeta)); };
  const FcifemSpace aligned = periodic_space(2, 43, 4);
  const Spline1D z(2, 2 * kPi / 43, 43, SplineBoundary::periodic);
  const FcifemSpace cartesian(std::nullopt, z, z, std::make_shared<IdentityMapping>());
  const CoefficientVector ca = aligned.interpolate_nodal(f);
  const CoefficientVector cc = cartesian.interpolate_nodal(f);
  double ea = 0.0, ec = 0.0;
  for (int a = 0; a < 41; ++a) {
    for (int b = 0; b < 41; ++b) {
      const Point3 x{0.0, 2 * kPi * (a + 0.3) / 41, 2 * kPi * (b + 0.6) / 41};
      ea = std::max(ea, std::abs(aligned.evaluate(ca, x) - f(x)));
      ec = std::max(ec, std::abs(cartesian.evaluate(cc, x) - f(x)));
    }
  }
  EXPECT_LT(ea, 2.0 * ec);
  EXPECT_LT(ea, 0.3);
}

TEST(FcifemSpace, OutOfDomainPointThrows) {
  const FcifemSpace s = tokamak_space(2, 10, 1, MapKind::straight);
  const CoefficientVector c(s.dof_count(), 1.0);
  EXPECT_THROW(s.evaluate(c, {2.1, 0.0, 0.0}), std::domain_error);
  EXPECT_THROW(s.evaluate(CoefficientVector(3), {1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(BlendedSpace, RampShape) {
  const BlendedSpace b(tokamak_space(2, 10, 1, MapKind::straight));
  const double hr = 0.2, hz = 0.25;
  EXPECT_DOUBLE_EQ(b.ramp(0.0, 0.3).value, 1.0);
  EXPECT_DOUBLE_EQ(b.ramp(2.0, 0.3).value, 1.0);
  EXPECT_DOUBLE_EQ(b.ramp(0.7, -1.0).value, 1.0);
  EXPECT_DOUBLE_EQ(b.ramp(0.7, 1.5).value, 1.0);
  EXPECT_DOUBLE_EQ(b.ramp(0.7, 0.3).value, 0.0);
  EXPECT_DOUBLE_EQ(b.ramp(hr, 0.3).value, 0.0);
  // Linear (1 - x) across the band away from corners.
  EXPECT_NEAR(b.ramp(0.3 * hr, 0.3).value, 0.7, 1e-14);
  EXPECT_NEAR(b.ramp(0.3 * hr, 0.3).d_dr, -1.0 / hr, 1e-12);
  EXPECT_NEAR(b.ramp(0.7, 1.5 - 0.25 * hz).value, 0.75, 1e-14);
  // In a corner cell the sum of the boundary hats is 1 - x y.
  const BlendedSpace::Ramp c = b.ramp(0.4 * hr, -1.0 + 0.5 * hz);
  EXPECT_NEAR(c.value, 1.0 - 0.4 * 0.5, 1e-14);
  EXPECT_NEAR(c.d_dr, -0.5 / hr, 1e-12);
  EXPECT_NEAR(c.d_dz, -0.4 / hz, 1e-12);
}

TEST(BlendedSpace, KeepsEverySplineDof) {
  const BlendedSpace b(tokamak_space(2, 10, 3, MapKind::taylor));
  EXPECT_EQ(b.dof_count(), 11 * 11 * 3);
  EXPECT_TRUE(b.is_boundary_node(0, 4));
  EXPECT_TRUE(b.is_boundary_node(4, 10));
  EXPECT_FALSE(b.is_boundary_node(4, 5));
}

TEST(BlendedSpace, BoundaryValuesVanish) {
  for (MapKind kind : {MapKind::taylor, MapKind::exact}) {
    const BlendedSpace b(tokamak_space(2, 10, 3, kind));
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    CoefficientVector full(b.dof_count());
    for (double& v : full.values()) v = coef(rng);
    std::uniform_real_distribution<double> ur(0.0, 2.0), uz(-1.0, 1.5), uk(0.0, kPi / 20);
    for (int n = 0; n < 200; ++n) {
      EXPECT_EQ(b.evaluate(full, {0.0, uz(rng), uk(rng)}), 0.0);
      EXPECT_EQ(b.evaluate(full, {2.0, uz(rng), uk(rng)}), 0.0);
      EXPECT_EQ(b.evaluate(full, {ur(rng), -1.0, uk(rng)}), 0.0);
      EXPECT_EQ(b.evaluate(full, {ur(rng), 1.5, uk(rng)}), 0.0);
    }
  }
}

TEST(BlendedSpace, BulkEqualsFcifem) {
  const BlendedSpace b(tokamak_space(2, 10, 3, MapKind::taylor));
  const FcifemSpace& s = b.fcifem();
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  CoefficientVector c(s.dof_count());
  for (int d = 0; d < s.dof_count(); ++d) c[d] = coef(rng);
  for (Point3 x : {Point3{0.5, 0.0, 0.01}, Point3{1.7, 1.2, 0.1}}) {
    EXPECT_EQ(b.evaluate(c, x), s.evaluate(c, x));
    const Vec3 g1 = b.evaluate_gradient(c, x), g2 = s.evaluate_gradient(c, x);
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(g1[k], g2[k]);
  }
}

TEST(BlendedSpace, MatchesHandBuiltBlendForAffineData) {
  // Linear splines with a straight field reproduce functions of
  // (R, Z - slope zeta) in the FCIFEM part. The FEM layer interpolates the
  // same function at interior nodes and is zero at boundary nodes, so the
  // blend is (1 - B) f + B I f with I built here from explicit hats.
  const int n = 10, n_zeta = 6;
  const BlendedSpace b(tokamak_space(1, n, n_zeta, MapKind::straight));
  const double slope = 0.7;
  auto f = [&](const Point3& p) { return 1.0 + 2.0 * p.r - 3.0 * (p.z - slope * p.zeta); };
  const CoefficientVector c = b.fcifem().interpolate_nodal(f);
  const double hr = 2.0 / n, hz = 2.5 / n, hk = (kPi / 20) / n_zeta;
  auto blend = [&](const Point3& x) {
    const int i0 = std::min(static_cast<int>(x.r / hr), n - 1);
    const int j0 = std::min(static_cast<int>((x.z + 1.0) / hz), n - 1);
    const int k0 = static_cast<int>(x.zeta / hk);
    const double tr = x.r / hr - i0, tz = (x.z + 1.0) / hz - j0, tk = x.zeta / hk - k0;
    auto end_hats = [](int first, double t, int last) {
      return (first == 0 ? 1.0 - t : 0.0) + (first + 1 == last ? t : 0.0);
    };
    const double br = end_hats(i0, tr, n), bz = end_hats(j0, tz, n);
    const double ramp = 1.0 - (1.0 - br) * (1.0 - bz);
    double interp = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int bb = 0; bb < 2; ++bb) {
        const int i = i0 + a, j = j0 + bb;
        if (i == 0 || i == n || j == 0 || j == n) continue;
        for (int e = 0; e < 2; ++e) {
          const double w = (a ? tr : 1.0 - tr) * (bb ? tz : 1.0 - tz) * (e ? tk : 1.0 - tk);
          interp += w * f({i * hr, -1.0 + j * hz, (k0 + e) * hk});
        }
      }
    }
    return (1.0 - ramp) * f(x) + ramp * interp;
  };
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> ur(0.0, 2.0), uz(-1.0, 1.5), uk(hk, 5 * hk);
  for (int m = 0; m < 2000; ++m) {
    const Point3 x{ur(rng), uz(rng), uk(rng)};
    if (!images_inside(b.fcifem(), x)) continue;
    ASSERT_NEAR(b.evaluate(c, x), blend(x), 1e-12) << x.r << " " << x.z << " " << x.zeta;
  }
  // Away from the band the blend is the affine function itself.
  for (int m = 0; m < 200; ++m) {
    const Point3 x{std::uniform_real_distribution<double>(hr, 2.0 - hr)(rng),
                   std::uniform_real_distribution<double>(-1.0 + hz, 1.5 - hz)(rng), uk(rng)};
    if (!images_inside(b.fcifem(), x)) continue;
    const Vec3 g = b.evaluate_gradient(c, x);
    ASSERT_NEAR(g[0], 2.0, 1e-11);
    ASSERT_NEAR(g[1], -3.0, 1e-11);
    ASSERT_NEAR(g[2], 3.0 * slope, 1e-11);
  }
}

TEST(BlendedSpace, FemNodalValuesAreSplineValuesAtNodes) {
  // Quadratic coefficients are not nodal values, so the FEM layer must use
  // the plane function sum_ij c_ijk B_i(R_i') B_j(Z_j') at each interior node.
  const int n = 8, n_zeta = 3;
  const BlendedSpace b(tokamak_space(2, n, n_zeta, MapKind::taylor));
  const FcifemSpace& s = b.fcifem();
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  CoefficientVector c(s.dof_count());
  for (double& v : c.values()) v = coef(rng);
  auto plane_value = [&](int i, int j, int k) {
    const BasisWindow wr = s.r_axis().window(s.r_axis().node(i));
    const BasisWindow wz = s.z_axis().window(s.z_axis().node(j));
    double v = 0.0;
    for (int a = 0; a < wr.count; ++a) {
      for (int bb = 0; bb < wz.count; ++bb) v += c[s.dof(wr.first + a, wz.first + bb, k)] * wr.value[a] * wz.value[bb];
    }
    return v;
  };
  const double hr = 2.0 / n, hz = 2.5 / n, hk = (kPi / 20) / n_zeta;
  std::uniform_real_distribution<double> ur(0.0, 2.0), uz(-1.0, 1.5), uk(0.0, 2 * hk);
  for (int m = 0; m < 300; ++m) {
    const Point3 x{ur(rng), uz(rng), uk(rng)};
    const int i0 = std::min(static_cast<int>(x.r / hr), n - 1);
    const int j0 = std::min(static_cast<int>((x.z + 1.0) / hz), n - 1);
    const int k0 = static_cast<int>(x.zeta / hk);
    const double tr = x.r / hr - i0, tz = (x.z + 1.0) / hz - j0, tk = x.zeta / hk - k0;
    const double br = (i0 == 0 ? 1.0 - tr : 0.0) + (i0 == n - 1 ? tr : 0.0);
    const double bz = (j0 == 0 ? 1.0 - tz : 0.0) + (j0 == n - 1 ? tz : 0.0);
    const double ramp = 1.0 - (1.0 - br) * (1.0 - bz);
    double interp = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int bb = 0; bb < 2; ++bb) {
        const int i = i0 + a, j = j0 + bb;
        if (i == 0 || i == n || j == 0 || j == n) continue;
        for (int e = 0; e < 2; ++e) {
          const double w = (a ? tr : 1.0 - tr) * (bb ? tz : 1.0 - tz) * (e ? tk : 1.0 - tk);
          interp += w * plane_value(i, j, (k0 + e) % n_zeta);
        }
      }
    }
    const double expected = (1.0 - ramp) * s.evaluate(c, x) + ramp * interp;
    ASSERT_NEAR(b.evaluate(c, x), expected, 1e-12) << x.r << " " << x.z << " " << x.zeta;
  }
}

TEST(BlendedSpace, GradientMatchesFiniteDifferenceInBand) {
  const BlendedSpace b(tokamak_space(2, 10, 3, MapKind::taylor));
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  CoefficientVector c(b.dof_count());
  for (double& v : c.values()) v = coef(rng);
  const double e = 1e-6;
  for (Point3 x : {Point3{0.07, 0.3, 0.02}, Point3{1.9, 1.41, 0.1}, Point3{0.05, -0.93, 0.05}}) {
    const Vec3 g = b.evaluate_gradient(c, x);
    EXPECT_NEAR(g[0], (b.evaluate(c, {x.r + e, x.z, x.zeta}) - b.evaluate(c, {x.r - e, x.z, x.zeta})) / (2 * e), 1e-5);
    EXPECT_NEAR(g[1], (b.evaluate(c, {x.r, x.z + e, x.zeta}) - b.evaluate(c, {x.r, x.z - e, x.zeta})) / (2 * e), 1e-5);
    EXPECT_NEAR(g[2], (b.evaluate(c, {x.r, x.z, x.zeta + e}) - b.evaluate(c, {x.r, x.z, x.zeta - e})) / (2 * e), 1e-4);
  }
}

TEST(FieldExport, WritesHeaderAndSamples) {
  const FcifemSpace s = tokamak_space(2, 4, 1, MapKind::straight);
  const SampleGrid g = SampleGrid::for_space(s, 3, true);
  EXPECT_EQ(g.shape[0], 13);
  EXPECT_EQ(g.shape[1], 13);
  EXPECT_EQ(g.shape[2], 1);
  const std::string path = ::testing::TempDir() + "/slice.csv";
  write_field_csv(path, g, [](const Point3& p) { return p.r + p.z; });
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "# fcifem field samples");
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#' && line[0] != 'r') ++rows;
  }
  EXPECT_EQ(rows, 13 * 13);
  EXPECT_DOUBLE_EQ(g.point(12, 12, 0).r, 2.0);
  EXPECT_DOUBLE_EQ(g.point(12, 12, 0).z, 1.5);
}

}  // namespace
}  // namespace fcifem
