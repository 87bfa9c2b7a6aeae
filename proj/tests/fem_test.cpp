#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "offcut/error.hpp"
#include "offcut/fem.hpp"
#include "test_helpers.hpp"

namespace offcut {
namespace {

// Horizontal plank spanning the given world box (normal along z).
Part slab(int id, Vec3 min, Vec3 max) {
  Part p = testing::flat_part(id, max.x - min.x, max.y - min.y);
  p.thickness = max.z - min.z;
  p.normal = Axis::Z;
  p.center = 0.5 * (min + max);
  return p;
}

TEST(Voxelize, FullElementHasUnitDensity) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 0}, {40, 40, 20})});
  EXPECT_EQ(d.grid.origin, (Vec3{-10, -10, -10}));
  EXPECT_EQ(d.grid.nx, 6);
  EXPECT_EQ(d.grid.nz, 4);
  EXPECT_DOUBLE_EQ(d.rho[d.grid.element(2, 2, 1)], 1.0);
  EXPECT_DOUBLE_EQ(d.rho[d.grid.element(0, 0, 0)], 0.0);
}

TEST(Voxelize, ThinPlankGivesFractionalDensity) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 12}, {40, 40, 15})});
  const int k = static_cast<int>((10.0 - d.grid.origin.z) / 10.0);
  EXPECT_NEAR(d.rho[d.grid.element(2, 2, k)], 0.3, 1e-12);
}

TEST(Voxelize, ConservesVolumeOfContourPart) {
  const double r = 120.0;
  Polygon c = {{0, 0}};
  for (int k = 0; k <= 512; ++k) {
    const double t = 0.5 * std::numbers::pi * k / 512;
    c.push_back({r * std::cos(t), r * std::sin(t)});
  }
  Part p = testing::flat_part(0, r, r, c);
  p.thickness = 3.0;
  p.center = {r / 2 + 3.0, r / 2 + 7.0, 51.0};
  const DensityGrid d = voxelize({p});
  double total = 0.0;
  for (double rho : d.rho) total += rho * 1000.0;
  const double exact = std::abs(signed_area(c)) * 3.0;
  EXPECT_NEAR(total, exact, 0.02 * exact);
}

// Independent element integration: 3x3x3 Gauss-Legendre, strain built from
// explicit shape-function gradients in physical coordinates.
Eigen::MatrixXd reference_hex8(double E, double nu, double h) {
  const double pts[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double wts[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const int sx[8] = {0, 1, 1, 0, 0, 1, 1, 0};
  const int sy[8] = {0, 0, 1, 1, 0, 0, 1, 1};
  const int sz[8] = {0, 0, 0, 0, 1, 1, 1, 1};
  const double lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  const double mu = E / (2 * (1 + nu));
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(24, 24);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 3; ++c) {
        // Physical point in [0,h]^3.
        const double x = h * (pts[a] + 1) / 2, y = h * (pts[b] + 1) / 2, z = h * (pts[c] + 1) / 2;
        const double w = wts[a] * wts[b] * wts[c] * std::pow(h / 2, 3);
        Eigen::MatrixXd grad(8, 3);
        for (int n = 0; n < 8; ++n) {
          const double fx = sx[n] ? x / h : 1 - x / h;
          const double fy = sy[n] ? y / h : 1 - y / h;
          const double fz = sz[n] ? z / h : 1 - z / h;
          const double gx = (sx[n] ? 1.0 : -1.0) / h, gy = (sy[n] ? 1.0 : -1.0) / h, gz = (sz[n] ? 1.0 : -1.0) / h;
          grad(n, 0) = gx * fy * fz;
          grad(n, 1) = fx * gy * fz;
          grad(n, 2) = fx * fy * gz;
        }
        // Energy density lambda/2 (div u)^2 + mu eps:eps, differentiated twice.
        for (int m = 0; m < 8; ++m) {
          for (int n = 0; n < 8; ++n) {
            for (int i = 0; i < 3; ++i) {
              for (int j = 0; j < 3; ++j) {
                double v = lambda * grad(m, i) * grad(n, j) + mu * grad(m, j) * grad(n, i);
                if (i == j) v += mu * grad.row(m).dot(grad.row(n));
                K(3 * m + i, 3 * n + j) += w * v;
              }
            }
          }
        }
      }
    }
  }
  return K;
}

TEST(Hex8, MatchesIndependentIntegration) {
  const Material m;
  const Eigen::MatrixXd K = hex8_stiffness(m, 10.0);
  const Eigen::MatrixXd R = reference_hex8(m.youngs, m.poisson, 10.0);
  EXPECT_LT((K - R).norm(), 1e-9 * R.norm());
  EXPECT_LT((K - K.transpose()).norm(), 1e-12 * K.norm());
}

TEST(Hex8, RigidMotionsCarryNoEnergy) {
  const Eigen::MatrixXd K = hex8_stiffness({}, 10.0);
  const int sx[8] = {0, 1, 1, 0, 0, 1, 1, 0};
  const int sy[8] = {0, 0, 1, 1, 0, 0, 1, 1};
  const int sz[8] = {0, 0, 0, 0, 1, 1, 1, 1};
  Eigen::VectorXd tx = Eigen::VectorXd::Zero(24), rz = Eigen::VectorXd::Zero(24);
  for (int n = 0; n < 8; ++n) {
    tx[3 * n] = 1.0;
    rz[3 * n] = -10.0 * sy[n];
    rz[3 * n + 1] = 10.0 * sx[n];
    (void)sz;
  }
  EXPECT_LT((K * tx).norm(), 1e-9 * K.norm());
  EXPECT_LT((K * rz).norm(), 1e-9 * K.norm() * 10.0);
}

TEST(Assemble, SingleElementEqualsElementMatrix) {
  DensityGrid d;
  d.grid = {{0, 0, 0}, 10.0, 1, 1, 1};
  d.rho = {1.0};
  // Fix one node so the system assembles; compare the free block.
  const StiffnessSystem s = assemble_stiffness(d, {}, {0});
  const auto Kc = hex8_stiffness({}, 10.0);
  const Eigen::MatrixXd dense(s.K);
  ASSERT_EQ(s.size, 21);
  const auto nodes = d.grid.element_nodes(0);
  ASSERT_EQ(nodes[0], 0);
  double worst = 0.0;
  for (int a = 3; a < 24; ++a) {
    for (int b = 3; b < 24; ++b) {
      const int ra = s.dof_map[3 * nodes[a / 3] + a % 3];
      const int rb = s.dof_map[3 * nodes[b / 3] + b % 3];
      worst = std::max(worst, std::abs(dense(ra, rb) - Kc(a, b)));
    }
  }
  EXPECT_LT(worst, 1e-12 * Kc.norm());
}

TEST(Assemble, LinearInDensity) {
  DensityGrid full;
  full.grid = {{0, 0, 0}, 10.0, 2, 2, 2};
  full.rho.assign(8, 1.0);
  DensityGrid half = full;
  half.rho.assign(8, 0.5);
  const auto fixed = ground_nodes(full);
  const Eigen::MatrixXd a(assemble_stiffness(full, {}, fixed).K);
  const Eigen::MatrixXd b(assemble_stiffness(half, {}, fixed).K);
  EXPECT_LT((b - 0.5 * a).norm(), 1e-12 * a.norm());
}

TEST(Assemble, NoGroundContactIsSingular) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 50}, {40, 40, 60})});
  EXPECT_TRUE(ground_nodes(d).empty());
  EXPECT_THROW(assemble_stiffness(d, {}, ground_nodes(d)), SingularSystem);
}

TEST(Assemble, FloatingPieceIsSingular) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 0}, {40, 40, 10}), slab(1, {0, 0, 60}, {40, 40, 70})});
  EXPECT_THROW(assemble_stiffness(d, {}, ground_nodes(d)), SingularSystem);
}

TEST(Assemble, PositiveDefiniteAfterFixing) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 0}, {40, 20, 30})});
  const Eigen::MatrixXd K(assemble_stiffness(d, {}, ground_nodes(d)).K);
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  EXPECT_EQ(llt.info(), Eigen::Success);
}

DensityGrid unit_cube() {
  DensityGrid d;
  d.grid = {{0, 0, 0}, 10.0, 2, 2, 2};
  d.rho.assign(8, 1.0);
  return d;
}

TEST(Solve, ZeroLoadGivesZeroDisplacement) {
  const DensityGrid d = unit_cube();
  const StiffnessSystem s = assemble_stiffness(d, {}, ground_nodes(d));
  const DisplacementField u = solve_displacements(s, d.grid, Eigen::VectorXd::Zero(3 * d.grid.node_count()));
  for (const Vec3& v : u.nodes()) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Solve, CubeMatchesDenseSolve) {
  const DensityGrid d = unit_cube();
  const Grid& g = d.grid;
  const std::vector<int> fixed = ground_nodes(d);
  ASSERT_EQ(fixed.size(), 9u);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * g.node_count());
  for (int j = 0; j <= 2; ++j) {
    for (int i = 0; i <= 2; ++i) f[3 * g.node(i, j, 2) + 2] = -1.0;
  }
  const DisplacementField u = solve_displacements(assemble_stiffness(d, {}, fixed), g, f);

  // Dense oracle: assemble the full 81x81 matrix, then drop fixed rows/cols.
  const auto Kc = hex8_stiffness({}, 10.0);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(81, 81);
  for (int e = 0; e < 8; ++e) {
    const auto nodes = g.element_nodes(e);
    for (int a = 0; a < 24; ++a) {
      for (int b = 0; b < 24; ++b) K(3 * nodes[a / 3] + a % 3, 3 * nodes[b / 3] + b % 3) += Kc(a, b);
    }
  }
  std::vector<int> free;
  for (int dof = 0; dof < 81; ++dof) {
    if (std::find(fixed.begin(), fixed.end(), dof / 3) == fixed.end()) free.push_back(dof);
  }
  Eigen::MatrixXd Kf(free.size(), free.size());
  Eigen::VectorXd ff(free.size());
  for (std::size_t a = 0; a < free.size(); ++a) {
    ff[a] = f[free[a]];
    for (std::size_t b = 0; b < free.size(); ++b) Kf(a, b) = K(free[a], free[b]);
  }
  const Eigen::VectorXd x = Kf.fullPivLu().solve(ff);
  for (std::size_t a = 0; a < free.size(); ++a) {
    EXPECT_NEAR(u.nodes()[free[a] / 3][free[a] % 3], x[a], 1e-9 * x.cwiseAbs().maxCoeff());
  }
  EXPECT_LT(u.nodes()[g.node(1, 1, 2)].z, 0.0);
}

TEST(Solve, DisplacementIsLinearInLoad) {
  const DensityGrid d = voxelize({slab(0, {0, 0, 0}, {100, 20, 10}), slab(1, {0, 0, 10}, {20, 20, 60})});
  const StiffnessSystem s = assemble_stiffness(d, {}, ground_nodes(d));
  const Eigen::VectorXd f = gravity_loads(d, {});
  const DisplacementField a = solve_displacements(s, d.grid, f);
  const DisplacementField b = solve_displacements(s, d.grid, 2.0 * f);
  double worst = 0.0, scale = 0.0;
  for (std::size_t n = 0; n < a.nodes().size(); ++n) {
    worst = std::max(worst, (b.nodes()[n] - 2.0 * a.nodes()[n]).norm());
    scale = std::max(scale, b.nodes()[n].norm());
  }
  EXPECT_LE(worst, 1e-6 * scale);
}

struct Cantilever {
  double length, width, thickness;
};

// Tip deflection under self-weight, clamped at x = 0.
double cantilever_tip(const Cantilever& c, const Material& m) {
  const Part beam = slab(0, {0, 0, 100}, {c.length, c.width, 100 + c.thickness});
  const DensityGrid d = voxelize({beam});
  std::vector<int> clamp;
  for (int n = 0; n < d.grid.node_count(); ++n) {
    if (std::abs(d.grid.node_position(n).x) < 1e-9) clamp.push_back(n);
  }
  const StiffnessSystem s = assemble_stiffness(d, m, clamp);
  const DisplacementField u = solve_displacements(s, d.grid, gravity_loads(d, m));
  return -u.at({c.length, c.width / 2, 100 + c.thickness / 2}).z;
}

double euler_bernoulli_tip(const Cantilever& c, const Material& m) {
  const double q = m.weight * c.width * c.thickness;
  const double I = c.width * std::pow(c.thickness, 3) / 12.0;
  return q * std::pow(c.length, 4) / (8.0 * m.youngs * I);
}

TEST(Cantilever, TipDeflectionNearBeamTheory) {
  const Material m;
  const Cantilever c{400.0, 40.0, 40.0};
  const double fem = cantilever_tip(c, m);
  const double beam = euler_bernoulli_tip(c, m);
  EXPECT_NEAR(fem / beam, 1.0, 0.30) << "fem " << fem << " beam " << beam;
}

TEST(Sag, ParabolicDipIsFlagged) {
  const Part p = slab(0, {0, 0, 40}, {300, 100, 43});
  const DensityGrid d = voxelize({p});
  auto dip = [&](double depth) {
    return DisplacementField::from_function(d.grid, [depth](Vec3 q) {
      const double t = std::clamp(q.x / 300.0, 0.0, 1.0);
      return Vec3{0, 0, -4.0 * depth * t * (1 - t)};
    });
  };
  const SagReport deep = detect_sagging(dip(0.5), {p});
  ASSERT_EQ(deep.planks.size(), 1u);
  EXPECT_TRUE(deep.planks[0].sagging);
  // Samples straddle mid-span, so the sampled peak is just under 0.5.
  EXPECT_NEAR(deep.planks[0].max_deflection, 0.5, 2e-3);
  EXPECT_EQ(deep.planks[0].deflections.size(), 32u * 32u);
  EXPECT_EQ(deep.planks[0].span, 0);
  const SagReport shallow = detect_sagging(dip(0.1), {p});
  EXPECT_FALSE(shallow.planks[0].sagging);
}

TEST(Sag, InvariantUnderAffineMotion) {
  const Part p = slab(0, {0, 0, 40}, {300, 100, 43});
  const DensityGrid d = voxelize({p});
  auto field = [&](bool shifted) {
    return DisplacementField::from_function(d.grid, [shifted](Vec3 q) {
      const double t = std::clamp(q.x / 300.0, 0.0, 1.0);
      Vec3 u{0, 0, -4.0 * 0.3 * t * (1 - t)};
      if (shifted) u = u + Vec3{5.0 + 0.01 * q.y, -3.0, 7.0 - 0.02 * q.x};
      return u;
    });
  };
  const SagReport a = detect_sagging(field(false), {p});
  const SagReport b = detect_sagging(field(true), {p});
  EXPECT_EQ(a.planks[0].sagging, b.planks[0].sagging);
  EXPECT_NEAR(a.planks[0].max_deflection, b.planks[0].max_deflection, 1e-9);
  const SagReport rigid = detect_sagging(
      DisplacementField::from_function(d.grid, [](Vec3) { return Vec3{1.0, 2.0, -3.0}; }), {p});
  EXPECT_NEAR(rigid.planks[0].max_deflection, 0.0, 1e-12);
}

// Vertical 3 mm plank in the plane x = x0, 300 wide along y, 200 tall.
Part leg(int id, double x0) {
  Part p = testing::flat_part(id, 300.0, 200.0);
  p.normal = Axis::X;
  p.center = {x0 + 1.5, 150.0, 100.0};
  return p;
}

TEST(Sag, LoadedSpanSagsAndUnloadedDoesNot) {
  // Shelf on two legs, 3 mm planks.
  std::vector<Part> parts = {slab(0, {0, 0, 200}, {300, 300, 203}), leg(1, 0.0), leg(2, 297.0)};
  FemOptions options;
  const SagReport light = analyze_sag(parts, options);
  EXPECT_FALSE(light.any());
  options.loads.push_back({0, {0, 0, -2000.0}});
  const SagReport heavy = analyze_sag(parts, options);
  EXPECT_TRUE(heavy.planks[0].sagging);
}

}  // namespace
}  // namespace offcut
