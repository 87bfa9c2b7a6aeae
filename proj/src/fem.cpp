#include "offcut/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "offcut/error.hpp"

namespace offcut {

Vec3 Grid::node_position(int n) const {
  const int i = n % (nx + 1);
  const int j = (n / (nx + 1)) % (ny + 1);
  const int k = n / ((nx + 1) * (ny + 1));
  return origin + element_size * Vec3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
}

std::array<int, 8> Grid::element_nodes(int e) const {
  const int i = e % nx;
  const int j = (e / nx) % ny;
  const int k = e / (nx * ny);
  return {node(i, j, k),         node(i + 1, j, k),         node(i + 1, j + 1, k),     node(i, j + 1, k),
          node(i, j, k + 1),     node(i + 1, j, k + 1),     node(i + 1, j + 1, k + 1), node(i, j + 1, k + 1)};
}

namespace {

// Calls f(element, share) for every element the part covers.
template <typename F>
void for_each_covered(const Grid& g, const Part& part, F&& f) {
  const Box3 box = world_box(part);
  const double es = g.element_size;
  std::array<int, 3> lo{}, hi{};
  const std::array<int, 3> n = {g.nx, g.ny, g.nz};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::clamp(static_cast<int>(std::floor((box.min[a] - g.origin[a]) / es)), 0, n[a] - 1);
    hi[a] = std::clamp(static_cast<int>(std::ceil((box.max[a] - g.origin[a]) / es)), 0, n[a]);
  }
  const auto [ax, ay] = in_plane_axes(part.normal);
  const int an = static_cast<int>(part.normal);
  for (int k = lo[2]; k < hi[2]; ++k) {
    for (int j = lo[1]; j < hi[1]; ++j) {
      for (int i = lo[0]; i < hi[0]; ++i) {
        const Vec3 emin = g.origin + es * Vec3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
        const Vec3 emax = emin + Vec3{es, es, es};
        const double through = interval_overlap(box.min[an], box.max[an], emin[an], emax[an]) / es;
        if (through <= 0.0) continue;
        double plane = 0.0;
        if (part.rectangular) {
          plane = interval_overlap(box.min[ax], box.max[ax], emin[ax], emax[ax]) *
                  interval_overlap(box.min[ay], box.max[ay], emin[ay], emax[ay]) / (es * es);
        } else {
          int inside = 0;
          for (int sy = 0; sy < 4; ++sy) {
            for (int sx = 0; sx < 4; ++sx) {
              const double wx = emin[ax] + (sx + 0.5) * es / 4.0;
              const double wy = emin[ay] + (sy + 0.5) * es / 4.0;
              const Vec2 local{wx - box.min[ax], wy - box.min[ay]};
              if (point_in_polygon(part.contour, local)) ++inside;
            }
          }
          plane = inside / 16.0;
        }
        if (plane > 0.0) f(g.element(i, j, k), through * plane);
      }
    }
  }
}

}  // namespace

DensityGrid voxelize(const std::vector<Part>& parts, double element_size) {
  DensityGrid out;
  Grid& g = out.grid;
  g.element_size = element_size;
  if (parts.empty()) return out;
  Box3 all = world_box(parts.front());
  for (const Part& p : parts) {
    const Box3 b = world_box(p);
    for (int a = 0; a < 3; ++a) {
      all.min[a] = std::min(all.min[a], b.min[a]);
      all.max[a] = std::max(all.max[a], b.max[a]);
    }
  }
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) {
    const double lo = std::floor(all.min[a] / element_size + 1e-9) - 1.0;
    const double hi = std::ceil(all.max[a] / element_size - 1e-9) + 1.0;
    g.origin[a] = lo * element_size;
    n[a] = static_cast<int>(hi - lo);
  }
  g.nx = n[0];
  g.ny = n[1];
  g.nz = n[2];
  out.rho.assign(static_cast<std::size_t>(g.element_count()), 0.0);
  for (const Part& p : parts) {
    for_each_covered(g, p, [&](int e, double share) { out.rho[e] += share; });
  }
  for (double& r : out.rho) r = std::min(r, 1.0);
  return out;
}

Eigen::Matrix<double, 24, 24> hex8_stiffness(const Material& material, double size) {
  const double E = material.youngs;
  const double nu = material.poisson;
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  const double c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) D(a, b) = c * (a == b ? 1.0 - nu : nu);
    D(3 + a, 3 + a) = c * (1.0 - 2.0 * nu) / 2.0;
  }
  static constexpr int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                       {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  const double g = 1.0 / std::sqrt(3.0);
  const double half = size / 2.0;
  Eigen::Matrix<double, 24, 24> K = Eigen::Matrix<double, 24, 24>::Zero();
  for (int q = 0; q < 8; ++q) {
    // Gauss point in [-1,1]^3; the cube maps affinely with jacobian size/2.
    const double xi[3] = {(q & 1) ? g : -g, (q & 2) ? g : -g, (q & 4) ? g : -g};
    Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
      double dN[3];
      for (int d = 0; d < 3; ++d) {
        double v = 0.125 * (corner[a][d] ? 1.0 : -1.0);
        for (int e = 0; e < 3; ++e) {
          if (e != d) v *= 1.0 + (corner[a][e] ? 1.0 : -1.0) * xi[e];
        }
        dN[d] = v / half;
      }
      B(0, 3 * a) = dN[0];
      B(1, 3 * a + 1) = dN[1];
      B(2, 3 * a + 2) = dN[2];
      B(3, 3 * a) = dN[1];
      B(3, 3 * a + 1) = dN[0];
      B(4, 3 * a + 1) = dN[2];
      B(4, 3 * a + 2) = dN[1];
      B(5, 3 * a) = dN[2];
      B(5, 3 * a + 2) = dN[0];
    }
    K += B.transpose() * D * B * (half * half * half);
  }
  return K;
}

std::vector<int> ground_nodes(const DensityGrid& density) {
  const Grid& g = density.grid;
  std::vector<char> mark(static_cast<std::size_t>(g.node_count()), 0);
  for (int e = 0; e < g.element_count(); ++e) {
    if (density.rho[e] <= 0.0) continue;
    for (int n : g.element_nodes(e)) {
      if (std::abs(g.node_position(n).z) <= g.element_size / 2.0) mark[n] = 1;
    }
  }
  std::vector<int> out;
  for (int n = 0; n < g.node_count(); ++n) {
    if (mark[n]) out.push_back(n);
  }
  return out;
}

namespace {

int find_root(std::vector<int>& parent, int a) {
  while (parent[a] != a) {
    parent[a] = parent[parent[a]];
    a = parent[a];
  }
  return a;
}

}  // namespace

StiffnessSystem assemble_stiffness(const DensityGrid& density, const Material& material,
                                   const std::vector<int>& fixed_nodes, double rho_min) {
  const Grid& g = density.grid;
  const int nn = g.node_count();
  std::vector<char> used(static_cast<std::size_t>(nn), 0);
  std::vector<int> parent(static_cast<std::size_t>(nn));
  std::iota(parent.begin(), parent.end(), 0);
  for (int e = 0; e < g.element_count(); ++e) {
    if (density.rho[e] <= 0.0) continue;
    const auto nodes = g.element_nodes(e);
    for (int n : nodes) {
      used[n] = 1;
      parent[find_root(parent, n)] = find_root(parent, nodes[0]);
    }
  }
  std::vector<char> fixed(static_cast<std::size_t>(nn), 0);
  std::vector<char> grounded(static_cast<std::size_t>(nn), 0);
  bool any_fixed = false;
  for (int n : fixed_nodes) {
    if (!used[n]) continue;
    fixed[n] = 1;
    grounded[find_root(parent, n)] = 1;
    any_fixed = true;
  }
  if (!any_fixed) throw SingularSystem("no fixed node touches the design");
  for (int n = 0; n < nn; ++n) {
    if (used[n] && !grounded[find_root(parent, n)]) {
      throw SingularSystem("a connected piece of the design is not attached to any fixed node");
    }
  }

  StiffnessSystem sys;
  sys.dof_map.assign(static_cast<std::size_t>(3 * nn), -1);
  for (int n = 0; n < nn; ++n) {
    if (!used[n] || fixed[n]) continue;
    for (int d = 0; d < 3; ++d) sys.dof_map[3 * n + d] = sys.size++;
  }
  const auto Kc = hex8_stiffness(material, g.element_size);
  std::vector<Eigen::Triplet<double>> triplets;
  for (int e = 0; e < g.element_count(); ++e) {
    if (density.rho[e] <= 0.0) continue;
    const double scale = std::max(density.rho[e], rho_min);
    const auto nodes = g.element_nodes(e);
    for (int a = 0; a < 24; ++a) {
      const int ra = sys.dof_map[3 * nodes[a / 3] + a % 3];
      if (ra < 0) continue;
      for (int b = 0; b < 24; ++b) {
        const int rb = sys.dof_map[3 * nodes[b / 3] + b % 3];
        if (rb >= 0) triplets.emplace_back(ra, rb, scale * Kc(a, b));
      }
    }
  }
  sys.K.resize(sys.size, sys.size);
  sys.K.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

Eigen::VectorXd gravity_loads(const DensityGrid& density, const Material& material) {
  const Grid& g = density.grid;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * g.node_count());
  const double volume = std::pow(g.element_size, 3);
  for (int e = 0; e < g.element_count(); ++e) {
    if (density.rho[e] <= 0.0) continue;
    const double w = density.rho[e] * material.weight * volume / 8.0;
    for (int n : g.element_nodes(e)) f[3 * n + 2] -= w;
  }
  return f;
}

void add_part_load(Eigen::VectorXd& f, const DensityGrid& density, const Part& part, Vec3 force) {
  std::vector<std::pair<int, double>> shares;
  double total = 0.0;
  for_each_covered(density.grid, part, [&](int e, double s) {
    shares.emplace_back(e, s);
    total += s;
  });
  if (total <= 0.0) return;
  for (const auto& [e, s] : shares) {
    for (int n : density.grid.element_nodes(e)) {
      for (int d = 0; d < 3; ++d) f[3 * n + d] += force[d] * s / total / 8.0;
    }
  }
}

DisplacementField DisplacementField::from_function(const Grid& grid, const std::function<Vec3(Vec3)>& f) {
  std::vector<Vec3> u(static_cast<std::size_t>(grid.node_count()));
  for (int n = 0; n < grid.node_count(); ++n) u[n] = f(grid.node_position(n));
  return {grid, std::move(u)};
}

Vec3 DisplacementField::at(Vec3 p) const {
  const int n[3] = {grid_.nx, grid_.ny, grid_.nz};
  int idx[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const double s = std::clamp((p[a] - grid_.origin[a]) / grid_.element_size, 0.0, static_cast<double>(n[a]));
    idx[a] = std::min(static_cast<int>(std::floor(s)), n[a] - 1);
    t[a] = s - idx[a];
  }
  Vec3 out;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const double w = (di ? t[0] : 1.0 - t[0]) * (dj ? t[1] : 1.0 - t[1]) * (dk ? t[2] : 1.0 - t[2]);
    out = out + w * u_[grid_.node(idx[0] + di, idx[1] + dj, idx[2] + dk)];
  }
  return out;
}

DisplacementField solve_displacements(const StiffnessSystem& system, const Grid& grid, const Eigen::VectorXd& f) {
  Eigen::VectorXd fr = Eigen::VectorXd::Zero(system.size);
  for (std::size_t g = 0; g < system.dof_map.size(); ++g) {
    if (system.dof_map[g] >= 0) fr[system.dof_map[g]] = f[static_cast<Eigen::Index>(g)];
  }
  Eigen::VectorXd ur = Eigen::VectorXd::Zero(system.size);
  const double fnorm = fr.norm();
  if (fnorm > 0.0) {
    constexpr double kTolerance = 1e-8;
    bool ok = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system.K);
    if (ldlt.info() == Eigen::Success) {
      ur = ldlt.solve(fr);
      ok = ldlt.info() == Eigen::Success && (system.K * ur - fr).norm() <= kTolerance * fnorm;
    }
    if (!ok) {
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg(system.K);
      cg.setTolerance(kTolerance * 1e-2);
      cg.setMaxIterations(20 * std::max(system.size, 1));
      ur = cg.solve(fr);
      if ((system.K * ur - fr).norm() > kTolerance * fnorm) {
        throw SolveFailed("displacement solve did not reach the residual tolerance");
      }
    }
  }
  std::vector<Vec3> u(static_cast<std::size_t>(grid.node_count()));
  for (int n = 0; n < grid.node_count(); ++n) {
    for (int d = 0; d < 3; ++d) {
      const int r = system.dof_map[3 * n + d];
      if (r >= 0) u[n][d] = ur[r];
    }
  }
  return {grid, std::move(u)};
}

bool SagReport::any() const {
  return std::any_of(planks.begin(), planks.end(), [](const PlankSag& p) { return p.sagging; });
}

SagReport detect_sagging(const DisplacementField& field, const std::vector<Part>& parts, double threshold,
                         int samples) {
  SagReport report;
  const int s = samples;
  std::vector<Vec3> d(static_cast<std::size_t>(s) * s);
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Part& part = parts[pi];
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i) {
        const Vec2 local{part.lx * i / (s - 1), part.ly * j / (s - 1)};
        d[static_cast<std::size_t>(j) * s + i] = field.at(local_to_world(part, local));
      }
    }
    PlankSag sag;
    sag.part = static_cast<int>(pi);
    sag.deflections.resize(d.size());
    auto at = [&](int i, int j) { return d[static_cast<std::size_t>(j) * s + i]; };
    for (int j = 0; j < s; ++j) {
      for (int i = 0; i < s; ++i) {
        const double t = static_cast<double>(i) / (s - 1);
        const double r = static_cast<double>(j) / (s - 1);
        const Vec3 along_x = (1.0 - t) * at(0, j) + t * at(s - 1, j);
        const Vec3 along_y = (1.0 - r) * at(i, 0) + r * at(i, s - 1);
        const double dx = (at(i, j) - along_x).norm();
        const double dy = (at(i, j) - along_y).norm();
        const double dev = std::max(dx, dy);
        sag.deflections[static_cast<std::size_t>(j) * s + i] = dev;
        if (dev > sag.max_deflection) {
          sag.max_deflection = dev;
          sag.span = dx >= dy ? 0 : 1;
        }
      }
    }
    sag.sagging = sag.max_deflection > threshold;
    report.planks.push_back(std::move(sag));
  }
  return report;
}

SagReport analyze_sag(const std::vector<Part>& parts, const FemOptions& options) {
  const DensityGrid density = voxelize(parts, options.element_size);
  const StiffnessSystem sys = assemble_stiffness(density, options.material, ground_nodes(density));
  Eigen::VectorXd f = gravity_loads(density, options.material);
  for (const PartLoad& load : options.loads) {
    add_part_load(f, density, parts.at(static_cast<std::size_t>(load.part)), load.force);
  }
  return detect_sagging(solve_displacements(sys, density.grid, f), parts, options.threshold);
}

}  // namespace offcut
