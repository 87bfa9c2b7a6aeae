#pragma once

// Density-voxelized hexahedral FEM and per-plank sag detection. Units are
// mm, N and MPa throughout.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "offcut/design.hpp"

namespace offcut {

struct Material {
  double youngs = 3000.0;       // MPa
  double poisson = 0.3;
  double weight = 700e-9 * 9.81;  // N/mm^3 (700 kg/m^3 under gravity)
};

inline constexpr double kDefaultElementSize = 10.0;  // mm
inline constexpr double kMinDensity = 1e-4;
inline constexpr double kSagThreshold = 0.2;  // mm
inline constexpr int kSagSamples = 32;

/// Regular grid of cubic elements; node (i,j,k) sits at origin + es * (i,j,k).
struct Grid {
  Vec3 origin;
  double element_size = kDefaultElementSize;
  int nx = 0, ny = 0, nz = 0;  // elements per axis

  int element_count() const { return nx * ny * nz; }
  int node_count() const { return (nx + 1) * (ny + 1) * (nz + 1); }
  int element(int i, int j, int k) const { return (k * ny + j) * nx + i; }
  int node(int i, int j, int k) const { return (k * (ny + 1) + j) * (nx + 1) + i; }
  Vec3 node_position(int n) const;
  /// Node ids of element e in hex8 order (bottom face CCW, then top face).
  std::array<int, 8> element_nodes(int e) const;
};

struct DensityGrid {
  Grid grid;
  std::vector<double> rho;  // per element, in [0, 1]
};

/// Element densities from exact plank-box overlap along the thickness and
/// exact (rectangles) or 4x4-sampled (contours) in-plane coverage. The grid
/// is aligned to multiples of the element size and padded by one element.
DensityGrid voxelize(const std::vector<Part>& parts, double element_size = kDefaultElementSize);

/// 24x24 stiffness of a cubic hex8 element with 2x2x2 Gauss quadrature.
Eigen::Matrix<double, 24, 24> hex8_stiffness(const Material& material, double size);

/// Nodes within element_size/2 of z = 0 touching an element with rho > 0.
std::vector<int> ground_nodes(const DensityGrid& density);

/// Reduced system over the free DOFs of nodes attached to non-empty elements.
struct StiffnessSystem {
  Eigen::SparseMatrix<double> K;
  std::vector<int> dof_map;  // global dof -> reduced index, -1 when fixed or unused
  int size = 0;
};

/// Sums max(rho_e, rho_min) * K_c over non-empty elements and eliminates the
/// fixed nodes. Throws SingularSystem without fixed nodes or when a
/// connected component touches none.
StiffnessSystem assemble_stiffness(const DensityGrid& density, const Material& material,
                                   const std::vector<int>& fixed_nodes, double rho_min = kMinDensity);

/// Self-weight, rho_e * weight * es^3 spread evenly over the element nodes.
Eigen::VectorXd gravity_loads(const DensityGrid& density, const Material& material);

/// Spreads `force` over the nodes of the elements covered by `part`, weighted
/// by that part's share of each element.
void add_part_load(Eigen::VectorXd& f, const DensityGrid& density, const Part& part, Vec3 force);

class DisplacementField {
 public:
  DisplacementField() = default;
  DisplacementField(Grid grid, std::vector<Vec3> displacements) : grid_(grid), u_(std::move(displacements)) {}
  /// Samples `f` at every node.
  static DisplacementField from_function(const Grid& grid, const std::function<Vec3(Vec3)>& f);

  const Grid& grid() const { return grid_; }
  const std::vector<Vec3>& nodes() const { return u_; }
  /// Trilinear interpolation, clamped to the grid.
  Vec3 at(Vec3 p) const;

 private:
  Grid grid_;
  std::vector<Vec3> u_;
};

/// Solves K u = f to relative residual 1e-8 (sparse LDLT, CG fallback).
/// Throws SolveFailed when neither converges.
DisplacementField solve_displacements(const StiffnessSystem& system, const Grid& grid, const Eigen::VectorXd& f);

struct PlankSag {
  int part = 0;
  bool sagging = false;
  double max_deflection = 0.0;      // mm
  int span = 0;                     // 0: worst sample bends along local x, 1: along local y
  std::vector<double> deflections;  // samples x samples, row-major along local x
};

struct SagReport {
  std::vector<PlankSag> planks;

  bool any() const;
};

/// Deflection of each mid-surface sample relative to the straight lines
/// through the edge samples of its row and column; the larger of the two.
SagReport detect_sagging(const DisplacementField& field, const std::vector<Part>& parts,
                         double threshold = kSagThreshold, int samples = kSagSamples);

struct PartLoad {
  int part = 0;  // index into the part list
  Vec3 force;    // N
};

struct FemOptions {
  Material material;
  double element_size = kDefaultElementSize;
  double threshold = kSagThreshold;
  std::vector<PartLoad> loads;
};

/// voxelize -> ground -> assemble -> gravity + loads -> solve -> detect.
SagReport analyze_sag(const std::vector<Part>& parts, const FemOptions& options = {});

}  // namespace offcut
