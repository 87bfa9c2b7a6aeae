#pragma once

// Part-size gradients and first-order part resizing.
//
// The size vector s stacks material-space extents, s[2i] = w_i and
// s[2i+1] = h_i, where (w_i, h_i) follow part i's layout orientation.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "offcut/design.hpp"
#include "offcut/tolerances.hpp"

namespace offcut {

inline constexpr double kDefaultFdStep = 0.1;   // mm
inline constexpr double kGradientSnap = 1e-9;

/// Size vector of `parts` under per-part orientations (all R0 when empty).
Eigen::VectorXd size_vector(const std::vector<Part>& parts,
                            std::span<const Orientation> orientations = {});

/// G[i][j] = d s_i / d x_j by central differences with step `step` (mm).
Eigen::MatrixXd size_gradients(const DesignEvaluator& evaluator, const DesignParams& x,
                               std::span<const Orientation> orientations = {},
                               double step = kDefaultFdStep);

struct SizeChange {
  DesignParams params;        // X + delta
  Eigen::VectorXd delta;
  Eigen::VectorXd predicted;  // G * delta
  int dependence = 0;         // nonzero entries of `predicted`
  double residual = 0.0;      // |G * delta - target|
};

/// Least-squares / least-norm solve of G * delta = target.
SizeChange change_part_sizes(const Eigen::MatrixXd& gradients, const DesignParams& x,
                             const Eigen::VectorXd& target);

/// Change size entry `size_index` by `lambda` mm, keeping the others fixed
/// when possible. Throws NoInfluence when the size has a zero gradient row.
SizeChange change_part_size(const Eigen::MatrixXd& gradients, const DesignParams& x,
                            std::size_t size_index, double lambda);

/// True when some parameter moves size entry `size_index`.
bool has_influence(const Eigen::MatrixXd& gradients, std::size_t size_index);

/// Memoizes the last gradient matrix per orientation set.
class GradientCache {
 public:
  const Eigen::MatrixXd& get(const DesignEvaluator& evaluator, const DesignParams& x,
                             std::span<const Orientation> orientations);

  std::size_t misses() const { return misses_; }

 private:
  std::vector<double> key_;
  std::vector<Orientation> orient_;
  Eigen::MatrixXd value_;
  bool valid_ = false;
  std::size_t misses_ = 0;
};

}  // namespace offcut
