#include "offcut/sizing.hpp"

#include <cmath>

#include "offcut/error.hpp"

namespace offcut {

Eigen::VectorXd size_vector(const std::vector<Part>& parts, std::span<const Orientation> orientations) {
  Eigen::VectorXd s(2 * parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Orientation o = orientations.empty() ? Orientation::R0 : orientations[i];
    const auto [w, h] = material_extents(parts[i].lx, parts[i].ly, o);
    s[2 * i] = w;
    s[2 * i + 1] = h;
  }
  return s;
}

Eigen::MatrixXd size_gradients(const DesignEvaluator& evaluator, const DesignParams& x,
                               std::span<const Orientation> orientations, double step) {
  const std::size_t n = x.size();
  const std::size_t m = 2 * evaluator.part_count();
  Eigen::MatrixXd g(m, n);
  DesignParams probe = x;
  for (std::size_t j = 0; j < n; ++j) {
    probe[j] = x[j] + step;
    const Eigen::VectorXd plus = size_vector(evaluator.evaluate(probe), orientations);
    probe[j] = x[j] - step;
    const Eigen::VectorXd minus = size_vector(evaluator.evaluate(probe), orientations);
    probe[j] = x[j];
    g.col(j) = (plus - minus) / (2.0 * step);
  }
  g = g.unaryExpr([](double v) { return std::abs(v) < kGradientSnap ? 0.0 : v; });
  return g;
}

bool has_influence(const Eigen::MatrixXd& gradients, std::size_t size_index) {
  return gradients.row(static_cast<Eigen::Index>(size_index)).cwiseAbs().maxCoeff() > 0.0;
}

SizeChange change_part_sizes(const Eigen::MatrixXd& gradients, const DesignParams& x,
                             const Eigen::VectorXd& target) {
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0 && !has_influence(gradients, static_cast<std::size_t>(i))) {
      throw NoInfluence("size " + std::to_string(i) + " does not depend on any parameter");
    }
  }
  SizeChange out;
  out.params = x;
  if (target.isZero(0.0)) {
    out.delta = Eigen::VectorXd::Zero(gradients.cols());
    out.predicted = Eigen::VectorXd::Zero(gradients.rows());
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(kRankTolerance);
  cod.compute(gradients);
  out.delta = cod.solve(target);
  // Round-off in untouched directions must not register as an edit.
  out.delta = out.delta.unaryExpr([](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; });
  out.predicted = gradients * out.delta;
  for (Eigen::Index i = 0; i < out.predicted.size(); ++i) {
    if (std::abs(out.predicted[i]) > 1e-9) ++out.dependence;
  }
  out.residual = (out.predicted - target).norm();
  for (std::size_t j = 0; j < x.size(); ++j) out.params[j] += out.delta[static_cast<Eigen::Index>(j)];
  return out;
}

SizeChange change_part_size(const Eigen::MatrixXd& gradients, const DesignParams& x,
                            std::size_t size_index, double lambda) {
  if (!has_influence(gradients, size_index)) {
    throw NoInfluence("size " + std::to_string(size_index) + " does not depend on any parameter");
  }
  Eigen::VectorXd target = Eigen::VectorXd::Zero(gradients.rows());
  target[static_cast<Eigen::Index>(size_index)] = lambda;
  return change_part_sizes(gradients, x, target);
}

const Eigen::MatrixXd& GradientCache::get(const DesignEvaluator& evaluator, const DesignParams& x,
                                          std::span<const Orientation> orientations) {
  bool hit = valid_ && key_.size() == x.size() &&
             std::equal(orientations.begin(), orientations.end(), orient_.begin(), orient_.end());
  for (std::size_t i = 0; hit && i < x.size(); ++i) {
    if (key_[i] != x[i]) hit = false;
  }
  if (!hit) {
    value_ = size_gradients(evaluator, x, orientations);
    key_ = x.values;
    orient_.assign(orientations.begin(), orientations.end());
    valid_ = true;
    ++misses_;
  }
  return value_;
}

}  // namespace offcut
