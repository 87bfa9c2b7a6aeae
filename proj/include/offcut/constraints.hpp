#pragma once

// Linear design constraints C X = s and the greedy sparse correction that
// restores them after an edit u while freezing every edited variable.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offcut/design.hpp"
#include "offcut/tolerances.hpp"

namespace offcut {

enum class ConstraintKind : std::uint8_t {
  EqualLength,
  SumOfLengths,
  FixedLength,
  EqualPosition,
  Symmetry,
  Ground,
  FitVolume,
  Dynamic,
};

const char* to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& name);

struct Term {
  std::size_t var = 0;
  double coef = 0.0;

  friend bool operator==(const Term&, const Term&) = default;
};

/// One linear row sum(coef * X[var]) = target.
struct ConstraintRow {
  ConstraintKind kind = ConstraintKind::EqualLength;
  std::vector<Term> terms;
  double target = 0.0;
  bool dynamic = false;

  double evaluate(std::span<const double> p) const;
  friend bool operator==(const ConstraintRow&, const ConstraintRow&) = default;
};

class ConstraintSystem {
 public:
  ConstraintSystem() = default;
  /// Variable kinds and min-length bounds come from the evaluator.
  explicit ConstraintSystem(const DesignEvaluator& evaluator);
  ConstraintSystem(std::vector<VarKind> kinds, std::vector<double> min_lengths);

  std::size_t var_count() const { return kinds_.size(); }
  std::size_t row_count() const { return rows_.size(); }
  const std::vector<ConstraintRow>& rows() const { return rows_; }
  const ConstraintRow& row(std::size_t i) const { return rows_[i]; }
  VarKind kind(std::size_t var) const { return kinds_[var]; }
  double min_length(std::size_t var) const { return mins_[var]; }

  /// Appends a row; throws if a term references an invalid variable.
  void add(ConstraintRow row);
  void add(const std::vector<ConstraintRow>& rows);
  /// True when an identical row (terms and target) is already present.
  bool contains(const ConstraintRow& row) const;
  void remove_dynamic();
  std::size_t dynamic_count() const;

  Eigen::MatrixXd matrix() const;
  Eigen::VectorXd targets() const;

  friend bool operator==(const ConstraintSystem&, const ConstraintSystem&) = default;

 private:
  std::vector<ConstraintRow> rows_;
  std::vector<VarKind> kinds_;
  std::vector<double> mins_;
};

/// Row builders; every kind compiles to plain linear rows.
namespace rows {
ConstraintRow equal_length(std::size_t a, std::size_t b);
ConstraintRow fixed(std::size_t var, double value, ConstraintKind kind = ConstraintKind::FixedLength);
ConstraintRow equal_position(std::size_t a, std::size_t b, double offset = 0.0);
/// sum(lhs) - sum(rhs) = offset
ConstraintRow sum_of_lengths(const std::vector<std::size_t>& lhs, const std::vector<std::size_t>& rhs,
                             double offset = 0.0);
/// Row fixing an affine form to `value`.
ConstraintRow affine(const AffineForm& form, double value, ConstraintKind kind);
/// Mirror planks a and b across the plane `axis = mid`: equal lengths,
/// mirrored coordinate along `axis`, equal coordinates along the others.
std::vector<ConstraintRow> symmetry(std::size_t plank_a, std::size_t plank_b, int axis, double mid);
/// Bottom face of a plank at z = 0 for a ConstrainedPlankDesign plank.
ConstraintRow ground(const DesignEvaluator& evaluator, std::size_t plank);
}  // namespace rows

/// r = C p - s
Eigen::VectorXd residual(const ConstraintSystem& system, std::span<const double> p);

/// Greedy selection score of variable `var` given residual r.
/// 0 for positions, -|m| for lengths, -inf when the predicted move m would
/// take the length below its min bound.
double score_variable(const ConstraintSystem& system, std::size_t var, const Eigen::VectorXd& r,
                      double current_value);

/// Correction supported on `active` solving the restricted system in the
/// least-squares / least-norm sense.
Eigen::VectorXd solve_partial_correction(const std::vector<std::size_t>& active,
                                         const ConstraintSystem& system, std::span<const double> p);

enum class CorrectionStatus : std::uint8_t { Solved, Failed };

struct CorrectionResult {
  Eigen::VectorXd d;
  std::vector<std::size_t> active_set;
  double residual = 0.0;
  CorrectionStatus status = CorrectionStatus::Solved;

  bool solved() const { return status == CorrectionStatus::Solved; }
};

/// Sparse correction d with C(X+u+d) = s and d_i = 0 wherever u_i != 0.
/// `seed` pre-populates the active set (variables of newly added parts).
CorrectionResult correct_for_design_constraint(const ConstraintSystem& system, std::span<const double> x,
                                               std::span<const double> u,
                                               const std::vector<std::size_t>& seed = {});

}  // namespace offcut
