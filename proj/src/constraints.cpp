#include "offcut/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "offcut/error.hpp"

namespace offcut {

namespace {

constexpr struct {
  ConstraintKind kind;
  const char* name;
} kKindNames[] = {
    {ConstraintKind::EqualLength, "equal-length"},   {ConstraintKind::SumOfLengths, "sum-of-lengths"},
    {ConstraintKind::FixedLength, "fixed-length"},   {ConstraintKind::EqualPosition, "equal-position"},
    {ConstraintKind::Symmetry, "symmetry"},          {ConstraintKind::Ground, "ground"},
    {ConstraintKind::FitVolume, "fit-volume"},       {ConstraintKind::Dynamic, "dynamic"},
};

}  // namespace

const char* to_string(ConstraintKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ConstraintKind constraint_kind_from_string(const std::string& name) {
  for (const auto& k : kKindNames) {
    if (name == k.name) return k.kind;
  }
  throw Error("unknown constraint kind '" + name + "'");
}

double ConstraintRow::evaluate(std::span<const double> p) const {
  double v = 0.0;
  for (const Term& t : terms) v += t.coef * p[t.var];
  return v;
}

ConstraintSystem::ConstraintSystem(const DesignEvaluator& evaluator) {
  for (std::size_t i = 0; i < evaluator.parameter_count(); ++i) {
    kinds_.push_back(evaluator.kind(i));
    mins_.push_back(evaluator.min_value(i));
  }
}

ConstraintSystem::ConstraintSystem(std::vector<VarKind> kinds, std::vector<double> min_lengths)
    : kinds_(std::move(kinds)), mins_(std::move(min_lengths)) {
  if (mins_.size() != kinds_.size()) throw Error("min-length vector does not match variable count");
}

void ConstraintSystem::add(ConstraintRow row) {
  for (const Term& t : row.terms) {
    if (t.var >= kinds_.size()) throw Error("constraint references variable out of range");
  }
  rows_.push_back(std::move(row));
}

void ConstraintSystem::add(const std::vector<ConstraintRow>& rows) {
  for (const auto& r : rows) add(r);
}

bool ConstraintSystem::contains(const ConstraintRow& row) const {
  return std::any_of(rows_.begin(), rows_.end(), [&](const ConstraintRow& r) {
    return r.terms == row.terms && r.target == row.target;
  });
}

void ConstraintSystem::remove_dynamic() {
  std::erase_if(rows_, [](const ConstraintRow& r) { return r.dynamic; });
}

std::size_t ConstraintSystem::dynamic_count() const {
  return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [](const auto& r) { return r.dynamic; }));
}

Eigen::MatrixXd ConstraintSystem::matrix() const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_.size()),
                                            static_cast<Eigen::Index>(kinds_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (const Term& t : rows_[i].terms) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.var)) += t.coef;
  }
  return c;
}

Eigen::VectorXd ConstraintSystem::targets() const {
  Eigen::VectorXd s(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) s[static_cast<Eigen::Index>(i)] = rows_[i].target;
  return s;
}

namespace rows {

ConstraintRow equal_length(std::size_t a, std::size_t b) {
  return {ConstraintKind::EqualLength, {{a, 1.0}, {b, -1.0}}, 0.0};
}

ConstraintRow fixed(std::size_t var, double value, ConstraintKind kind) {
  return {kind, {{var, 1.0}}, value};
}

ConstraintRow equal_position(std::size_t a, std::size_t b, double offset) {
  return {ConstraintKind::EqualPosition, {{a, 1.0}, {b, -1.0}}, offset};
}

ConstraintRow sum_of_lengths(const std::vector<std::size_t>& lhs, const std::vector<std::size_t>& rhs,
                             double offset) {
  ConstraintRow row{ConstraintKind::SumOfLengths, {}, offset};
  for (std::size_t v : lhs) row.terms.push_back({v, 1.0});
  for (std::size_t v : rhs) row.terms.push_back({v, -1.0});
  return row;
}

ConstraintRow affine(const AffineForm& form, double value, ConstraintKind kind) {
  ConstraintRow row{kind, {}, value - form.constant};
  for (const auto& [var, coef] : form.terms) {
    if (coef != 0.0) row.terms.push_back({var, coef});
  }
  std::sort(row.terms.begin(), row.terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  return row;
}

std::vector<ConstraintRow> symmetry(std::size_t plank_a, std::size_t plank_b, int axis, double mid) {
  using D = ConstrainedPlankDesign;
  std::vector<ConstraintRow> out;
  for (Attr len : {Attr::LX, Attr::LY}) {
    ConstraintRow r = equal_length(D::index(plank_a, len), D::index(plank_b, len));
    r.kind = ConstraintKind::Symmetry;
    out.push_back(r);
  }
  const Attr centers[] = {Attr::CX, Attr::CY, Attr::CZ};
  for (int k = 0; k < 3; ++k) {
    const std::size_t a = D::index(plank_a, centers[k]);
    const std::size_t b = D::index(plank_b, centers[k]);
    if (k == axis) {
      out.push_back({ConstraintKind::Symmetry, {{a, 1.0}, {b, 1.0}}, 2.0 * mid});
    } else {
      out.push_back({ConstraintKind::Symmetry, {{a, 1.0}, {b, -1.0}}, 0.0});
    }
  }
  return out;
}

ConstraintRow ground(const DesignEvaluator& evaluator, std::size_t plank) {
  AffineForm bottom = evaluator.attribute(plank, Attr::CZ);
  std::vector<Part> probe = evaluator.evaluate(evaluator.initial());
  const Part& part = probe[plank];
  const auto [ax, ay] = in_plane_axes(part.normal);
  if (ax == 2) {
    bottom.add(evaluator.attribute(plank, Attr::LX), -0.5);
  } else if (ay == 2) {
    bottom.add(evaluator.attribute(plank, Attr::LY), -0.5);
  } else {
    bottom.constant -= 0.5 * evaluator.thickness();
  }
  return affine(bottom, 0.0, ConstraintKind::Ground);
}

}  // namespace rows

Eigen::VectorXd residual(const ConstraintSystem& system, std::span<const double> p) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(system.row_count()));
  for (std::size_t i = 0; i < system.row_count(); ++i) {
    const ConstraintRow& row = system.row(i);
    r[static_cast<Eigen::Index>(i)] = row.evaluate(p) - row.target;
  }
  return r;
}

double score_variable(const ConstraintSystem& system, std::size_t var, const Eigen::VectorXd& r,
                      double current_value) {
  double cr = 0.0;
  double cc = 0.0;
  for (std::size_t i = 0; i < system.row_count(); ++i) {
    for (const Term& t : system.row(i).terms) {
      if (t.var != var) continue;
      cr += t.coef * r[static_cast<Eigen::Index>(i)];
      cc += t.coef * t.coef;
    }
  }
  if (system.kind(var) != VarKind::Length) return 0.0;
  if (cc == 0.0) return 0.0;
  const double m = -cr / cc;
  if (current_value + m < system.min_length(var)) return -std::numeric_limits<double>::infinity();
  return -std::abs(m);
}

Eigen::VectorXd solve_partial_correction(const std::vector<std::size_t>& active,
                                         const ConstraintSystem& system, std::span<const double> p) {
  const auto n = static_cast<Eigen::Index>(system.var_count());
  const auto m = static_cast<Eigen::Index>(system.row_count());
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (active.empty() || m == 0) return d;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(active.size()));
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const ConstraintRow& row = system.row(static_cast<std::size_t>(i));
    b[i] = row.target - row.evaluate(p);
    for (const Term& t : row.terms) {
      auto it = std::find(active.begin(), active.end(), t.var);
      if (it != active.end()) a(i, it - active.begin()) += t.coef;
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(kRankTolerance);
  cod.compute(a);
  const Eigen::VectorXd sol = cod.solve(b);
  for (std::size_t k = 0; k < active.size(); ++k) d[static_cast<Eigen::Index>(active[k])] = sol[static_cast<Eigen::Index>(k)];
  return d;
}

CorrectionResult correct_for_design_constraint(const ConstraintSystem& system, std::span<const double> x,
                                               std::span<const double> u,
                                               const std::vector<std::size_t>& seed) {
  const std::size_t n = system.var_count();
  if (x.size() != n || u.size() != n) throw Error("correction: dimension mismatch");

  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + u[i];

  CorrectionResult best;
  best.d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  std::vector<std::size_t> active;
  for (std::size_t v : seed) {
    if (v < n && u[v] == 0.0 && std::find(active.begin(), active.end(), v) == active.end()) active.push_back(v);
  }
  Eigen::VectorXd d = solve_partial_correction(active, system, p);

  auto residual_at = [&](const Eigen::VectorXd& dd) {
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = p[i] + dd[static_cast<Eigen::Index>(i)];
    return residual(system, q);
  };

  Eigen::VectorXd r = residual_at(d);
  best.d = d;
  best.active_set = active;
  best.residual = r.norm();

  const double row_tol =
      kResidualTolerance / (2.0 * std::sqrt(static_cast<double>(std::max<std::size_t>(1, system.row_count()))));

  while (true) {
    const double norm = r.norm();
    if (norm < best.residual) {
      best.d = d;
      best.active_set = active;
      best.residual = norm;
    }
    if (norm < kResidualTolerance) {
      best.d = d;
      best.active_set = active;
      best.residual = norm;
      best.status = CorrectionStatus::Solved;
      return best;
    }

    std::set<std::size_t> candidates;
    for (std::size_t i = 0; i < system.row_count(); ++i) {
      if (std::abs(r[static_cast<Eigen::Index>(i)]) <= row_tol) continue;
      for (const Term& t : system.row(i).terms) {
        if (t.coef == 0.0 || u[t.var] != 0.0) continue;
        if (std::find(active.begin(), active.end(), t.var) != active.end()) continue;
        candidates.insert(t.var);
      }
    }
    if (candidates.empty()) {
      best.status = CorrectionStatus::Failed;
      return best;
    }

    std::size_t chosen = *candidates.begin();
    double chosen_score = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (std::size_t v : candidates) {
      const double s = score_variable(system, v, r, p[v] + d[static_cast<Eigen::Index>(v)]);
      if (first || s > chosen_score) {
        chosen = v;
        chosen_score = s;
        first = false;
      }
    }
    active.push_back(chosen);
    d = solve_partial_correction(active, system, p);
    r = residual_at(d);
  }
}

}  // namespace offcut
