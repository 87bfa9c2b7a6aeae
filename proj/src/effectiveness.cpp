#include "offcut/effectiveness.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "offcut/error.hpp"

namespace offcut {
namespace {

constexpr double kContactTolerance = 1e-6;  // mm

std::size_t index_of(const std::vector<Part>& parts, int id) {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].id == id) return i;
  }
  return parts.size();
}

bool overlaps_open(double a0, double a1, double b0, double b1) {
  return std::min(a1, b1) - std::max(a0, b0) > kContactTolerance;
}

void check_inner_volume(const InnerVolume& iv, const std::vector<Part>& parts, EffectivenessVerdict& out) {
  const std::size_t s = index_of(parts, iv.support);
  const Box3 support = world_box(parts[s]);
  const double floor = support.max.z;
  const double ceiling = floor + iv.height;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    if (q == s) continue;
    const Box3 b = world_box(parts[q]);
    if (!overlaps_open(b.min.x, b.max.x, support.min.x, support.max.x)) continue;
    if (!overlaps_open(b.min.y, b.max.y, support.min.y, support.max.y)) continue;
    if (!overlaps_open(b.min.z, b.max.z, floor, ceiling)) continue;
    Violation v;
    v.kind = ViolationKind::InnerVolume;
    v.parts = {parts[q].id, iv.support};
    v.magnitude = ceiling - b.min.z;
    v.height = iv.height;
    out.violations.push_back(std::move(v));
  }
}

void check_fit_volume(const Box3& fit, const std::vector<Part>& parts, EffectivenessVerdict& out) {
  for (const Part& part : parts) {
    const Box3 b = world_box(part);
    for (int a = 0; a < 3; ++a) {
      const double below = fit.min[a] - b.min[a];
      const double above = b.max[a] - fit.max[a];
      for (auto [excess, side] : {std::pair{below, -1}, std::pair{above, 1}}) {
        if (excess <= kContactTolerance) continue;
        Violation v;
        v.kind = ViolationKind::FitVolume;
        v.parts = {part.id};
        v.magnitude = excess;
        v.axis = a;
        v.side = side;
        out.violations.push_back(std::move(v));
      }
    }
  }
}

void check_sag(const EffectivenessSpec& spec, const std::vector<Part>& parts, EffectivenessVerdict& out) {
  FemOptions fem;
  fem.material = spec.material;
  fem.element_size = spec.element_size;
  for (const LoadSpec& load : *spec.loads) {
    const double n = load.direction.norm();
    const Vec3 dir = n > 0.0 ? (1.0 / n) * load.direction : Vec3{0.0, 0.0, -1.0};
    fem.loads.push_back({static_cast<int>(index_of(parts, load.part)), load.force * dir});
  }
  SagReport report;
  try {
    report = analyze_sag(parts, fem);
  } catch (const Error&) {
    Violation v;
    v.kind = ViolationKind::Sag;
    v.magnitude = std::numeric_limits<double>::infinity();
    out.violations.push_back(std::move(v));
    return;
  }
  for (const PlankSag& sag : report.planks) {
    if (!sag.sagging) continue;
    Violation v;
    v.kind = ViolationKind::Sag;
    v.parts = {parts[static_cast<std::size_t>(sag.part)].id};
    v.magnitude = sag.max_deflection;
    v.axis = sag.span;
    out.violations.push_back(std::move(v));
  }
}

DesignParams with_values(const DesignParams& x, std::vector<double> values) {
  return {std::move(values), x.names};
}

}  // namespace

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Sag: return "sag";
    case ViolationKind::InnerVolume: return "inner-volume";
    case ViolationKind::FitVolume: return "fit-volume";
  }
  return "?";
}

void validate(const EffectivenessSpec& spec, const std::vector<Part>& parts) {
  for (const InnerVolume& iv : spec.inner_volumes) {
    if (index_of(parts, iv.support) == parts.size()) {
      throw std::invalid_argument("inner volume references unknown part " + std::to_string(iv.support));
    }
    if (!(iv.height > 0.0)) throw std::invalid_argument("inner volume height must be positive");
  }
  if (spec.loads) {
    for (const LoadSpec& load : *spec.loads) {
      if (index_of(parts, load.part) == parts.size()) {
        throw std::invalid_argument("load references unknown part " + std::to_string(load.part));
      }
    }
  }
}

EffectivenessVerdict check_effectiveness(std::span<const double> x, const DesignEvaluator& evaluator,
                                         const EffectivenessSpec& spec) {
  EffectivenessVerdict verdict;
  if (spec.empty()) return verdict;
  const std::vector<Part> parts = evaluator.evaluate({{x.begin(), x.end()}, {}});
  validate(spec, parts);
  for (const InnerVolume& iv : spec.inner_volumes) check_inner_volume(iv, parts, verdict);
  if (spec.fit_volume) check_fit_volume(*spec.fit_volume, parts, verdict);
  if (spec.checks_sag()) check_sag(spec, parts, verdict);
  return verdict;
}

AffineForm face_form(const DesignEvaluator& evaluator, const Part& part, std::size_t index, int axis,
                     int side) {
  AffineForm form = evaluator.attribute(index, static_cast<Attr>(axis));
  const auto [ax, ay] = in_plane_axes(part.normal);
  const double s = 0.5 * side;
  if (axis == ax) {
    form.add(evaluator.attribute(index, Attr::LX), s);
  } else if (axis == ay) {
    form.add(evaluator.attribute(index, Attr::LY), s);
  } else {
    form.constant += s * part.thickness;
  }
  return form;
}

ConstraintSystem add_dynamic_constraints(std::span<const double> x_before, std::span<const double> x_after,
                                         const ConstraintSystem& system, const EffectivenessVerdict& verdict,
                                         const DesignEvaluator& evaluator) {
  ConstraintSystem out = system;
  const std::vector<double> before(x_before.begin(), x_before.end());
  const std::vector<Part> parts = evaluator.evaluate({before, {}});
  const std::vector<Part> after = evaluator.evaluate({{x_after.begin(), x_after.end()}, {}});
  auto insert = [&](const AffineForm& form, double value) {
    ConstraintRow row = rows::affine(form, value, ConstraintKind::Dynamic);
    row.dynamic = true;
    if (row.terms.empty() || out.contains(row)) return;
    out.add(std::move(row));
  };
  for (const Violation& v : verdict.violations) {
    if (v.parts.empty()) continue;
    const std::size_t p = index_of(parts, v.parts[0]);
    if (p == parts.size()) continue;
    switch (v.kind) {
      case ViolationKind::Sag: {
        const AffineForm len = evaluator.attribute(p, v.axis == 0 ? Attr::LX : Attr::LY);
        insert(len, len(before) * (1.0 - kSagMargin));
        break;
      }
      case ViolationKind::InnerVolume: {
        if (v.parts.size() < 2) break;
        const std::size_t s = index_of(parts, v.parts[1]);
        if (s == parts.size()) break;
        AffineForm gap = face_form(evaluator, after[p], p, 2, -1);
        gap.add(face_form(evaluator, after[s], s, 2, 1), -1.0);
        insert(gap, v.height);
        break;
      }
      case ViolationKind::FitVolume: {
        const AffineForm face = face_form(evaluator, parts[p], p, v.axis, v.side);
        insert(face, face(before));
        break;
      }
    }
  }
  return out;
}

EffectivenessResult dynamic_effectiveness_constraints(const DesignEvaluator& evaluator,
                                                      const ConstraintSystem& system,
                                                      const EffectivenessSpec& spec, const DesignParams& x,
                                                      std::span<const double> u, double alpha_start,
                                                      const EffectivenessOptions& options) {
  const std::size_t n = x.size();
  if (u.size() != n) throw std::invalid_argument("change vector size mismatch");
  ConstraintSystem work = system;

  struct Probe {
    CorrectionResult correction;
    std::vector<double> point;
    EffectivenessVerdict verdict;
    bool ok = false;
  };
  auto probe = [&](double a) {
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = a * u[i];
    Probe p;
    p.correction = correct_for_design_constraint(work, x.values, m, options.seed);
    p.point.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.point[i] = x[i] + m[i] + p.correction.d[i];
    p.verdict = check_effectiveness(p.point, evaluator, spec);
    p.ok = p.correction.solved() && p.verdict.ok();
    return p;
  };

  EffectivenessResult result;
  auto finish = [&](Probe& p, double alpha, CorrectionStatus status) {
    result.correction = std::move(p.correction);
    result.correction.status = status;
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d[static_cast<Eigen::Index>(i)] = p.point[i] - x[i] - u[i];
    result.correction.d = d;
    result.point = with_values(x, std::move(p.point));
    result.alpha = alpha;
    result.verdict = std::move(p.verdict);
    return result;
  };

  double alpha = alpha_start;
  Probe good = probe(alpha);
  for (int depth = 0; depth < options.max_depth; ++depth) {
    Probe full = probe(1.0);
    if (full.ok) return finish(full, 1.0, CorrectionStatus::Solved);
    double l = alpha, r = 1.0;
    Probe bad = std::move(full);
    while (r - l > options.alpha_tolerance) {
      const double m = 0.5 * (l + r);
      Probe pm = probe(m);
      if (pm.ok) {
        l = m;
        good = std::move(pm);
      } else {
        r = m;
        bad = std::move(pm);
      }
    }
    result.brackets.push_back({l, r});
    ConstraintSystem next = add_dynamic_constraints(good.point, bad.point, work, bad.verdict, evaluator);
    if (next.row_count() == work.row_count()) return finish(good, l, CorrectionStatus::Failed);
    for (std::size_t i = work.row_count(); i < next.row_count(); ++i) result.dynamic_rows.push_back(next.row(i));
    work = std::move(next);
    alpha = l;
  }
  return finish(good, alpha, CorrectionStatus::Failed);
}

}  // namespace offcut
