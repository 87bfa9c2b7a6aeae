#pragma once

// Design effectiveness E(X): no plank sags, inner volumes stay clear and the
// design fits its volume. Enforced along an edit by bisection and temporary
// equality rows.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "offcut/constraints.hpp"
#include "offcut/design.hpp"
#include "offcut/fem.hpp"

namespace offcut {

/// Clear box of height `height` above the top face of `support`, spanning
/// its footprint.
struct InnerVolume {
  int support = 0;  // part id
  double height = 0.0;
};

/// Force in N on part `part` (id), along `direction`.
struct LoadSpec {
  int part = 0;
  double force = 0.0;
  Vec3 direction{0.0, 0.0, -1.0};
};

struct EffectivenessSpec {
  std::vector<InnerVolume> inner_volumes;
  std::optional<Box3> fit_volume;
  /// Sag is checked only when present; gravity always applies then.
  std::optional<std::vector<LoadSpec>> loads;
  Material material;
  double element_size = kDefaultElementSize;

  bool checks_sag() const { return loads.has_value(); }
  bool empty() const { return inner_volumes.empty() && !fit_volume && !loads; }
};

enum class ViolationKind : std::uint8_t { Sag, InnerVolume, FitVolume };

const char* to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::Sag;
  std::vector<int> parts;  // ids; for inner volumes {colliding, support}
  double magnitude = 0.0;  // mm, infinite when the FEM solve failed
  int axis = 0;   // sag: local span axis (0 = x, 1 = y); fit volume: world axis
  int side = 0;   // fit volume: -1 below min, +1 above max
  double height = 0.0;  // inner volume H
};

struct EffectivenessVerdict {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

/// Throws std::invalid_argument when an inner volume or load names an unknown part.
void validate(const EffectivenessSpec& spec, const std::vector<Part>& parts);

EffectivenessVerdict check_effectiveness(std::span<const double> x, const DesignEvaluator& evaluator,
                                         const EffectivenessSpec& spec);

inline constexpr double kSagMargin = 0.02;
inline constexpr double kAlphaTolerance = 1e-3;
inline constexpr int kMaxEffectivenessDepth = 16;

/// Affine form of the face of part `part` (index) on world axis `axis`,
/// side -1 (min) or +1 (max).
AffineForm face_form(const DesignEvaluator& evaluator, const Part& part, std::size_t index, int axis,
                     int side);

/// Copy of `system` with one dynamic row per violation in `verdict` that has
/// an applicable rule and is not already present.
ConstraintSystem add_dynamic_constraints(std::span<const double> x_before, std::span<const double> x_after,
                                         const ConstraintSystem& system, const EffectivenessVerdict& verdict,
                                         const DesignEvaluator& evaluator);

struct Bracket {
  double l = 0.0;
  double r = 1.0;
};

struct EffectivenessResult {
  CorrectionResult correction;  // X + u + correction.d == point
  DesignParams point;
  double alpha = 1.0;           // fraction of u reached
  std::vector<Bracket> brackets;
  std::vector<ConstraintRow> dynamic_rows;  // inserted during the call, already discarded
  EffectivenessVerdict verdict;             // at `point`

  bool solved() const { return correction.solved(); }
};

struct EffectivenessOptions {
  double alpha_tolerance = kAlphaTolerance;
  int max_depth = kMaxEffectivenessDepth;
  std::vector<std::size_t> seed;  // active-set seed for the design-constraint correction
};

/// Bisection along u for the first effectiveness violation, dynamic row
/// insertion and recursion. `system` itself is never modified. A Failed
/// result carries the last effective corrected point.
EffectivenessResult dynamic_effectiveness_constraints(const DesignEvaluator& evaluator,
                                                      const ConstraintSystem& system,
                                                      const EffectivenessSpec& spec, const DesignParams& x,
                                                      std::span<const double> u, double alpha_start = 0.0,
                                                      const EffectivenessOptions& options = {});

}  // namespace offcut
