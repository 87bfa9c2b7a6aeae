#pragma once

// Parameterized designs: a configuration vector X evaluates to a fixed set of
// extruded planar parts. Both bundled evaluators are affine in X, which lets
// the constraint and effectiveness code express part attributes as linear
// forms over X.

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "offcut/geometry.hpp"

namespace offcut {

/// Material-space orientation, o in {0, pi/2, pi, -pi/2}.
enum class Orientation : std::uint8_t { R0 = 0, R90 = 1, R180 = 2, R270 = 3 };

inline constexpr std::array<Orientation, 4> kOrientations = {Orientation::R0, Orientation::R90,
                                                             Orientation::R180, Orientation::R270};

/// 0, 90, 180 or -90.
int degrees(Orientation o);
Orientation orientation_from_degrees(int deg);
double radians(Orientation o);

/// True for o in {pi/2, -pi/2}: the part's local x runs along material v.
inline bool swaps_axes(Orientation o) { return o == Orientation::R90 || o == Orientation::R270; }

enum class VarKind : std::uint8_t { Position, Length };

/// Configuration vector X with a label per entry.
struct DesignParams {
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  friend bool operator==(const DesignParams&, const DesignParams&) = default;
};

/// World axis along a plank's thickness.
enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

/// World axes carried by a plank's local x and y directions.
std::pair<int, int> in_plane_axes(Axis normal);

struct Pose {
  double u = 0.0;
  double v = 0.0;
  Orientation o = Orientation::R0;
};

/// Extruded planar part. The contour lives in local coordinates inside
/// [0,lx] x [0,ly]; the plank box is centered on `center`.
struct Part {
  int id = 0;
  std::string name;
  Polygon contour;
  Vec3 center;
  double lx = 0.0;
  double ly = 0.0;
  double thickness = 0.0;
  Axis normal = Axis::Z;
  Pose pose;
  bool rectangular = true;
};

Box3 world_box(const Part& part);

/// Maps a local contour point to world coordinates on the plank mid-plane.
Vec3 local_to_world(const Part& part, Vec2 local, double depth = 0.0);

/// (w, h) of the part in material space for orientation o.
std::pair<double, double> material_extents(double lx, double ly, Orientation o);
inline std::pair<double, double> material_extents(const Part& part) {
  return material_extents(part.lx, part.ly, part.pose.o);
}

/// Sparse affine form constant + sum(coef * X[var]).
struct AffineForm {
  double constant = 0.0;
  std::vector<std::pair<std::size_t, double>> terms;

  double operator()(const std::vector<double>& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x[i];
    return v;
  }
  AffineForm& add(const AffineForm& other, double scale = 1.0);
};

enum class Attr : std::uint8_t { CX, CY, CZ, LX, LY };

/// D(X): fixed-topology evaluator from configuration vectors to parts.
class DesignEvaluator {
 public:
  virtual ~DesignEvaluator() = default;

  virtual std::unique_ptr<DesignEvaluator> clone() const = 0;
  virtual std::vector<Part> evaluate(const DesignParams& x) const = 0;

  virtual std::size_t parameter_count() const = 0;
  virtual std::size_t part_count() const = 0;
  virtual DesignParams initial() const = 0;
  virtual VarKind kind(std::size_t index) const = 0;
  virtual double min_value(std::size_t index) const = 0;

  /// Linear form of a part attribute (center coordinate or length) over X.
  virtual AffineForm attribute(std::size_t part, Attr a) const = 0;

  double thickness() const { return thickness_; }

 protected:
  double thickness_ = 3.0;
};

/// Static description of one part shared by the affine evaluators.
struct PartTemplate {
  int id = 0;
  std::string name;
  Axis normal = Axis::Z;
  /// Contour in normalized [0,1]^2 coordinates, scaled by (lx, ly). Empty
  /// means the full rectangle.
  Polygon unit_contour;
};

/// Shared implementation for evaluators whose part attributes are affine in X.
class AffinePartDesign : public DesignEvaluator {
 public:
  std::vector<Part> evaluate(const DesignParams& x) const override;

  std::size_t parameter_count() const override { return names_.size(); }
  std::size_t part_count() const override { return parts_.size(); }
  DesignParams initial() const override { return {initial_, names_}; }
  VarKind kind(std::size_t index) const override { return kinds_[index]; }
  double min_value(std::size_t index) const override { return mins_[index]; }
  AffineForm attribute(std::size_t part, Attr a) const override {
    return forms_[part][static_cast<std::size_t>(a)];
  }

  const std::vector<PartTemplate>& part_templates() const { return parts_; }
  const std::vector<std::string>& names() const { return names_; }

 protected:
  std::vector<PartTemplate> parts_;
  std::vector<std::array<AffineForm, 5>> forms_;
  std::vector<std::string> names_;
  std::vector<VarKind> kinds_;
  std::vector<double> mins_;
  std::vector<double> initial_;
};

/// Plank specification used to build a ConstrainedPlankDesign.
struct PlankSpec {
  PartTemplate shape;
  Vec3 center;
  double lx = 0.0;
  double ly = 0.0;
  double min_lx = 1.0;
  double min_ly = 1.0;
};

/// X holds every plank's center and in-plane lengths, five entries per plank
/// labelled "p<id>.cx|cy|cz|lx|ly". Design intent lives in a separate
/// ConstraintSystem.
class ConstrainedPlankDesign final : public AffinePartDesign {
 public:
  ConstrainedPlankDesign(std::vector<PlankSpec> planks, double thickness);

  std::unique_ptr<DesignEvaluator> clone() const override {
    return std::make_unique<ConstrainedPlankDesign>(*this);
  }

  static constexpr std::size_t kVarsPerPlank = 5;
  static std::size_t index(std::size_t plank, Attr a) {
    return plank * kVarsPerPlank + static_cast<std::size_t>(a);
  }
};

struct ParameterSpec {
  std::string name;
  double value = 0.0;
  VarKind kind = VarKind::Length;
  double min = -std::numeric_limits<double>::infinity();
};

/// Named affine expression constant + sum(coef * parameter).
struct ExpressionSpec {
  std::string name;
  double constant = 0.0;
  std::vector<std::pair<std::string, double>> terms;
};

/// Part whose five attributes reference expressions (or parameters) by name.
struct ParametricPartSpec {
  PartTemplate shape;
  std::array<std::string, 5> attributes;  // cx, cy, cz, lx, ly
};

/// A handful of named parameters mapped to parts by affine expressions.
class ParametricDesign final : public AffinePartDesign {
 public:
  ParametricDesign(std::vector<ParameterSpec> parameters, std::vector<ExpressionSpec> expressions,
                   std::vector<ParametricPartSpec> parts, double thickness);

  std::unique_ptr<DesignEvaluator> clone() const override {
    return std::make_unique<ParametricDesign>(*this);
  }
};

/// Index of the entry labelled `name`, or npos.
std::size_t find_param(const DesignParams& x, const std::string& name);

}  // namespace offcut
