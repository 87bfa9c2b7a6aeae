#include "offcut/design.hpp"

#include <map>
#include <numbers>

#include "offcut/error.hpp"

namespace offcut {

int degrees(Orientation o) {
  switch (o) {
    case Orientation::R0: return 0;
    case Orientation::R90: return 90;
    case Orientation::R180: return 180;
    case Orientation::R270: return -90;
  }
  return 0;
}

Orientation orientation_from_degrees(int deg) {
  switch (((deg % 360) + 360) % 360) {
    case 0: return Orientation::R0;
    case 90: return Orientation::R90;
    case 180: return Orientation::R180;
    case 270: return Orientation::R270;
    default: throw Error("orientation must be a multiple of 90 degrees");
  }
}

double radians(Orientation o) { return degrees(o) * std::numbers::pi / 180.0; }

std::pair<int, int> in_plane_axes(Axis normal) {
  switch (normal) {
    case Axis::X: return {1, 2};
    case Axis::Y: return {0, 2};
    case Axis::Z: return {0, 1};
  }
  return {0, 1};
}

Box3 world_box(const Part& part) {
  const auto [ax, ay] = in_plane_axes(part.normal);
  const int an = static_cast<int>(part.normal);
  Vec3 half;
  half[ax] = 0.5 * part.lx;
  half[ay] = 0.5 * part.ly;
  half[an] = 0.5 * part.thickness;
  return {part.center - half, part.center + half};
}

Vec3 local_to_world(const Part& part, Vec2 local, double depth) {
  const auto [ax, ay] = in_plane_axes(part.normal);
  Vec3 p = part.center;
  p[ax] += local.x - 0.5 * part.lx;
  p[ay] += local.y - 0.5 * part.ly;
  p[static_cast<int>(part.normal)] += depth;
  return p;
}

std::pair<double, double> material_extents(double lx, double ly, Orientation o) {
  if (swaps_axes(o)) return {ly, lx};
  return {lx, ly};
}

AffineForm& AffineForm::add(const AffineForm& other, double scale) {
  constant += scale * other.constant;
  for (const auto& [i, c] : other.terms) {
    auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return t.first == i; });
    if (it == terms.end()) {
      terms.emplace_back(i, scale * c);
    } else {
      it->second += scale * c;
    }
  }
  return *this;
}

std::vector<Part> AffinePartDesign::evaluate(const DesignParams& x) const {
  if (x.size() != names_.size()) throw Error("parameter vector has the wrong length");
  std::vector<Part> out;
  out.reserve(parts_.size());
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const PartTemplate& t = parts_[i];
    const auto& f = forms_[i];
    Part p;
    p.id = t.id;
    p.name = t.name;
    p.normal = t.normal;
    p.thickness = thickness_;
    p.center = {f[0](x.values), f[1](x.values), f[2](x.values)};
    p.lx = f[3](x.values);
    p.ly = f[4](x.values);
    if (!(p.lx > 0.0) || !(p.ly > 0.0)) {
      throw Error("part '" + t.name + "' has a non-positive length");
    }
    if (t.unit_contour.empty()) {
      p.contour = {{0.0, 0.0}, {p.lx, 0.0}, {p.lx, p.ly}, {0.0, p.ly}};
    } else {
      p.rectangular = false;
      p.contour.reserve(t.unit_contour.size());
      for (const Vec2& q : t.unit_contour) p.contour.push_back({q.x * p.lx, q.y * p.ly});
    }
    out.push_back(std::move(p));
  }
  return out;
}

ConstrainedPlankDesign::ConstrainedPlankDesign(std::vector<PlankSpec> planks, double thickness) {
  thickness_ = thickness;
  static constexpr const char* kSuffix[] = {"cx", "cy", "cz", "lx", "ly"};
  for (std::size_t i = 0; i < planks.size(); ++i) {
    const PlankSpec& s = planks[i];
    parts_.push_back(s.shape);
    std::array<AffineForm, 5> f;
    const double values[] = {s.center.x, s.center.y, s.center.z, s.lx, s.ly};
    for (std::size_t k = 0; k < kVarsPerPlank; ++k) {
      f[k].terms.emplace_back(i * kVarsPerPlank + k, 1.0);
      names_.push_back("p" + std::to_string(s.shape.id) + "." + kSuffix[k]);
      kinds_.push_back(k < 3 ? VarKind::Position : VarKind::Length);
      initial_.push_back(values[k]);
    }
    mins_.insert(mins_.end(), {-std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity(),
                               -std::numeric_limits<double>::infinity(), s.min_lx, s.min_ly});
    forms_.push_back(std::move(f));
  }
}

ParametricDesign::ParametricDesign(std::vector<ParameterSpec> parameters,
                                   std::vector<ExpressionSpec> expressions,
                                   std::vector<ParametricPartSpec> parts, double thickness) {
  thickness_ = thickness;
  std::map<std::string, AffineForm> table;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const ParameterSpec& p = parameters[i];
    if (table.contains(p.name)) throw Error("duplicate parameter '" + p.name + "'");
    names_.push_back(p.name);
    kinds_.push_back(p.kind);
    mins_.push_back(p.min);
    initial_.push_back(p.value);
    AffineForm f;
    f.terms.emplace_back(i, 1.0);
    table.emplace(p.name, std::move(f));
  }
  for (const ExpressionSpec& e : expressions) {
    if (table.contains(e.name)) throw Error("duplicate expression '" + e.name + "'");
    AffineForm f;
    f.constant = e.constant;
    for (const auto& [name, coef] : e.terms) {
      auto it = table.find(name);
      if (it == table.end()) throw Error("expression '" + e.name + "' references unknown '" + name + "'");
      f.add(it->second, coef);
    }
    table.emplace(e.name, std::move(f));
  }
  for (const ParametricPartSpec& p : parts) {
    parts_.push_back(p.shape);
    std::array<AffineForm, 5> f;
    for (std::size_t k = 0; k < 5; ++k) {
      auto it = table.find(p.attributes[k]);
      if (it == table.end()) {
        throw Error("part '" + p.shape.name + "' references unknown '" + p.attributes[k] + "'");
      }
      f[k] = it->second;
    }
    forms_.push_back(std::move(f));
  }
}

std::size_t find_param(const DesignParams& x, const std::string& name) {
  for (std::size_t i = 0; i < x.names.size(); ++i) {
    if (x.names[i] == name) return i;
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace offcut
