#include "offcut/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "offcut/error.hpp"

namespace offcut {
namespace {

constexpr double kEdgeTolerance = 1e-6;  // mm
constexpr double kGravity = 9.81e-9;       // N/mm^3 per kg/m^3

std::string format_float(double v) {
  if (!std::isfinite(v)) return "null";
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

bool is_scalar(const Json& j) { return !j.is_object() && !j.is_array(); }

void emit(const Json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        emit(value, indent + 2, out);
      }
      out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (std::all_of(j.begin(), j.end(), is_scalar)) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          emit(j[i], indent, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(j[i], indent + 2, out);
      }
      out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_float(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

// ---- strict reading -------------------------------------------------------

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void expect_object(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (!known) throw SchemaError(at(path, key), "unknown field");
  }
}

const Json& field(const Json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(at(path, key), "missing field");
  return *it;
}

const Json* optional_field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

double number(const Json& obj, const std::string& path, const char* key) {
  return number(field(obj, path, key), at(path, key));
}

double positive(const Json& obj, const std::string& path, const char* key) {
  const double v = number(obj, path, key);
  if (!(v > 0.0)) throw SchemaError(at(path, key), "must be positive");
  return v;
}

int integer(const Json& obj, const std::string& path, const char* key) {
  const Json& j = field(obj, path, key);
  if (!j.is_number_integer()) throw SchemaError(at(path, key), "expected an integer");
  return j.get<int>();
}

std::string text(const Json& obj, const std::string& path, const char* key) {
  const Json& j = field(obj, path, key);
  if (!j.is_string()) throw SchemaError(at(path, key), "expected a string");
  return j.get<std::string>();
}

const Json& array(const Json& obj, const std::string& path, const char* key) {
  const Json& j = field(obj, path, key);
  if (!j.is_array()) throw SchemaError(at(path, key), "expected an array");
  return j;
}

Vec3 vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path, "expected [x, y, z]");
  return {number(j[0], at(path, 0)), number(j[1], at(path, 1)), number(j[2], at(path, 2))};
}

const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
  }
  return "z";
}

Axis parse_axis(const Json& obj, const std::string& path) {
  const std::string s = text(obj, path, "normal");
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  if (s == "z") return Axis::Z;
  throw SchemaError(at(path, "normal"), "expected one of x, y, z");
}

Polygon parse_contour(const Json& obj, const std::string& path) {
  Polygon out;
  const Json* c = optional_field(obj, "contour");
  if (!c) return out;
  const std::string p = at(path, "contour");
  if (!c->is_array()) throw SchemaError(p, "expected an array");
  for (std::size_t i = 0; i < c->size(); ++i) {
    const Json& q = (*c)[i];
    if (!q.is_array() || q.size() != 2) throw SchemaError(at(p, i), "expected [x, y]");
    out.push_back({number(q[0], at(at(p, i), 0)), number(q[1], at(at(p, i), 1))});
  }
  if (!out.empty() && out.size() < 3) throw SchemaError(p, "needs at least three points");
  return out;
}

Json contour_json(const Polygon& c) {
  Json out = Json::array();
  for (const Vec2& q : c) out.push_back(Json::array({q.x, q.y}));
  return out;
}

Json vec3_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

PartTemplate parse_shape(const Json& obj, const std::string& path) {
  PartTemplate t;
  t.id = integer(obj, path, "id");
  t.name = text(obj, path, "name");
  t.normal = parse_axis(obj, path);
  t.unit_contour = parse_contour(obj, path);
  return t;
}

constexpr const char* kAttrKeys[] = {"cx", "cy", "cz", "lx", "ly"};

void parse_parts(const Json& root, DesignDocument& doc) {
  const Json& parts = array(root, "$", "parts");
  std::set<int> ids;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string p = at("$.parts", i);
    const Json& j = parts[i];
    if (doc.model == ModelKind::Planks) {
      expect_object(j, p, {"id", "name", "normal", "center", "lx", "ly", "min_lx", "min_ly", "contour"});
      PlankSpec s;
      s.shape = parse_shape(j, p);
      s.center = vec3(field(j, p, "center"), at(p, "center"));
      s.lx = positive(j, p, "lx");
      s.ly = positive(j, p, "ly");
      s.min_lx = number(j, p, "min_lx");
      s.min_ly = number(j, p, "min_ly");
      doc.planks.push_back(std::move(s));
    } else {
      expect_object(j, p, {"id", "name", "normal", "cx", "cy", "cz", "lx", "ly", "contour"});
      ParametricPartSpec s;
      s.shape = parse_shape(j, p);
      for (std::size_t k = 0; k < 5; ++k) s.attributes[k] = text(j, p, kAttrKeys[k]);
      doc.parametric_parts.push_back(std::move(s));
    }
    const int id = doc.model == ModelKind::Planks ? doc.planks.back().shape.id : doc.parametric_parts.back().shape.id;
    if (!ids.insert(id).second) throw SchemaError(at(p, "id"), "duplicate part id " + std::to_string(id));
  }
  if (parts.empty()) throw SchemaError("$.parts", "needs at least one part");
}

VarKind parse_var_kind(const Json& obj, const std::string& path) {
  const std::string s = text(obj, path, "kind");
  if (s == "length") return VarKind::Length;
  if (s == "position") return VarKind::Position;
  throw SchemaError(at(path, "kind"), "expected length or position");
}

void parse_parameters(const Json& root, DesignDocument& doc) {
  const Json& params = array(root, "$", "parameters");
  const Json& exprs = array(root, "$", "expressions");
  if (doc.model == ModelKind::Planks) {
    if (!params.empty()) throw SchemaError("$.parameters", "must be empty for the planks model");
    if (!exprs.empty()) throw SchemaError("$.expressions", "must be empty for the planks model");
    return;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string p = at("$.parameters", i);
    const Json& j = params[i];
    expect_object(j, p, {"name", "value", "kind", "min"});
    ParameterSpec s;
    s.name = text(j, p, "name");
    s.value = number(j, p, "value");
    s.kind = parse_var_kind(j, p);
    const Json& m = field(j, p, "min");
    if (!m.is_null()) s.min = number(m, at(p, "min"));
    doc.parameters.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    const std::string p = at("$.expressions", i);
    const Json& j = exprs[i];
    expect_object(j, p, {"name", "constant", "terms"});
    ExpressionSpec e;
    e.name = text(j, p, "name");
    e.constant = number(j, p, "constant");
    const Json& terms = array(j, p, "terms");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string tp = at(at(p, "terms"), k);
      expect_object(terms[k], tp, {"name", "coef"});
      e.terms.emplace_back(text(terms[k], tp, "name"), number(terms[k], tp, "coef"));
    }
    doc.expressions.push_back(std::move(e));
  }
}

void parse_constraints(const Json& root, DesignDocument& doc, const DesignParams& x) {
  const Json& rows = array(root, "$", "constraints");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string p = at("$.constraints", i);
    const Json& j = rows[i];
    expect_object(j, p, {"kind", "terms", "target"});
    ConstraintRow row;
    try {
      row.kind = constraint_kind_from_string(text(j, p, "kind"));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError(at(p, "kind"), e.what());
    }
    if (row.kind == ConstraintKind::Dynamic) throw SchemaError(at(p, "kind"), "dynamic rows are not stored");
    const Json& terms = array(j, p, "terms");
    if (terms.empty()) throw SchemaError(at(p, "terms"), "needs at least one term");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string tp = at(at(p, "terms"), k);
      expect_object(terms[k], tp, {"var", "coef"});
      const std::string var = text(terms[k], tp, "var");
      const std::size_t idx = find_param(x, var);
      if (idx == static_cast<std::size_t>(-1)) throw SchemaError(at(tp, "var"), "unknown variable '" + var + "'");
      row.terms.push_back({idx, number(terms[k], tp, "coef")});
    }
    row.target = number(j, p, "target");
    doc.constraints.push_back(std::move(row));
  }
}

void parse_effectiveness(const Json& root, DesignDocument& doc, const std::set<int>& ids) {
  const std::string p = "$.effectiveness";
  const Json& j = field(root, "$", "effectiveness");
  expect_object(j, p, {"inner_volumes", "fit_volume", "loads", "element_size"});
  EffectivenessSpec& e = doc.effectiveness;
  const Json& ivs = array(j, p, "inner_volumes");
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    const std::string ip = at(at(p, "inner_volumes"), i);
    expect_object(ivs[i], ip, {"support", "height"});
    InnerVolume iv{integer(ivs[i], ip, "support"), positive(ivs[i], ip, "height")};
    if (!ids.contains(iv.support)) throw SchemaError(at(ip, "support"), "unknown part id");
    e.inner_volumes.push_back(iv);
  }
  const Json& fit = field(j, p, "fit_volume");
  if (!fit.is_null()) {
    const std::string fp = at(p, "fit_volume");
    expect_object(fit, fp, {"min", "max"});
    Box3 box{vec3(field(fit, fp, "min"), at(fp, "min")), vec3(field(fit, fp, "max"), at(fp, "max"))};
    for (int a = 0; a < 3; ++a) {
      if (!(box.min[a] < box.max[a])) throw SchemaError(fp, "min must be below max on every axis");
    }
    e.fit_volume = box;
  }
  const Json& loads = field(j, p, "loads");
  if (!loads.is_null()) {
    const std::string lp = at(p, "loads");
    if (!loads.is_array()) throw SchemaError(lp, "expected an array or null");
    e.loads.emplace();
    for (std::size_t i = 0; i < loads.size(); ++i) {
      const std::string ip = at(lp, i);
      expect_object(loads[i], ip, {"part", "force", "direction"});
      LoadSpec l;
      l.part = integer(loads[i], ip, "part");
      if (!ids.contains(l.part)) throw SchemaError(at(ip, "part"), "unknown part id");
      l.force = number(loads[i], ip, "force");
      l.direction = vec3(field(loads[i], ip, "direction"), at(ip, "direction"));
      if (!(l.direction.norm() > 0.0)) throw SchemaError(at(ip, "direction"), "must be non-zero");
      e.loads->push_back(l);
    }
  }
  e.element_size = positive(j, p, "element_size");
  e.material = doc.material;
}

}  // namespace

std::string dump_canonical(const Json& j) {
  std::string out;
  emit(j, 0, out);
  out += "\n";
  return out;
}

std::shared_ptr<const DesignEvaluator> DesignDocument::evaluator() const {
  if (model == ModelKind::Planks) return std::make_shared<ConstrainedPlankDesign>(planks, thickness);
  return std::make_shared<ParametricDesign>(parameters, expressions, parametric_parts, thickness);
}

ConstraintSystem DesignDocument::constraint_system() const {
  ConstraintSystem c(*evaluator());
  c.add(constraints);
  return c;
}

Problem DesignDocument::problem() const {
  Problem p;
  p.evaluator = evaluator();
  p.constraints = constraint_system();
  p.effectiveness = effectiveness;
  p.effectiveness.material = material;
  p.boards = boards;
  p.raster_res = raster_res;
  return p;
}

DesignParams DesignDocument::initial() const { return evaluator()->initial(); }

std::size_t DesignDocument::part_count() const {
  return model == ModelKind::Planks ? planks.size() : parametric_parts.size();
}

DesignDocument with_parameters(const DesignDocument& doc, const DesignParams& x) {
  DesignDocument out = doc;
  if (doc.model == ModelKind::Planks) {
    if (x.size() != doc.planks.size() * ConstrainedPlankDesign::kVarsPerPlank) {
      throw Error("parameter vector does not match the design");
    }
    for (std::size_t i = 0; i < out.planks.size(); ++i) {
      PlankSpec& s = out.planks[i];
      using D = ConstrainedPlankDesign;
      s.center = {x[D::index(i, Attr::CX)], x[D::index(i, Attr::CY)], x[D::index(i, Attr::CZ)]};
      s.lx = x[D::index(i, Attr::LX)];
      s.ly = x[D::index(i, Attr::LY)];
    }
  } else {
    if (x.size() != doc.parameters.size()) throw Error("parameter vector does not match the design");
    for (std::size_t i = 0; i < out.parameters.size(); ++i) out.parameters[i].value = x[i];
  }
  return out;
}

DesignDocument load_design(const std::string& input) {
  Json root;
  try {
    root = Json::parse(input);
  } catch (const Json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  expect_object(root, "$",
                {"schema", "name", "model", "thickness", "material", "raster_res", "boards", "parts", "parameters",
                 "expressions", "constraints", "effectiveness"});
  if (integer(root, "$", "schema") != kSchemaVersion) throw SchemaError("$.schema", "unsupported version");
  DesignDocument doc;
  doc.name = text(root, "$", "name");
  const std::string model = text(root, "$", "model");
  if (model == "planks") {
    doc.model = ModelKind::Planks;
  } else if (model == "parametric") {
    doc.model = ModelKind::Parametric;
  } else {
    throw SchemaError("$.model", "expected planks or parametric");
  }
  doc.thickness = positive(root, "$", "thickness");
  const Json& m = field(root, "$", "material");
  expect_object(m, "$.material", {"youngs", "poisson", "density"});
  doc.material.youngs = positive(m, "$.material", "youngs");
  doc.material.poisson = number(m, "$.material", "poisson");
  doc.material.weight = number(m, "$.material", "density") * kGravity;
  doc.raster_res = positive(root, "$", "raster_res");
  const Json& boards = array(root, "$", "boards");
  if (boards.empty()) throw SchemaError("$.boards", "needs at least one board");
  for (std::size_t i = 0; i < boards.size(); ++i) {
    const std::string p = at("$.boards", i);
    expect_object(boards[i], p, {"width", "height"});
    doc.boards.push_back({positive(boards[i], p, "width"), positive(boards[i], p, "height")});
  }
  parse_parts(root, doc);
  parse_parameters(root, doc);

  std::shared_ptr<const DesignEvaluator> evaluator;
  try {
    evaluator = doc.evaluator();
    evaluator->evaluate(evaluator->initial());
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError("$.parts", e.what());
  }
  const DesignParams x = evaluator->initial();
  parse_constraints(root, doc, x);

  std::set<int> ids;
  for (const Part& part : evaluator->evaluate(x)) ids.insert(part.id);
  parse_effectiveness(root, doc, ids);
  return doc;
}

DesignDocument load_design_file(const std::string& path) { return load_design(read_file(path)); }

std::string save_design(const DesignDocument& doc) {
  Json root;
  root["schema"] = kSchemaVersion;
  root["name"] = doc.name;
  root["model"] = doc.model == ModelKind::Planks ? "planks" : "parametric";
  root["thickness"] = doc.thickness;
  root["material"] = {{"youngs", doc.material.youngs}, {"poisson", doc.material.poisson},
                      {"density", doc.material.weight / kGravity}};
  root["raster_res"] = doc.raster_res;
  Json boards = Json::array();
  for (const BoardSpec& b : doc.boards) boards.push_back({{"width", b.width}, {"height", b.height}});
  root["boards"] = std::move(boards);

  Json parts = Json::array();
  auto shape = [](const PartTemplate& t) {
    Json j;
    j["id"] = t.id;
    j["name"] = t.name;
    j["normal"] = axis_name(t.normal);
    return j;
  };
  if (doc.model == ModelKind::Planks) {
    for (const PlankSpec& s : doc.planks) {
      Json j = shape(s.shape);
      j["center"] = vec3_json(s.center);
      j["lx"] = s.lx;
      j["ly"] = s.ly;
      j["min_lx"] = s.min_lx;
      j["min_ly"] = s.min_ly;
      j["contour"] = contour_json(s.shape.unit_contour);
      parts.push_back(std::move(j));
    }
  } else {
    for (const ParametricPartSpec& s : doc.parametric_parts) {
      Json j = shape(s.shape);
      for (std::size_t k = 0; k < 5; ++k) j[kAttrKeys[k]] = s.attributes[k];
      j["contour"] = contour_json(s.shape.unit_contour);
      parts.push_back(std::move(j));
    }
  }
  root["parts"] = std::move(parts);

  Json params = Json::array();
  for (const ParameterSpec& s : doc.parameters) {
    Json j;
    j["name"] = s.name;
    j["value"] = s.value;
    j["kind"] = s.kind == VarKind::Length ? "length" : "position";
    j["min"] = std::isfinite(s.min) ? Json(s.min) : Json(nullptr);
    params.push_back(std::move(j));
  }
  root["parameters"] = std::move(params);
  Json exprs = Json::array();
  for (const ExpressionSpec& e : doc.expressions) {
    Json terms = Json::array();
    for (const auto& [name, coef] : e.terms) terms.push_back({{"name", name}, {"coef", coef}});
    exprs.push_back({{"name", e.name}, {"constant", e.constant}, {"terms", std::move(terms)}});
  }
  root["expressions"] = std::move(exprs);

  const DesignParams x = doc.initial();
  Json rows = Json::array();
  for (const ConstraintRow& r : doc.constraints) {
    Json terms = Json::array();
    for (const Term& t : r.terms) terms.push_back({{"var", x.names[t.var]}, {"coef", t.coef}});
    rows.push_back({{"kind", to_string(r.kind)}, {"terms", std::move(terms)}, {"target", r.target}});
  }
  root["constraints"] = std::move(rows);

  const EffectivenessSpec& e = doc.effectiveness;
  Json eff;
  Json ivs = Json::array();
  for (const InnerVolume& iv : e.inner_volumes) ivs.push_back({{"support", iv.support}, {"height", iv.height}});
  eff["inner_volumes"] = std::move(ivs);
  eff["fit_volume"] = e.fit_volume ? Json{{"min", vec3_json(e.fit_volume->min)}, {"max", vec3_json(e.fit_volume->max)}}
                                   : Json(nullptr);
  if (e.loads) {
    Json loads = Json::array();
    for (const LoadSpec& l : *e.loads) {
      loads.push_back({{"part", l.part}, {"force", l.force}, {"direction", vec3_json(l.direction)}});
    }
    eff["loads"] = std::move(loads);
  } else {
    eff["loads"] = nullptr;
  }
  eff["element_size"] = e.element_size;
  root["effectiveness"] = std::move(eff);
  return dump_canonical(root);
}

Json layout_json(const Layout& layout, const std::vector<Part>& parts, const std::vector<BoardSpec>& boards,
                 double res) {
  Json out;
  out["raster_res"] = res;
  out["wastage"] = wastage(layout);
  Json bs = Json::array();
  for (std::size_t b = 0; b < layout.boards.size(); ++b) {
    const Board& board = layout.boards[b];
    Json j;
    j["width"] = b < boards.size() ? boards[b].width : board.size().width * res;
    j["height"] = b < boards.size() ? boards[b].height : board.size().height * res;
    j["used_width"] = board.box_width() * res;
    j["used_height"] = board.box_height() * res;
    Json ps = Json::array();
    for (const Placement& p : board.placements()) {
      const Part& part = parts[static_cast<std::size_t>(p.part)];
      const auto [w, h] = material_extents(part.lx, part.ly, p.orientation());
      Json q;
      q["part"] = part.id;
      q["name"] = part.name;
      q["u"] = p.pos.u * res;
      q["v"] = p.pos.v * res;
      q["orientation"] = degrees(p.orientation());
      q["width"] = w;
      q["height"] = h;
      Json contour = Json::array();
      for (const Vec2& c : placed_contour(part, p, res)) contour.push_back(Json::array({c.x, c.y}));
      q["contour"] = std::move(contour);
      ps.push_back(std::move(q));
    }
    j["placements"] = std::move(ps);
    bs.push_back(std::move(j));
  }
  out["boards"] = std::move(bs);
  return out;
}

Json snapshot_json(const Snapshot& s, const std::vector<Part>& parts, double res) {
  Json out;
  out["wastage"] = s.wastage;
  out["parameters"] = s.x.values;
  Json ps = Json::array();
  for (const PlacementRecord& r : s.placements) {
    Json q;
    q["part"] = parts[static_cast<std::size_t>(r.part)].id;
    q["board"] = r.board;
    q["u"] = r.pos.u * res;
    q["v"] = r.pos.v * res;
    q["orientation"] = degrees(r.orientation);
    ps.push_back(std::move(q));
  }
  out["placements"] = std::move(ps);
  return out;
}

Json result_json(const DesignDocument& doc, const SearchConfig& config, const SearchResult& result,
                 const std::vector<std::size_t>& suggestions) {
  const auto evaluator = doc.evaluator();
  Json out;
  out["design"] = doc.name;
  out["seed"] = config.seed;
  out["config"] = {{"generations", config.generations},
                   {"keep", config.keep},
                   {"improve_iterations", config.improve_iterations},
                   {"orderings", config.orderings},
                   {"raster_res", doc.raster_res}};
  out["parameter_names"] = evaluator->initial().names;
  out["diagnostic"] = result.diagnostic;
  out["cancelled"] = result.cancelled;
  Json rs = Json::array();
  for (std::size_t i = 0; i < result.results.size(); ++i) {
    const ExplorationResult& r = result.results[i];
    const std::vector<Part> parts = evaluator->evaluate(r.x);
    Json j;
    j["rank"] = i;
    j["wastage"] = r.wastage;
    Json order = Json::array();
    for (int p : r.ordering) order.push_back(parts[static_cast<std::size_t>(p)].id);
    j["ordering"] = std::move(order);
    j["parameters"] = r.x.values;
    j["layout"] = layout_json(r.layout, parts, doc.boards, doc.raster_res);
    Json path = Json::array();
    for (const Snapshot& s : r.path) path.push_back(snapshot_json(s, parts, doc.raster_res));
    j["path"] = std::move(path);
    rs.push_back(std::move(j));
  }
  out["results"] = std::move(rs);
  out["suggestions"] = suggestions;
  return out;
}

namespace {

// Local (mm) to material coordinates for a placement.
Vec2 to_material(Vec2 q, const Placement& placement, double res) {
  const PartBitmap& bmp = *placement.bitmap;
  const double w = bmp.width() * res;
  const double h = bmp.height() * res;
  Vec2 m;
  switch (placement.orientation()) {
    case Orientation::R0: m = q; break;
    case Orientation::R90: m = {w - q.y, q.x}; break;
    case Orientation::R180: m = {w - q.x, h - q.y}; break;
    case Orientation::R270: m = {q.y, h - q.x}; break;
  }
  return {placement.pos.u * res + m.x, placement.pos.v * res + m.y};
}

}  // namespace

Polygon placed_contour(const Part& part, const Placement& placement, double res) {
  Polygon out;
  out.reserve(part.contour.size());
  for (const Vec2& q : part.contour) out.push_back(to_material(q, placement, res));
  return out;
}

std::vector<Segment> shared_edges(const std::vector<Part>& parts, std::size_t index) {
  const Part& part = parts[index];
  std::vector<Segment> out;
  const Polygon& c = part.contour;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const Vec2 a = c[k];
    const Vec2 b = c[(k + 1) % c.size()];
    const Vec3 A = local_to_world(part, a);
    const Vec3 B = local_to_world(part, b);
    const double len = (B - A).norm();
    if (len <= kEdgeTolerance) continue;
    std::vector<std::pair<double, double>> spans;
    for (std::size_t q = 0; q < parts.size(); ++q) {
      if (q == index) continue;
      const Box3 box = world_box(parts[q]);
      for (int axis = 0; axis < 3; ++axis) {
        for (double plane : {box.min[axis], box.max[axis]}) {
          if (std::abs(A[axis] - plane) > kEdgeTolerance || std::abs(B[axis] - plane) > kEdgeTolerance) continue;
          double t0 = 0.0, t1 = 1.0;
          for (int m = 0; m < 3 && t0 < t1; ++m) {
            if (m == axis) continue;
            const double d = B[m] - A[m];
            if (std::abs(d) <= kEdgeTolerance) {
              if (A[m] < box.min[m] - kEdgeTolerance || A[m] > box.max[m] + kEdgeTolerance) t1 = t0;
              continue;
            }
            double s0 = (box.min[m] - A[m]) / d, s1 = (box.max[m] - A[m]) / d;
            if (s0 > s1) std::swap(s0, s1);
            t0 = std::max(t0, s0);
            t1 = std::min(t1, s1);
          }
          if ((t1 - t0) * len > kEdgeTolerance) spans.emplace_back(t0, t1);
        }
      }
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 0; i < spans.size();) {
      auto [t0, t1] = spans[i];
      std::size_t j = i + 1;
      while (j < spans.size() && spans[j].first <= t1) t1 = std::max(t1, spans[j++].second);
      out.push_back({{a.x + t0 * (b.x - a.x), a.y + t0 * (b.y - a.y)}, {a.x + t1 * (b.x - a.x), a.y + t1 * (b.y - a.y)}});
      i = j;
    }
  }
  return out;
}

std::vector<std::string> export_svg(const Layout& layout, const std::vector<Part>& parts,
                                    const std::vector<BoardSpec>& boards, double res) {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < layout.boards.size(); ++b) {
    const Board& board = layout.boards[b];
    const double w = b < boards.size() ? boards[b].width : board.size().width * res;
    const double h = b < boards.size() ? boards[b].height : board.size().height * res;
    const std::string W = format_float(w), H = format_float(h);
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}mm\" height=\"{1}mm\" viewBox=\"0 0 {0} {1}\">\n", W,
        H);
    s += fmt::format("  <g transform=\"matrix(1 0 0 -1 0 {})\">\n", H);
    s += fmt::format(
        "    <rect class=\"board\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888888\" "
        "stroke-width=\"0.5\"/>\n",
        W, H);
    s += "    <g class=\"parts\" fill=\"none\" stroke=\"#d00000\" stroke-width=\"0.2\">\n";
    for (const Placement& p : board.placements()) {
      const Part& part = parts[static_cast<std::size_t>(p.part)];
      const Polygon poly = placed_contour(part, p, res);
      std::string d;
      for (std::size_t k = 0; k < poly.size(); ++k) {
        d += fmt::format("{}{} {} ", k ? "L " : "M ", format_float(poly[k].x), format_float(poly[k].y));
      }
      d += "Z";
      s += fmt::format("      <path class=\"part\" data-part=\"{}\" d=\"{}\"/>\n", part.id, d);
    }
    s += "    </g>\n";
    s += "    <g class=\"shared\" fill=\"none\" stroke=\"#0050d0\" stroke-width=\"0.4\">\n";
    for (const Placement& p : board.placements()) {
      const Part& part = parts[static_cast<std::size_t>(p.part)];
      for (const Segment& seg : shared_edges(parts, static_cast<std::size_t>(p.part))) {
        const Vec2 a = to_material(seg.a, p, res);
        const Vec2 e = to_material(seg.b, p, res);
        s += fmt::format("      <path class=\"shared\" data-part=\"{}\" d=\"M {} {} L {} {}\"/>\n", part.id,
                         format_float(a.x), format_float(a.y), format_float(e.x), format_float(e.y));
      }
    }
    s += "    </g>\n";
    s += "  </g>\n";
    s += "</svg>\n";
    out.push_back(std::move(s));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace offcut
