#pragma once

// Design documents, optimizer results and cutting plans on disk. JSON output
// is canonical: fixed key order, two-space indent, floats with six decimals.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "offcut/constraints.hpp"
#include "offcut/design.hpp"
#include "offcut/effectiveness.hpp"
#include "offcut/layout.hpp"
#include "offcut/optimizer.hpp"

namespace offcut {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class ModelKind : std::uint8_t { Planks, Parametric };

/// Everything needed to rebuild a Problem, in the form it is stored.
struct DesignDocument {
  std::string name;
  double thickness = 3.0;
  Material material;
  std::vector<BoardSpec> boards;
  double raster_res = kDefaultRasterRes;
  ModelKind model = ModelKind::Planks;
  std::vector<PlankSpec> planks;                  // planks model
  std::vector<ParameterSpec> parameters;          // parametric model
  std::vector<ExpressionSpec> expressions;        // parametric model
  std::vector<ParametricPartSpec> parametric_parts;
  std::vector<ConstraintRow> constraints;  // terms index the evaluator's X
  EffectivenessSpec effectiveness;

  std::shared_ptr<const DesignEvaluator> evaluator() const;
  /// Static constraints with the evaluator's bounds.
  ConstraintSystem constraint_system() const;
  Problem problem() const;
  DesignParams initial() const;
  std::size_t part_count() const;
};

/// Document with its configuration replaced by `x` (same layout as initial()).
DesignDocument with_parameters(const DesignDocument& doc, const DesignParams& x);

/// Strict parse; throws SchemaError naming the offending JSON path.
DesignDocument load_design(const std::string& text);
DesignDocument load_design_file(const std::string& path);
std::string save_design(const DesignDocument& doc);

/// Canonical text of any JSON value.
std::string dump_canonical(const Json& j);

/// Placements in mm plus board sizes.
Json layout_json(const Layout& layout, const std::vector<Part>& parts, const std::vector<BoardSpec>& boards,
                 double res);

Json snapshot_json(const Snapshot& s, const std::vector<Part>& parts, double res);

/// Optimizer output; independent of the worker count.
Json result_json(const DesignDocument& doc, const SearchConfig& config, const SearchResult& result,
                 const std::vector<std::size_t>& suggestions);

/// Part contour in material coordinates (mm) at its placement.
Polygon placed_contour(const Part& part, const Placement& placement, double res);

/// Segment of a part contour, in the part's local coordinates.
struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Pieces of `parts[index]`'s contour edges lying on the box face of another
/// part, i.e. edges two planks share in the assembled design.
std::vector<Segment> shared_edges(const std::vector<Part>& parts, std::size_t index);

/// One SVG document per board, mm user units, y pointing up inside the
/// board group.
std::vector<std::string> export_svg(const Layout& layout, const std::vector<Part>& parts,
                                    const std::vector<BoardSpec>& boards, double res);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace offcut
