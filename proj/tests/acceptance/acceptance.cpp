// Acceptance gate: one PASS/FAIL line per criterion. Optional arguments pick
// criteria by number; the exit code is the number of failures.

#include <fmt/format.h>

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../docking_oracle.hpp"
#include "../random_systems.hpp"
#include "../test_helpers.hpp"
#include "offcut/constraints.hpp"
#include "offcut/effectiveness.hpp"
#include "offcut/fem.hpp"
#include "offcut/io.hpp"
#include "offcut/layout.hpp"
#include "offcut/optimizer.hpp"

namespace offcut {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> plus(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::vector<double> plus(std::span<const double> a, const Eigen::VectorXd& d) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + d[static_cast<Eigen::Index>(i)];
  return out;
}

// ---------------------------------------------------------------------------
// 1. corrector

// Smallest subset of eligible variables whose partial correction is exact and
// keeps every length at or above its bound; -1 when none exists.
int brute_force_support(const ConstraintSystem& sys, std::span<const double> p, std::span<const double> u) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) eligible.push_back(i);
  }
  int best = -1;
  for (std::size_t mask = 1; mask < (std::size_t{1} << eligible.size()); ++mask) {
    const int size = std::popcount(mask);
    if (best != -1 && size >= best) continue;
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < eligible.size(); ++j) {
      if ((mask >> j) & 1u) active.push_back(eligible[j]);
    }
    const std::vector<double> q = plus(p, solve_partial_correction(active, sys, p));
    bool ok = residual(sys, q).norm() < kResidualTolerance;
    for (std::size_t i = 0; ok && i < q.size(); ++i) {
      ok = sys.kind(i) == VarKind::Position || q[i] >= sys.min_length(i) - 1e-9;
    }
    if (ok) best = size;
  }
  return best;
}

// One violated row whose eligible variables occur in no other row.
std::optional<std::size_t> private_single_violation(const testing::RandomSystem& s) {
  const std::vector<double> p = plus(s.x, s.u);
  const Eigen::VectorXd r = residual(s.system, p);
  std::optional<std::size_t> row;
  for (std::size_t i = 0; i < s.system.row_count(); ++i) {
    if (std::abs(r[static_cast<Eigen::Index>(i)]) <= kResidualTolerance) continue;
    if (row) return std::nullopt;
    row = i;
  }
  if (!row) return std::nullopt;
  for (const Term& t : s.system.row(*row).terms) {
    if (s.u[t.var] != 0.0) continue;
    for (std::size_t j = 0; j < s.system.row_count(); ++j) {
      if (j == *row) continue;
      for (const Term& o : s.system.row(j).terms) {
        if (o.var == t.var) return std::nullopt;
      }
    }
  }
  return row;
}

Outcome corrector() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int solved = 0;
  int bad_residual = 0;
  int moved_edits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testing::random_feasible_system(rng, 20, 10);
    const CorrectionResult r = correct_for_design_constraint(s.system, s.x, s.u);
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      if (s.u[i] != 0.0 && r.d[static_cast<Eigen::Index>(i)] != 0.0) ++moved_edits;
    }
    if (!r.solved()) continue;
    ++solved;
    if (residual(s.system, plus(plus(s.x, s.u), r.d)).norm() >= kResidualTolerance) ++bad_residual;
  }

  std::mt19937_64 small(77);
  int compared = 0;
  int mismatched = 0;
  while (compared < 200) {
    const auto s = testing::random_feasible_system(small, 8, 4);
    if (!private_single_violation(s)) continue;
    ++compared;
    const int best = brute_force_support(s.system, plus(s.x, s.u), s.u);
    const CorrectionResult r = correct_for_design_constraint(s.system, s.x, s.u);
    const int got = r.solved() ? static_cast<int>(r.active_set.size()) : -1;
    if (got != best) ++mismatched;
  }
  const double secs = seconds_since(t0);
  return {solved > 0 && bad_residual == 0 && moved_edits == 0 && mismatched == 0 && secs < 5.0,
          fmt::format("{} of 200 solved, {} over 1e-9, {} edited entries moved; |support| mismatches {}/{}; {:.2f} s",
                      solved, bad_residual, moved_edits, mismatched, compared, secs)};
}

// ---------------------------------------------------------------------------
// 2. docking

RasterPart raster(int id, double w, double h, Polygon contour = {}) {
  return rasterize_all_orientations(testing::flat_part(id, w, h, std::move(contour)), 1.0);
}

struct Flat {
  int part, board, u, v, o;
  friend bool operator==(const Flat&, const Flat&) = default;
};

std::vector<Flat> flatten(const Layout& l) {
  std::vector<Flat> out;
  for (std::size_t b = 0; b < l.boards.size(); ++b) {
    for (const Placement& p : l.boards[b].placements()) {
      out.push_back({p.part, static_cast<int>(b), p.pos.u, p.pos.v, degrees(p.orientation())});
    }
  }
  return out;
}

struct Instance {
  std::string name;
  std::vector<RasterPart> parts;
};

std::vector<Instance> micro_instances() {
  using testing::l_shape;
  using testing::u_shape;
  return {
      {"bars", {raster(0, 4, 2), raster(1, 2, 4), raster(2, 2, 2)}},
      {"steps", {raster(0, 5, 3), raster(1, 3, 3), raster(2, 2, 3)}},
      {"strips", {raster(0, 3, 1), raster(1, 3, 1), raster(2, 3, 1)}},
      {"u_plug", {raster(0, 6, 6, u_shape(6, 6, 2, 3)), raster(1, 2, 3)}},
      {"l_fill", {raster(0, 6, 4, l_shape(6, 4, 3, 2)), raster(1, 3, 2)}},
      {"mixed", {raster(0, 4, 3), raster(1, 5, 4, l_shape(5, 4, 2, 2)), raster(2, 2, 2)}},
      {"u_pair", {raster(0, 6, 5, u_shape(6, 5, 2, 2)), raster(1, 4, 4, u_shape(4, 4, 2, 2))}},
  };
}

Outcome docking_checks() {
  const std::vector<RasterPart> parts = {raster(0, 7, 3), raster(1, 10, 10, testing::u_shape(10, 10, 4, 5)),
                                         raster(2, 4, 4), raster(3, 8, 6, testing::l_shape(8, 6, 3, 3)),
                                         raster(4, 5, 9, testing::u_shape(5, 9, 3, 4))};
  const Ordering order{3, 1, 4, 0, 2};
  const auto first = flatten(docking(parts, order, {{40, 40}}));
  int differing = 0;
  for (int k = 0; k < 10; ++k) {
    if (flatten(docking(parts, order, {{40, 40}})) != first) ++differing;
  }

  const BoardSize board{12, 12};
  std::vector<std::string> suboptimal;
  for (const Instance& inst : micro_instances()) {
    const Ordering id = identity_ordering(inst.parts.size());
    const Layout l = docking(inst.parts, id, {board});
    const testing::UsageRatio best = testing::exhaustive_docking_usage(inst.parts, id, board);
    if (l.boards[0].part_area() * best.box != best.parts * l.boards[0].box_area()) suboptimal.push_back(inst.name);
  }
  std::string names;
  for (const auto& n : suboptimal) names += " " + n;
  return {differing == 0 && suboptimal.empty(),
          fmt::format("{} of 10 repeats differ; {} of {} micro instances below the exhaustive oracle{}", differing,
                      suboptimal.size(), micro_instances().size(), names)};
}

// ---------------------------------------------------------------------------
// 3. enclosed area

// U and L shapes, each followed by a rectangle the size of its notch.
std::vector<RasterPart> concave_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 4);
  std::uniform_int_distribution<int> dim(10, 20);
  std::uniform_real_distribution<double> frac(0.3, 0.7);
  std::vector<RasterPart> parts;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double w = dim(rng);
    const double h = dim(rng);
    const double nw = std::round(w * frac(rng));
    const double nh = std::round(h * frac(rng));
    const Polygon c = i % 2 ? testing::l_shape(w, h, nw, nh) : testing::u_shape(w, h, nw, nh);
    const int id = static_cast<int>(parts.size());
    parts.push_back(raster(id, w, h, c));
    parts.push_back(raster(id + 1, nw, nh));
  }
  return parts;
}

Outcome enclosed_area() {
  const auto t0 = Clock::now();
  constexpr DockingOptions kBaseline{.enclosed_area_tiebreak = false};
  const std::vector<RasterPart> pair = {raster(0, 10, 10, testing::u_shape(10, 10, 6, 6)),
                                        raster(1, 6, 6, testing::u_shape(6, 6, 2, 2))};
  const double w_with = wastage(docking(pair, {0, 1}, {{40, 40}}));
  const double w_without = wastage(docking(pair, {0, 1}, {{40, 40}}, kBaseline));

  std::mt19937_64 rng(11);
  double gain = 0.0;
  constexpr int kInstances = 100;
  for (int k = 0; k < kInstances; ++k) {
    const auto parts = concave_instance(rng);
    const Ordering order = identity_ordering(parts.size());
    const double with = 1.0 - wastage(docking(parts, order, {{80, 80}}));
    const double without = 1.0 - wastage(docking(parts, order, {{80, 80}}, kBaseline));
    gain += with - without;
  }
  const double points = 100.0 * gain / kInstances;
  const double secs = seconds_since(t0);
  return {w_with < w_without && points >= 5.0 && secs < 60.0,
          fmt::format("pair wastage {:.4f} vs {:.4f} without; mean usage gain {:.2f} points over {} instances; "
                      "{:.2f} s",
                      w_with, w_without, points, kInstances, secs)};
}

// ---------------------------------------------------------------------------
// 4. slide

struct Shape {
  char kind;  // r, u, l
  double w, h, fw, fh;
};

RasterPart raster_shape(int id, const Shape& s) {
  const double nw = std::max(1.0, std::round(s.w * s.fw));
  const double nh = std::max(1.0, std::round(s.h * s.fh));
  switch (s.kind) {
    case 'u': return raster(id, s.w, s.h, testing::u_shape(s.w, s.h, std::min(nw, s.w - 2), std::min(nh, s.h - 1)));
    case 'l': return raster(id, s.w, s.h, testing::l_shape(s.w, s.h, std::min(nw, s.w - 1), std::min(nh, s.h - 1)));
    default: return raster(id, s.w, s.h);
  }
}

struct SlideFixture {
  std::vector<Shape> shapes;
  BoardSize board;
};

std::vector<SlideFixture> slide_fixtures() {
  return {
      {{{'r', 10, 4, 0, 0}, {'r', 6, 4, 0, 0}, {'r', 8, 8, 0, 0}, {'r', 5, 12, 0, 0}, {'r', 9, 3, 0, 0}}, {30, 30}},
      {{{'u', 12, 10, 0.5, 0.5}, {'r', 6, 5, 0, 0}, {'l', 9, 8, 0.4, 0.4}, {'r', 4, 4, 0, 0}}, {32, 28}},
      {{{'r', 20, 3, 0, 0}, {'r', 20, 3, 0, 0}, {'r', 20, 3, 0, 0}, {'r', 3, 9, 0, 0}, {'r', 3, 9, 0, 0}}, {24, 24}},
      {{{'l', 10, 10, 0.5, 0.5}, {'l', 10, 10, 0.5, 0.5}, {'u', 8, 8, 0.5, 0.4}, {'r', 5, 5, 0, 0}}, {26, 26}},
      {{{'r', 7, 3, 0, 0}, {'u', 10, 10, 0.4, 0.5}, {'r', 4, 4, 0, 0}, {'l', 8, 6, 0.4, 0.5}, {'r', 6, 2, 0, 0},
        {'r', 3, 7, 0, 0}},
       {36, 30}},
  };
}

// Pixel-level check written against the raw masks, not the board's own state.
bool overlap_free_and_in_bounds(const Layout& l, const std::vector<RasterPart>& parts) {
  for (const Board& b : l.boards) {
    const BoardSize size = b.size();
    std::vector<int> cover(static_cast<std::size_t>(size.width) * size.height, 0);
    for (const Placement& p : b.placements()) {
      const PartBitmap& bmp = *p.bitmap;
      const PartBitmap& expect = parts[static_cast<std::size_t>(p.part)].at(p.orientation());
      if (!(bmp == expect)) return false;
      for (int row = 0; row < bmp.height(); ++row) {
        for (int col = 0; col < bmp.width(); ++col) {
          if (!bmp.at(col, row)) continue;
          const int u = p.pos.u + col;
          const int v = p.pos.v + row;
          if (u < 0 || v < 0 || u >= size.width || v >= size.height) return false;
          if (++cover[static_cast<std::size_t>(v) * size.width + u] > 1) return false;
        }
      }
    }
  }
  return true;
}

Outcome slide_safety() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> delta(-3, 3);
  int trials = 0;
  int empty = 0;
  int violations = 0;
  for (const SlideFixture& f : slide_fixtures()) {
    std::vector<RasterPart> parts;
    for (std::size_t i = 0; i < f.shapes.size(); ++i) parts.push_back(raster_shape(static_cast<int>(i), f.shapes[i]));
    const Layout start = docking(parts, identity_ordering(parts.size()), {f.board});
    for (int k = 0; k < 200; ++k) {
      std::vector<RasterPart> changed;
      for (std::size_t i = 0; i < f.shapes.size(); ++i) {
        Shape s = f.shapes[i];
        s.w = std::max(s.kind == 'r' ? 1.0 : 4.0, s.w + delta(rng));
        s.h = std::max(s.kind == 'r' ? 1.0 : 4.0, s.h + delta(rng));
        changed.push_back(raster_shape(static_cast<int>(i), s));
      }
      const Layout s = slide(start, changed);
      ++trials;
      if (s.empty()) {
        ++empty;
        if (s.placement_count() != 0 || wastage(s) != 1.0) ++violations;
        continue;
      }
      if (s.placement_count() != parts.size() || !overlap_free_and_in_bounds(s, changed)) ++violations;
    }
  }
  return {violations == 0,
          fmt::format("{} perturbations on {} fixtures, {} empty, {} violations", trials, slide_fixtures().size(),
                      empty, violations)};
}

// ---------------------------------------------------------------------------
// 5. end to end

std::string fixture(const std::string& name) { return std::string(OFFCUT_SOURCE_DIR) + "/fixtures/" + name; }

Outcome wastage_reduction() {
  const DesignDocument doc = load_design_file(fixture("coffee_table.design.json"));
  const Problem problem = doc.problem();
  SearchContext ctx(problem);
  const DesignParams x0 = doc.initial();
  const double start = wastage(ctx.dock(x0, identity_ordering(doc.part_count())));

  double sum = 0.0;
  double slowest = 0.0;
  std::string finals;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SearchConfig config;
    config.seed = seed;
    config.generations = 3;
    config.keep = 8;
    config.workers = 1;
    const auto t0 = Clock::now();
    const SearchResult r = min_wastage(problem, x0, config);
    slowest = std::max(slowest, seconds_since(t0));
    const double w = r.results.empty() ? 1.0 : r.results.front().wastage;
    sum += w;
    finals += fmt::format(" {:.4f}", w);
  }
  const double mean = sum / 5.0;
  return {std::abs(start - 0.22) <= 0.02 && mean <= 0.15 && slowest < 120.0,
          fmt::format("{} parts, {} rows; start {:.4f}, finals{}, mean {:.4f}; slowest seed {:.1f} s",
                      doc.part_count(), doc.constraint_system().row_count(), start, finals, mean, slowest)};
}

// ---------------------------------------------------------------------------
// 6. fem

Part slab(int id, Vec3 min, Vec3 max) {
  Part p = testing::flat_part(id, max.x - min.x, max.y - min.y);
  p.thickness = max.z - min.z;
  p.normal = Axis::Z;
  p.center = 0.5 * (min + max);
  return p;
}

Outcome fem() {
  const Material m;
  constexpr double L = 400.0, b = 40.0, t = 40.0;
  const DensityGrid d = voxelize({slab(0, {0, 0, 100}, {L, b, 100 + t})}, 10.0);
  std::vector<int> clamp;
  for (int n = 0; n < d.grid.node_count(); ++n) {
    if (std::abs(d.grid.node_position(n).x) < 1e-9) clamp.push_back(n);
  }
  const StiffnessSystem sys = assemble_stiffness(d, m, clamp);
  const DisplacementField u = solve_displacements(sys, d.grid, gravity_loads(d, m));
  const double tip = -u.at({L, b / 2, 100 + t / 2}).z;
  const double q = m.weight * b * t;
  const double beam = q * std::pow(L, 4) / (8.0 * m.youngs * (b * std::pow(t, 3) / 12.0));
  const double ratio = tip / beam;

  const Part p = slab(0, {0, 0, 40}, {300, 100, 43});
  const DensityGrid pd = voxelize({p});
  auto dip = [&](double depth, Vec3 shift) {
    return DisplacementField::from_function(pd.grid, [=](Vec3 at) {
      const double s = std::clamp(at.x / 300.0, 0.0, 1.0);
      return Vec3{0, 0, -4.0 * depth * s * (1 - s)} + shift;
    });
  };
  const Vec3 shift{4.0, -2.5, 6.0};
  const bool deep = detect_sagging(dip(0.5, {}), {p}).planks[0].sagging;
  const bool shallow = detect_sagging(dip(0.1, {}), {p}).planks[0].sagging;
  const bool deep_moved = detect_sagging(dip(0.5, shift), {p}).planks[0].sagging;
  const bool shallow_moved = detect_sagging(dip(0.1, shift), {p}).planks[0].sagging;
  return {std::abs(ratio - 1.0) <= 0.30 && deep && !shallow && deep_moved == deep && shallow_moved == shallow,
          fmt::format("cantilever tip {:.4f} mm vs beam {:.4f} mm (ratio {:.3f}); 0.5 mm dip {}, 0.1 mm dip {}, "
                      "translated {} / {}",
                      tip, beam, ratio, deep ? "flagged" : "clear", shallow ? "flagged" : "clear",
                      deep_moved ? "flagged" : "clear", shallow_moved ? "flagged" : "clear")};
}

// ---------------------------------------------------------------------------
// 7. effectiveness

Outcome effectiveness() {
  using D = ConstrainedPlankDesign;
  // support top face at z = 103, shelf bottom 300 mm above it
  const D d({testing::plank(0, Axis::Z, {200, 150, 101.5}, 400, 300),
             testing::plank(1, Axis::Z, {200, 150, 103 + 300 + 1.5}, 400, 300)},
            3.0);
  const ConstraintSystem c(d);
  const ConstraintSystem before = c;
  EffectivenessSpec spec;
  spec.inner_volumes.push_back({0, 200.0});
  std::vector<double> u(d.parameter_count(), 0.0);
  u[D::index(1, Attr::CZ)] = -500.0 / 3.0;  // clearance lost at 100 / (500/3) = 0.6

  const EffectivenessResult r = dynamic_effectiveness_constraints(d, c, spec, d.initial(), u);
  const std::vector<Part> parts = d.evaluate(r.point);
  const double gap = world_box(parts[1]).min.z - world_box(parts[0]).max.z;
  const bool bracket = r.brackets.size() == 1 && r.brackets[0].l <= 0.6 && r.brackets[0].l >= 0.6 - kAlphaTolerance;
  return {r.solved() && bracket && gap >= 200.0 - 1e-9 && c == before && c.dynamic_count() == 0,
          fmt::format("{}; brackets {}, l = {:.5f}; final gap {:.6f} mm; static system {}",
                      r.solved() ? "solved" : "failed", r.brackets.size(),
                      r.brackets.empty() ? -1.0 : r.brackets[0].l, gap, c == before ? "unchanged" : "modified")};
}

// ---------------------------------------------------------------------------
// 8. reproducibility

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file under `dir`, keyed by name.
std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / fmt::format("offcut-acceptance-{}", ::getpid());
  fs::remove_all(root);
  const std::string input = fixture("bookshelf.design.json");
  std::vector<std::map<std::string, std::string>> runs;
  std::string failure;
  for (const int workers : {1, 8, 8}) {
    const fs::path out = root / fmt::format("run{}", runs.size());
    const std::string cmd =
        fmt::format("\"{}\" optimize \"{}\" --seed 7 --workers {} --out \"{}\" > /dev/null", OFFCUT_CLI, input, workers,
                    out.string());
    if (std::system(cmd.c_str()) != 0) {
      failure = "command failed: " + cmd;
      break;
    }
    runs.push_back(outputs(out));
  }
  fs::remove_all(root);
  if (!failure.empty()) return {false, failure};

  const bool has_svg = std::any_of(runs[0].begin(), runs[0].end(),
                                   [](const auto& kv) { return kv.first.ends_with(".svg"); });
  const bool same = runs[0] == runs[1] && runs[1] == runs[2];
  return {same && has_svg && runs[0].contains("result.json"),
          fmt::format("seed 7, workers 1/8/8: {} files each, {}", runs[0].size(),
                      same ? "byte-identical" : "outputs differ")};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace offcut

int main(int argc, char** argv) {
  using namespace offcut;
  const std::vector<Criterion> all = {
      {1, "constraint corrector", corrector},       {2, "docking determinism", docking_checks},
      {3, "enclosed-area criterion", enclosed_area}, {4, "slide safety", slide_safety},
      {5, "wastage reduction", wastage_reduction},  {6, "fem and sag flags", fem},
      {7, "effectiveness bisection", effectiveness}, {8, "seeded reproducibility", reproducibility},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.contains(c.number)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    fmt::print("[{}] {} {}: {}\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail);
    std::fflush(stdout);
  }
  return failures;
}
