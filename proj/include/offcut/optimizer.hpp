#pragma once

// Wastage-driven design search: ordering exploration, grow/shrink local
// search on the design parameters and the generation loop on top.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "offcut/constraints.hpp"
#include "offcut/design.hpp"
#include "offcut/effectiveness.hpp"
#include "offcut/layout.hpp"
#include "offcut/sizing.hpp"

namespace offcut {

using Rng = std::mt19937_64;

/// Board dimensions in mm.
struct BoardSpec {
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const BoardSpec&, const BoardSpec&) = default;
};

/// Whole pixels that fit inside each board.
std::vector<BoardSize> board_pixels(const std::vector<BoardSpec>& boards, double res);

/// Everything that stays fixed during a search.
struct Problem {
  std::shared_ptr<const DesignEvaluator> evaluator;
  ConstraintSystem constraints;
  EffectivenessSpec effectiveness;
  std::vector<BoardSpec> boards;
  double raster_res = kDefaultRasterRes;
};

/// Placement without its bitmap; enough to rebuild a layout from D(X).
struct PlacementRecord {
  int part = 0;
  int board = 0;
  Position pos;
  Orientation orientation = Orientation::R0;

  friend bool operator==(const PlacementRecord&, const PlacementRecord&) = default;
};

std::vector<PlacementRecord> records(const Layout& layout);

/// Worker-local evaluation state: a private evaluator copy plus caches.
class SearchContext {
 public:
  explicit SearchContext(const Problem& problem);

  const Problem& problem() const { return *problem_; }
  const DesignEvaluator& evaluator() const { return *evaluator_; }
  const std::vector<BoardSize>& boards() const { return boards_; }
  double res() const { return problem_->raster_res; }

  std::vector<RasterPart> raster(const DesignParams& x);
  /// Docking of D(X); the empty layout when it overflows.
  Layout dock(const DesignParams& x, const Ordering& order);
  Layout slide(const Layout& previous, const DesignParams& x);
  /// Layout from stored placements with fresh bitmaps of D(X); nullopt when
  /// the placements no longer fit.
  std::optional<Layout> rebuild(const DesignParams& x, const std::vector<PlacementRecord>& placements);

  /// Size gradients under the orientations used by `layout`.
  const Eigen::MatrixXd& gradients(const DesignParams& x, const Layout& layout);

  /// Applies a first-order size change and restores design and effectiveness
  /// constraints. nullopt when correction fails or a length drops below its
  /// minimum.
  std::optional<DesignParams> resize(const DesignParams& x, const SizeChange& change);
  /// Change size entry `size_index` by `pixels` raster steps; nullopt when
  /// the size has no influencing parameter or resize() fails.
  std::optional<DesignParams> change_size(const DesignParams& x, const Layout& layout, std::size_t size_index,
                                          int pixels);

 private:
  const Problem* problem_;
  std::unique_ptr<DesignEvaluator> evaluator_;
  std::vector<BoardSize> boards_;
  Rasterizer rasterizer_;
  GradientCache gradients_;
};

std::vector<Orientation> layout_orientations(const Layout& layout, std::size_t part_count);

inline constexpr std::size_t kOrderingsKept = 3;

/// |parts|^2 random pair swaps from `start`, each accepted when the docking
/// wastage strictly decreases. Returns up to `keep` distinct accepted
/// orderings, best first.
std::vector<Ordering> explore_orderings(SearchContext& ctx, const DesignParams& x, const Ordering& start, Rng& rng,
                                        std::size_t keep = kOrderingsKept);

struct DesignState {
  DesignParams x;
  Layout layout;
  double wastage = 1.0;
};

DesignState make_state(DesignParams x, Layout layout);

/// Grow step: every size in random order grows one raster step at a time
/// while wastage keeps dropping, with a docking retry when sliding worsens it.
DesignState grow_parts(SearchContext& ctx, const DesignState& best, DesignState current, const Ordering& order,
                       Rng& rng);

/// Chain of size indices from the right (top) border to the left (bottom) one.
using Chain = std::vector<int>;

inline constexpr std::size_t kMaxChains = 4096;

/// Border-to-border contact chains along material x (axis 0) or y (axis 1),
/// one list over all boards. Parts repeated in a chain are cycles and dropped.
std::vector<Chain> locking_chains(const Layout& layout, int axis, std::size_t max_chains = kMaxChains);

/// First-draw probability of every size in `chains` (indexed like `dep`):
/// P(o) over occurrence counts, then 1 - dep / sum(dep) within a count,
/// normalized over the n - 1 remaining mass.
std::vector<double> draw_probabilities(const std::vector<Chain>& chains, const std::vector<int>& dep);

int draw_part_size(const std::vector<Chain>& chains, const std::vector<int>& dep, Rng& rng);

/// Draws sizes until every chain holds a selected size. `dep[i] <= 0` marks
/// a size that cannot be changed; chains made only of such sizes are skipped.
std::vector<int> select_part_sizes_to_shrink(std::vector<Chain> chains, const std::vector<int>& dep, Rng& rng);

/// Number of size entries moved by a one-pixel shrink of each size, 0 when
/// the shrink is impossible.
std::vector<int> size_dependence(SearchContext& ctx, const DesignParams& x, const Layout& layout);

/// Shrinks the sizes selected on `best.layout` by one raster step each.
DesignParams shrink_parts(SearchContext& ctx, const DesignState& best, Rng& rng);

struct Snapshot {
  DesignParams x;
  std::vector<PlacementRecord> placements;
  double wastage = 1.0;
};

Snapshot snapshot(const DesignState& state);
/// Re-evaluates a snapshot from its parameters and placements.
double replay(SearchContext& ctx, const Snapshot& s);

inline constexpr int kImproveIterations = 20;

/// Alternating grow / shrink+slide, keeping the best state. Appends every
/// new best to `path` when given.
DesignState improve_design(SearchContext& ctx, const DesignParams& x, const Ordering& order, Rng& rng,
                           int iterations = kImproveIterations, std::vector<Snapshot>* path = nullptr);

struct ExplorationResult {
  DesignParams x;
  Ordering ordering;
  Layout layout;
  double wastage = 1.0;
  std::vector<Snapshot> path;
};

struct SearchConfig {
  std::uint64_t seed = 1;
  int generations = 3;
  std::size_t keep = 8;
  int improve_iterations = kImproveIterations;
  std::size_t orderings = kOrderingsKept;
  int workers = 8;
};

struct SearchProgress {
  int generation = 0;  // completed
  int generations = 0;
};

struct SearchResult {
  std::vector<ExplorationResult> results;  // best first
  std::string diagnostic;
  bool cancelled = false;
};

/// Per-task generator from the master seed and the task coordinates.
Rng task_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t phase, std::uint64_t index);

/// Generation loop over (X, O) pairs. Results depend on the seed only, not
/// on the number of workers.
SearchResult min_wastage(const Problem& problem, const DesignParams& start, const SearchConfig& config,
                         const std::function<void(const SearchProgress&)>& progress = {},
                         const std::atomic<bool>* cancel = nullptr);

/// Greedy farthest-point picks in plank-length space starting from results[0].
std::vector<std::size_t> select_suggestions(const std::vector<ExplorationResult>& results,
                                            const DesignEvaluator& evaluator, std::size_t n = 3);

}  // namespace offcut
