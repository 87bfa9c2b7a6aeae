#include "offcut/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "offcut/error.hpp"

namespace offcut {

std::vector<BoardSize> board_pixels(const std::vector<BoardSpec>& boards, double res) {
  std::vector<BoardSize> out;
  for (const BoardSpec& b : boards) {
    out.push_back({static_cast<int>(std::floor(b.width / res + 1e-9)),
                   static_cast<int>(std::floor(b.height / res + 1e-9))});
  }
  return out;
}

std::vector<PlacementRecord> records(const Layout& layout) {
  std::vector<PlacementRecord> out;
  for (std::size_t k = 0; k < layout.boards.size(); ++k) {
    for (const Placement& p : layout.boards[k].placements()) {
      out.push_back({p.part, static_cast<int>(k), p.pos, p.orientation()});
    }
  }
  return out;
}

std::vector<Orientation> layout_orientations(const Layout& layout, std::size_t part_count) {
  std::vector<Orientation> out(part_count, Orientation::R0);
  for (const Board& b : layout.boards) {
    for (const Placement& p : b.placements()) out[static_cast<std::size_t>(p.part)] = p.orientation();
  }
  return out;
}

SearchContext::SearchContext(const Problem& problem)
    : problem_(&problem),
      evaluator_(problem.evaluator->clone()),
      boards_(board_pixels(problem.boards, problem.raster_res)),
      rasterizer_(problem.raster_res) {
  if (problem.constraints.var_count() != evaluator_->parameter_count()) {
    throw std::invalid_argument("constraint system does not match the design parameters");
  }
}

std::vector<RasterPart> SearchContext::raster(const DesignParams& x) {
  return rasterizer_.get_all(evaluator_->evaluate(x));
}

Layout SearchContext::dock(const DesignParams& x, const Ordering& order) {
  try {
    return docking(raster(x), order, boards_);
  } catch (const PackingOverflow&) {
    return {};
  } catch (const EmptyBitmap&) {
    return {};
  }
}

Layout SearchContext::slide(const Layout& previous, const DesignParams& x) {
  if (previous.empty()) return {};
  try {
    return offcut::slide(previous, raster(x));
  } catch (const EmptyBitmap&) {
    return {};
  }
}

std::optional<Layout> SearchContext::rebuild(const DesignParams& x, const std::vector<PlacementRecord>& placements) {
  std::vector<RasterPart> parts;
  try {
    parts = raster(x);
  } catch (const EmptyBitmap&) {
    return std::nullopt;
  }
  Layout layout;
  for (const BoardSize& b : boards_) layout.boards.emplace_back(b);
  for (const PlacementRecord& r : placements) {
    if (r.board < 0 || static_cast<std::size_t>(r.board) >= layout.boards.size()) return std::nullopt;
    if (r.part < 0 || static_cast<std::size_t>(r.part) >= parts.size()) return std::nullopt;
    Board& board = layout.boards[static_cast<std::size_t>(r.board)];
    auto bmp = parts[static_cast<std::size_t>(r.part)].ptr(r.orientation);
    if (!board.fits(*bmp, r.pos)) return std::nullopt;
    board.place(r.part, bmp, r.pos);
  }
  return layout;
}

const Eigen::MatrixXd& SearchContext::gradients(const DesignParams& x, const Layout& layout) {
  const std::vector<Orientation> o = layout_orientations(layout, evaluator_->part_count());
  return gradients_.get(*evaluator_, x, o);
}

std::optional<DesignParams> SearchContext::resize(const DesignParams& x, const SizeChange& change) {
  std::vector<double> u(x.size());
  bool moved = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = change.delta[static_cast<Eigen::Index>(i)];
    moved = moved || u[i] != 0.0;
  }
  if (!moved) return std::nullopt;
  const EffectivenessResult r =
      dynamic_effectiveness_constraints(*evaluator_, problem_->constraints, problem_->effectiveness, x, u);
  if (!r.solved()) return std::nullopt;
  for (std::size_t i = 0; i < r.point.size(); ++i) {
    if (evaluator_->kind(i) == VarKind::Length && r.point[i] < evaluator_->min_value(i) - 1e-9) return std::nullopt;
  }
  return r.point;
}

std::optional<DesignParams> SearchContext::change_size(const DesignParams& x, const Layout& layout,
                                                       std::size_t size_index, int pixels) {
  const Eigen::MatrixXd& g = gradients(x, layout);
  if (!has_influence(g, size_index)) return std::nullopt;
  return resize(x, change_part_size(g, x, size_index, pixels * res()));
}

std::vector<Ordering> explore_orderings(SearchContext& ctx, const DesignParams& x, const Ordering& start, Rng& rng,
                                        std::size_t keep) {
  Ordering current = start;
  double w = wastage(ctx.dock(x, current));
  std::vector<Ordering> accepted = {current};
  const std::size_t n = start.size();
  if (n >= 2) {
    std::uniform_int_distribution<std::size_t> first(0, n - 1), second(0, n - 2);
    for (std::size_t it = 0; it < n * n; ++it) {
      const std::size_t i = first(rng);
      std::size_t j = second(rng);
      if (j >= i) ++j;
      Ordering candidate = current;
      std::swap(candidate[i], candidate[j]);
      const Layout l = ctx.dock(x, candidate);
      if (l.empty()) continue;
      const double wc = wastage(l);
      if (wc < w) {
        w = wc;
        current = std::move(candidate);
        accepted.push_back(current);
      }
    }
  }
  std::reverse(accepted.begin(), accepted.end());
  if (accepted.size() > keep) accepted.resize(keep);
  return accepted;
}

DesignState make_state(DesignParams x, Layout layout) {
  DesignState s{std::move(x), std::move(layout), 1.0};
  s.wastage = wastage(s.layout);
  return s;
}

DesignState grow_parts(SearchContext& ctx, const DesignState& best, DesignState current, const Ordering& order,
                       Rng& rng) {
  const std::size_t sizes = 2 * ctx.evaluator().part_count();
  bool improvement = true;
  while (improvement) {
    improvement = false;
    std::vector<std::size_t> idx(sizes);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) {
      double w_e = 1.0;
      DesignState e = current;
      std::optional<DesignState> reached;
      while (true) {
        std::optional<DesignParams> x = ctx.change_size(e.x, e.layout, i, 1);
        if (!x) break;
        Layout l = ctx.slide(e.layout, *x);
        if (wastage(l) > w_e) l = ctx.dock(*x, order);
        e = make_state(std::move(*x), std::move(l));
        if (e.wastage < w_e) {
          w_e = e.wastage;
          reached = e;
        } else {
          break;
        }
      }
      if (reached && w_e < current.wastage) {
        current = std::move(*reached);
        improvement = true;
      }
    }
  }
  return current.wastage < best.wastage ? current : best;
}

std::vector<Chain> locking_chains(const Layout& layout, int axis, std::size_t max_chains) {
  std::vector<Chain> chains;
  for (const Board& board : layout.boards) {
    if (board.empty()) continue;
    const int bw = board.box_width(), bh = board.box_height();
    const std::size_t n = board.placements().size();
    std::vector<std::set<int>> next(n);
    std::vector<bool> start(n, false), end(n, false);
    // Outer index runs across the chain axis, inner index along it.
    const int outer = axis == 0 ? bh : bw;
    const int inner = axis == 0 ? bw : bh;
    auto owner = [&](int along, int across) {
      return axis == 0 ? board.owner(along, across) : board.owner(across, along);
    };
    for (int a = 0; a < outer; ++a) {
      for (int k = 0; k < inner; ++k) {
        const int o = owner(k, a);
        if (o < 0) continue;
        if (k == 0) end[static_cast<std::size_t>(o)] = true;
        if (k == inner - 1) start[static_cast<std::size_t>(o)] = true;
        if (k + 1 < inner) {
          const int hi = owner(k + 1, a);
          if (hi >= 0 && hi != o) next[static_cast<std::size_t>(hi)].insert(o);
        }
      }
    }
    auto size_of = [&](int placement) { return 2 * board.placements()[static_cast<std::size_t>(placement)].part + axis; };
    std::vector<int> path;
    std::vector<bool> on_path(n, false);
    auto dfs = [&](auto&& self, int p) -> void {
      if (chains.size() >= max_chains) return;
      path.push_back(p);
      on_path[static_cast<std::size_t>(p)] = true;
      if (end[static_cast<std::size_t>(p)]) {
        Chain c;
        for (int q : path) c.push_back(size_of(q));
        chains.push_back(std::move(c));
      } else {
        for (int q : next[static_cast<std::size_t>(p)]) {
          if (!on_path[static_cast<std::size_t>(q)]) self(self, q);
        }
      }
      on_path[static_cast<std::size_t>(p)] = false;
      path.pop_back();
    };
    for (std::size_t p = 0; p < n; ++p) {
      if (start[p]) dfs(dfs, static_cast<int>(p));
    }
  }
  return chains;
}

namespace {

struct Groups {
  std::map<int, std::vector<int>> by_occ;  // occurrence count -> sizes
  long long total = 0;
};

Groups occurrence_groups(const std::vector<Chain>& chains, const std::vector<int>& dep) {
  std::map<int, int> occ;
  for (const Chain& c : chains) {
    std::set<int> seen(c.begin(), c.end());
    for (int s : seen) {
      if (dep[static_cast<std::size_t>(s)] > 0) ++occ[s];
    }
  }
  Groups g;
  for (const auto& [s, o] : occ) {
    g.by_occ[o].push_back(s);
    g.total += o;
  }
  return g;
}

std::vector<double> within_group(const std::vector<int>& sizes, const std::vector<int>& dep) {
  if (sizes.size() == 1) return {1.0};
  double sum = 0.0;
  for (int s : sizes) sum += dep[static_cast<std::size_t>(s)];
  std::vector<double> p;
  for (int s : sizes) p.push_back((1.0 - dep[static_cast<std::size_t>(s)] / sum) / (sizes.size() - 1.0));
  return p;
}

template <class Weights>
std::size_t sample(const Weights& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (r < acc) return i;
  }
  return w.size() - 1;
}

}  // namespace

std::vector<double> draw_probabilities(const std::vector<Chain>& chains, const std::vector<int>& dep) {
  std::vector<double> out(dep.size(), 0.0);
  const Groups g = occurrence_groups(chains, dep);
  for (const auto& [o, sizes] : g.by_occ) {
    const double po = static_cast<double>(o) * sizes.size() / g.total;
    const std::vector<double> ps = within_group(sizes, dep);
    for (std::size_t k = 0; k < sizes.size(); ++k) out[static_cast<std::size_t>(sizes[k])] = po * ps[k];
  }
  return out;
}

int draw_part_size(const std::vector<Chain>& chains, const std::vector<int>& dep, Rng& rng) {
  const Groups g = occurrence_groups(chains, dep);
  if (g.by_occ.empty()) return -1;
  std::vector<double> po;
  std::vector<const std::vector<int>*> groups;
  for (const auto& [o, sizes] : g.by_occ) {
    po.push_back(static_cast<double>(o) * sizes.size());
    groups.push_back(&sizes);
  }
  const std::vector<int>& sizes = *groups[sample(po, rng)];
  return sizes[sample(within_group(sizes, dep), rng)];
}

std::vector<int> select_part_sizes_to_shrink(std::vector<Chain> chains, const std::vector<int>& dep, Rng& rng) {
  for (Chain& c : chains) {
    std::erase_if(c, [&](int s) { return dep[static_cast<std::size_t>(s)] <= 0; });
  }
  std::erase_if(chains, [](const Chain& c) { return c.empty(); });
  std::vector<int> selected;
  while (!chains.empty()) {
    const int s = draw_part_size(chains, dep, rng);
    selected.push_back(s);
    std::erase_if(chains, [s](const Chain& c) { return std::find(c.begin(), c.end(), s) != c.end(); });
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

namespace {

int moved_sizes(SearchContext& ctx, const DesignParams& x, const DesignParams& y, const Layout& layout) {
  const std::vector<Orientation> o = layout_orientations(layout, ctx.evaluator().part_count());
  const Eigen::VectorXd a = size_vector(ctx.evaluator().evaluate(x), o);
  const Eigen::VectorXd b = size_vector(ctx.evaluator().evaluate(y), o);
  return static_cast<int>(((a - b).array().abs() > 1e-9).count());
}

std::vector<int> dependence_of(SearchContext& ctx, const DesignParams& x, const Layout& layout,
                               const std::set<int>& sizes) {
  std::vector<int> dep(2 * ctx.evaluator().part_count(), 0);
  for (int s : sizes) {
    const std::optional<DesignParams> y = ctx.change_size(x, layout, static_cast<std::size_t>(s), -1);
    if (y) dep[static_cast<std::size_t>(s)] = std::max(1, moved_sizes(ctx, x, *y, layout));
  }
  return dep;
}

}  // namespace

std::vector<int> size_dependence(SearchContext& ctx, const DesignParams& x, const Layout& layout) {
  std::set<int> all;
  for (int s = 0; s < static_cast<int>(2 * ctx.evaluator().part_count()); ++s) all.insert(s);
  return dependence_of(ctx, x, layout, all);
}

DesignParams shrink_parts(SearchContext& ctx, const DesignState& best, Rng& rng) {
  std::vector<Chain> chains = locking_chains(best.layout, 0);
  for (Chain& c : locking_chains(best.layout, 1)) chains.push_back(std::move(c));
  if (chains.empty()) return best.x;
  std::set<int> sizes;
  for (const Chain& c : chains) sizes.insert(c.begin(), c.end());
  const std::vector<int> dep = dependence_of(ctx, best.x, best.layout, sizes);
  const std::vector<int> selected = select_part_sizes_to_shrink(std::move(chains), dep, rng);
  if (selected.empty()) return best.x;
  const Eigen::MatrixXd& g = ctx.gradients(best.x, best.layout);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(g.rows());
  for (int s : selected) target[s] = -ctx.res();
  const std::optional<DesignParams> x = ctx.resize(best.x, change_part_sizes(g, best.x, target));
  return x ? *x : best.x;
}

Snapshot snapshot(const DesignState& state) { return {state.x, records(state.layout), state.wastage}; }

double replay(SearchContext& ctx, const Snapshot& s) {
  const std::optional<Layout> l = ctx.rebuild(s.x, s.placements);
  return l ? wastage(*l) : 1.0;
}

DesignState improve_design(SearchContext& ctx, const DesignParams& x, const Ordering& order, Rng& rng,
                           int iterations, std::vector<Snapshot>* path) {
  DesignState best = make_state(x, ctx.dock(x, order));
  if (best.layout.empty()) return best;
  DesignState current = best;
  auto adopt = [&](DesignState s) {
    best = std::move(s);
    if (path) path->push_back(snapshot(best));
  };
  for (int it = 0; it < iterations && best.wastage > 0.0; ++it) {
    DesignState grown = grow_parts(ctx, best, current, order, rng);
    if (grown.wastage < best.wastage) adopt(std::move(grown));
    DesignParams shrunk = shrink_parts(ctx, best, rng);
    Layout l = ctx.slide(best.layout, shrunk);
    if (l.empty()) l = ctx.dock(shrunk, order);
    current = make_state(std::move(shrunk), std::move(l));
    if (current.wastage < best.wastage) adopt(current);
  }
  return best;
}

Rng task_rng(std::uint64_t seed, std::uint64_t generation, std::uint64_t phase, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(phase),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

namespace {

// Runs task(ctx, i) for i in [0, n) on up to `workers` threads, each owning
// its own SearchContext.
template <class Task>
void run_tasks(const Problem& problem, std::size_t n, int workers, const std::atomic<bool>* cancel, Task task) {
  const std::size_t threads = std::min<std::size_t>(std::max(1, workers), n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    SearchContext ctx(problem);
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (cancel && cancel->load()) return;
      try {
        task(ctx, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

struct Member {
  DesignParams x;
  Ordering order;
  Layout layout;
  double wastage = 1.0;
  std::vector<Snapshot> path;
};

void keep_bests(std::vector<Member>& pop, std::size_t k) {
  std::stable_sort(pop.begin(), pop.end(), [](const Member& a, const Member& b) { return a.wastage < b.wastage; });
  std::vector<Member> kept;
  for (Member& m : pop) {
    if (kept.size() >= k) break;
    const bool dup = std::any_of(kept.begin(), kept.end(),
                                 [&](const Member& q) { return q.x == m.x && q.order == m.order; });
    if (!dup) kept.push_back(std::move(m));
  }
  pop = std::move(kept);
}

}  // namespace

SearchResult min_wastage(const Problem& problem, const DesignParams& start, const SearchConfig& config,
                         const std::function<void(const SearchProgress&)>& progress,
                         const std::atomic<bool>* cancel) {
  SearchResult out;
  SearchContext root(problem);
  const Ordering identity = identity_ordering(problem.evaluator->part_count());
  const DesignState s0 = make_state(start, root.dock(start, identity));
  if (s0.layout.empty()) {
    out.diagnostic = "start design does not fit on the master boards";
    return out;
  }
  std::vector<Member> pop = {{s0.x, identity, s0.layout, s0.wastage, {snapshot(s0)}}};

  for (int g = 0; g < config.generations; ++g) {
    if (cancel && cancel->load()) break;
    std::vector<std::vector<Ordering>> orderings(pop.size());
    run_tasks(problem, pop.size(), config.workers, cancel, [&](SearchContext& ctx, std::size_t i) {
      Rng rng = task_rng(config.seed, static_cast<std::uint64_t>(g), 0, i);
      orderings[i] = explore_orderings(ctx, pop[i].x, pop[i].order, rng, config.orderings);
    });
    std::vector<std::pair<std::size_t, Ordering>> jobs;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      for (const Ordering& o : orderings[i]) jobs.emplace_back(i, o);
    }
    std::vector<std::optional<Member>> found(jobs.size());
    run_tasks(problem, jobs.size(), config.workers, cancel, [&](SearchContext& ctx, std::size_t t) {
      const auto& [i, order] = jobs[t];
      Rng rng = task_rng(config.seed, static_cast<std::uint64_t>(g), 1, t);
      std::vector<Snapshot> path = pop[i].path;
      DesignState s = improve_design(ctx, pop[i].x, order, rng, config.improve_iterations, &path);
      if (s.layout.empty()) return;
      found[t] = Member{std::move(s.x), order, std::move(s.layout), s.wastage, std::move(path)};
    });
    if (cancel && cancel->load()) break;
    for (auto& m : found) {
      if (m) pop.push_back(std::move(*m));
    }
    keep_bests(pop, config.keep);
    if (progress) progress({g + 1, config.generations});
  }
  out.cancelled = cancel && cancel->load();

  std::vector<ExplorationResult> results(pop.size());
  run_tasks(problem, pop.size(), config.workers, nullptr, [&](SearchContext& ctx, std::size_t i) {
    Member& m = pop[i];
    ExplorationResult& r = results[i];
    Layout docked = ctx.dock(m.x, m.order);
    const bool redock = !docked.empty() && wastage(docked) < m.wastage;
    r.x = m.x;
    r.ordering = m.order;
    r.layout = redock ? std::move(docked) : std::move(m.layout);
    r.wastage = wastage(r.layout);
    r.path = std::move(m.path);
    if (r.path.empty() || r.path.back().x != r.x || r.path.back().placements != records(r.layout)) {
      r.path.push_back({r.x, records(r.layout), r.wastage});
    }
  });
  std::stable_sort(results.begin(), results.end(),
                   [](const ExplorationResult& a, const ExplorationResult& b) { return a.wastage < b.wastage; });
  out.results = std::move(results);
  return out;
}

std::vector<std::size_t> select_suggestions(const std::vector<ExplorationResult>& results,
                                            const DesignEvaluator& evaluator, std::size_t n) {
  std::vector<std::size_t> picked;
  if (results.empty() || n == 0) return picked;
  std::vector<Eigen::VectorXd> lengths;
  for (const ExplorationResult& r : results) {
    const std::vector<Part> parts = evaluator.evaluate(r.x);
    Eigen::VectorXd v(static_cast<Eigen::Index>(2 * parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      v[static_cast<Eigen::Index>(2 * i)] = parts[i].lx;
      v[static_cast<Eigen::Index>(2 * i + 1)] = parts[i].ly;
    }
    lengths.push_back(std::move(v));
  }
  std::vector<double> nearest(results.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> used(results.size(), false);
  std::size_t cur = 0;
  while (true) {
    picked.push_back(cur);
    used[cur] = true;
    if (picked.size() >= std::min(n, results.size())) break;
    std::size_t far = results.size();
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (used[i]) continue;
      nearest[i] = std::min(nearest[i], (lengths[i] - lengths[cur]).norm());
      if (far == results.size() || nearest[i] > nearest[far]) far = i;
    }
    cur = far;
  }
  return picked;
}

}  // namespace offcut
