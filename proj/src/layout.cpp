#include "offcut/layout.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "offcut/error.hpp"

namespace offcut {

Board::Board(BoardSize size)
    : size_(size),
      owner_(static_cast<std::size_t>(size.width) * size.height, -1),
      top_(size.width, 0),
      right_(size.height, 0) {}

long long Board::box_area_with(const PartBitmap& bmp, Position pos) const {
  const long long w = std::max(box_w_, pos.u + bmp.extent_w());
  const long long h = std::max(box_h_, pos.v + bmp.extent_h());
  return w * h;
}

bool Board::inside(const PartBitmap& bmp, Position pos) const {
  return pos.u >= 0 && pos.v >= 0 && pos.u + bmp.width() <= size_.width && pos.v + bmp.height() <= size_.height;
}

bool Board::overlaps(const PartBitmap& bmp, Position pos) const {
  for (int r = 0; r < bmp.height(); ++r) {
    const int row = pos.v + r;
    if (row < 0 || row >= size_.height) {
      if (!bmp.row_runs(r).empty()) return true;
      continue;
    }
    for (const PixelRun& run : bmp.row_runs(r)) {
      for (int c = run.begin; c < run.end; ++c) {
        const int col = pos.u + c;
        if (col < 0 || col >= size_.width || owner(col, row) >= 0) return true;
      }
    }
  }
  return false;
}

void Board::place(int part, std::shared_ptr<const PartBitmap> bmp, Position pos) {
  const auto index = static_cast<std::int16_t>(placements_.size());
  for (int r = 0; r < bmp->height(); ++r) {
    for (const PixelRun& run : bmp->row_runs(r)) {
      for (int c = run.begin; c < run.end; ++c) {
        owner_[static_cast<std::size_t>(pos.v + r) * size_.width + pos.u + c] = index;
      }
    }
    if (bmp->right(r) > 0) right_[pos.v + r] = std::max(right_[pos.v + r], pos.u + bmp->right(r));
  }
  for (int c = 0; c < bmp->width(); ++c) {
    if (bmp->top(c) > 0) top_[pos.u + c] = std::max(top_[pos.u + c], pos.v + bmp->top(c));
  }
  part_area_ += bmp->area();
  box_w_ = std::max(box_w_, pos.u + bmp->extent_w());
  box_h_ = std::max(box_h_, pos.v + bmp->extent_h());
  placements_.push_back({part, pos, std::move(bmp)});
}

std::optional<Position> Board::dock_position(const PartBitmap& bmp, DropSide side, int x) const {
  if (side == DropSide::Top) {
    if (x < 0 || x + bmp.width() > size_.width) return std::nullopt;
    int v = 0;
    for (int c = 0; c < bmp.width(); ++c) {
      if (bmp.top(c) > 0) v = std::max(v, top_[x + c] - bmp.bottom(c));
    }
    if (v + bmp.height() > size_.height) return std::nullopt;
    return Position{x, v};
  }
  if (x < 0 || x + bmp.height() > size_.height) return std::nullopt;
  int u = 0;
  for (int r = 0; r < bmp.height(); ++r) {
    if (bmp.right(r) > 0) u = std::max(u, right_[x + r] - bmp.left(r));
  }
  if (u + bmp.width() > size_.width) return std::nullopt;
  return Position{u, x};
}

long long Board::enclosed_area(const PartBitmap& bmp, Position pos) const {
  long long top_gain = 0;
  for (int c = 0; c < bmp.width(); ++c) {
    if (bmp.top(c) == 0) continue;
    const int before = top_[pos.u + c];
    top_gain += std::max(before, pos.v + bmp.top(c)) - before;
  }
  long long right_gain = 0;
  for (int r = 0; r < bmp.height(); ++r) {
    if (bmp.right(r) == 0) continue;
    const int before = right_[pos.v + r];
    right_gain += std::max(before, pos.u + bmp.right(r)) - before;
  }
  return std::max(0LL, right_gain - bmp.area()) + std::max(0LL, top_gain - bmp.area());
}

bool Layout::empty() const {
  return std::all_of(boards.begin(), boards.end(), [](const Board& b) { return b.empty(); });
}

std::size_t Layout::placement_count() const {
  std::size_t n = 0;
  for (const Board& b : boards) n += b.placements().size();
  return n;
}

const Placement* Layout::find(int part) const {
  for (const Board& b : boards) {
    for (const Placement& p : b.placements()) {
      if (p.part == part) return &p;
    }
  }
  return nullptr;
}

int Layout::board_of(int part) const {
  for (std::size_t k = 0; k < boards.size(); ++k) {
    for (const Placement& p : boards[k].placements()) {
      if (p.part == part) return static_cast<int>(k);
    }
  }
  return -1;
}

namespace {

struct Usage {
  long long parts = 0;
  long long box = 0;
};

Usage usage(const Layout& layout) {
  Usage u;
  for (const Board& b : layout.boards) {
    u.parts += b.part_area();
    u.box += b.box_area();
  }
  return u;
}

// a.parts / a.box > b.parts / b.box, treating an empty box as usage 0.
bool better_usage(Usage a, Usage b) {
  if (a.box == 0) return false;
  if (b.box == 0) return a.parts > 0;
  return static_cast<__int128>(a.parts) * b.box > static_cast<__int128>(b.parts) * a.box;
}

}  // namespace

double wastage(const Board& board) {
  if (board.box_area() == 0) return 1.0;
  return 1.0 - static_cast<double>(board.part_area()) / static_cast<double>(board.box_area());
}

double wastage(const Layout& layout) {
  const Usage u = usage(layout);
  if (u.box == 0) return 1.0;
  return 1.0 - static_cast<double>(u.parts) / static_cast<double>(u.box);
}

bool less_wastage(const Layout& a, const Layout& b) { return better_usage(usage(a), usage(b)); }

Ordering identity_ordering(std::size_t n) {
  Ordering o(n);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

namespace {

struct DropScore {
  long long parts = 0;
  long long box = 0;
  long long enclosed = 0;
};

// Lexicographic (wastage, enclosed area); usage compared by cross-multiplication.
bool better(const DropScore& a, const DropScore& b, bool use_enclosed) {
  const __int128 lhs = static_cast<__int128>(a.parts) * b.box;
  const __int128 rhs = static_cast<__int128>(b.parts) * a.box;
  if (lhs != rhs) return lhs > rhs;
  return use_enclosed && a.enclosed < b.enclosed;
}

bool dock_on(Board& board, int part, const RasterPart& raster, const DockingOptions& options) {
  std::optional<DropScore> best;
  Position best_pos;
  Orientation best_o = Orientation::R0;
  for (DropSide side : {DropSide::Right, DropSide::Top}) {
    const int extent = side == DropSide::Top ? board.size().width : board.size().height;
    for (int x = 0; x < extent; ++x) {
      for (Orientation o : kOrientations) {
        const PartBitmap& bmp = raster.at(o);
        const auto pos = board.dock_position(bmp, side, x);
        if (!pos) continue;
        DropScore s{board.part_area() + bmp.area(), board.box_area_with(bmp, *pos), 0};
        if (options.enclosed_area_tiebreak) s.enclosed = board.enclosed_area(bmp, *pos);
        if (!best || better(s, *best, options.enclosed_area_tiebreak)) {
          best = s;
          best_pos = *pos;
          best_o = o;
        }
      }
    }
  }
  if (!best) return false;
  board.place(part, raster.ptr(best_o), best_pos);
  return true;
}

}  // namespace

Layout docking(const std::vector<RasterPart>& parts, const Ordering& order, const std::vector<BoardSize>& boards,
               const DockingOptions& options) {
  Layout layout;
  for (const BoardSize& b : boards) layout.boards.emplace_back(b);
  for (int part : order) {
    bool placed = false;
    for (Board& board : layout.boards) {
      if (dock_on(board, part, parts[static_cast<std::size_t>(part)], options)) {
        placed = true;
        break;
      }
    }
    if (!placed) throw PackingOverflow("part " + std::to_string(part) + " fits on no master board");
  }
  return layout;
}

namespace {

// Largest leftward shift that closes the gap to the nearest obstacle, or
// nullopt when the part currently collides.
std::optional<int> left_free_interval(const Board& board, const PartBitmap& bmp, Position pos) {
  if (!board.fits(bmp, pos)) return std::nullopt;
  int gap = pos.u;
  for (int r = 0; r < bmp.height() && gap > 0; ++r) {
    const int row = pos.v + r;
    for (const PixelRun& run : bmp.row_runs(r)) {
      const int start = pos.u + run.begin;
      int d = 0;
      while (d < gap && start - d - 1 >= 0 && board.owner(start - d - 1, row) < 0) ++d;
      gap = std::min(gap, d);
    }
  }
  return gap;
}

std::optional<int> bottom_free_interval(const Board& board, const PartBitmap& bmp, Position pos) {
  if (!board.fits(bmp, pos)) return std::nullopt;
  int gap = pos.v;
  for (int c = 0; c < bmp.width() && gap > 0; ++c) {
    const int col = pos.u + c;
    for (const PixelRun& run : bmp.col_runs(c)) {
      const int start = pos.v + run.begin;
      int d = 0;
      while (d < gap && start - d - 1 >= 0 && board.owner(col, start - d - 1) < 0) ++d;
      gap = std::min(gap, d);
    }
  }
  return gap;
}

// Smallest positive shift right (or up) giving a valid placement.
std::optional<int> right_decollision(const Board& board, const PartBitmap& bmp, Position pos) {
  for (int s = 1; pos.u + s + bmp.width() <= board.size().width; ++s) {
    if (board.fits(bmp, {pos.u + s, pos.v})) return s;
  }
  return std::nullopt;
}

std::optional<int> top_decollision(const Board& board, const PartBitmap& bmp, Position pos) {
  for (int s = 1; pos.v + s + bmp.height() <= board.size().height; ++s) {
    if (board.fits(bmp, {pos.u, pos.v + s})) return s;
  }
  return std::nullopt;
}

constexpr long long kNoArea = std::numeric_limits<long long>::max();

}  // namespace

Layout slide(const Layout& previous, const std::vector<RasterPart>& parts, int iterations) {
  Layout out;
  for (const Board& prev : previous.boards) {
    Board board(prev.size());
    for (const Placement& old : prev.placements()) {
      const auto& bmp_ptr = parts[static_cast<std::size_t>(old.part)].ptr(old.orientation());
      const PartBitmap& bmp = *bmp_ptr;
      Position pos = old.pos;
      for (int it = 0; it < iterations; ++it) {
        std::optional<int> dx;
        if (auto g = left_free_interval(board, bmp, pos)) {
          dx = -*g;
        } else {
          dx = right_decollision(board, bmp, pos);
        }
        std::optional<int> dy;
        if (auto g = bottom_free_interval(board, bmp, pos)) {
          dy = -*g;
        } else {
          dy = top_decollision(board, bmp, pos);
        }
        if (!dx && !dy) return {};
        const std::optional<Position> pos_x = dx ? std::optional<Position>({pos.u + *dx, pos.v}) : std::nullopt;
        const std::optional<Position> pos_y = dy ? std::optional<Position>({pos.u, pos.v + *dy}) : std::nullopt;
        if (pos_x == pos && pos_y == pos) break;
        const long long ax = pos_x ? board.box_area_with(bmp, *pos_x) : kNoArea;
        const long long ay = pos_y ? board.box_area_with(bmp, *pos_y) : kNoArea;
        if (ax < ay) {
          pos = *pos_x;
        } else if (ax > ay) {
          pos = *pos_y;
        } else if (dx && dy && *dx < *dy && *dx != 0) {
          pos = *pos_x;
        } else {
          pos = pos_y ? *pos_y : *pos_x;
        }
      }
      if (!board.fits(bmp, pos)) return {};
      board.place(old.part, bmp_ptr, pos);
    }
    out.boards.push_back(std::move(board));
  }
  return out;
}

bool is_valid(const Layout& layout) {
  for (const Board& board : layout.boards) {
    Board replay(board.size());
    for (const Placement& p : board.placements()) {
      if (!replay.fits(*p.bitmap, p.pos)) return false;
      replay.place(p.part, p.bitmap, p.pos);
    }
    if (replay.top_skyline() != board.top_skyline() || replay.right_skyline() != board.right_skyline()) return false;
    for (int r = 0; r < board.size().height; ++r) {
      for (int c = 0; c < board.size().width; ++c) {
        if (replay.owner(c, r) != board.owner(c, r)) return false;
      }
    }
  }
  return true;
}

}  // namespace offcut
