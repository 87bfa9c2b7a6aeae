#pragma once

// Discretized master-board layouts: occupancy, right/top skylines, docking
// and sliding.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "offcut/bitmap.hpp"

namespace offcut {

struct BoardSize {
  int width = 0;   // px
  int height = 0;  // px

  friend bool operator==(const BoardSize&, const BoardSize&) = default;
};

struct Position {
  int u = 0;
  int v = 0;

  friend bool operator==(const Position&, const Position&) = default;
};

struct Placement {
  int part = 0;  // index into the design's part list
  Position pos;
  std::shared_ptr<const PartBitmap> bitmap;

  Orientation orientation() const { return bitmap->orientation(); }
};

enum class DropSide : std::uint8_t { Right, Top };

/// One master board.
class Board {
 public:
  Board() = default;
  explicit Board(BoardSize size);

  BoardSize size() const { return size_; }
  const std::vector<Placement>& placements() const { return placements_; }
  bool empty() const { return placements_.empty(); }

  /// Index into placements() of the part covering a pixel, or -1.
  int owner(int col, int row) const { return owner_[static_cast<std::size_t>(row) * size_.width + col]; }

  /// Top skyline: highest occupied row + 1 per column.
  const std::vector<int>& top_skyline() const { return top_; }
  /// Right skyline: rightmost occupied column + 1 per row.
  const std::vector<int>& right_skyline() const { return right_; }

  long long part_area() const { return part_area_; }
  /// Bounding rectangle of the occupied pixels, anchored at the board origin.
  int box_width() const { return box_w_; }
  int box_height() const { return box_h_; }
  long long box_area() const { return static_cast<long long>(box_w_) * box_h_; }
  /// Box area after adding `bmp` at `pos`.
  long long box_area_with(const PartBitmap& bmp, Position pos) const;

  bool inside(const PartBitmap& bmp, Position pos) const;
  bool overlaps(const PartBitmap& bmp, Position pos) const;
  /// Inside the board and free of overlap.
  bool fits(const PartBitmap& bmp, Position pos) const { return inside(bmp, pos) && !overlaps(bmp, pos); }

  /// Adds a placement; the caller guarantees fits().
  void place(int part, std::shared_ptr<const PartBitmap> bmp, Position pos);

  /// Drop `bmp` from the given side at offset x until skyline contact.
  std::optional<Position> dock_position(const PartBitmap& bmp, DropSide side, int x) const;

  /// Area sealed off between the layout skylines and the part, right plus top.
  long long enclosed_area(const PartBitmap& bmp, Position pos) const;

 private:
  BoardSize size_;
  std::vector<Placement> placements_;
  std::vector<std::int16_t> owner_;
  std::vector<int> top_;
  std::vector<int> right_;
  long long part_area_ = 0;
  int box_w_ = 0;
  int box_h_ = 0;
};

/// Parts spread over the master boards; extra boards act as overflow.
struct Layout {
  std::vector<Board> boards;

  bool empty() const;
  std::size_t placement_count() const;
  /// Placement of design part `part`, or nullptr.
  const Placement* find(int part) const;
  /// Board index of design part `part`, or -1.
  int board_of(int part) const;
};

/// 1 - sum(part areas) / sum(box areas) over the boards; 1 for the empty layout.
double wastage(const Layout& layout);
double wastage(const Board& board);

/// True when a's wastage is strictly below b's (exact integer comparison).
bool less_wastage(const Layout& a, const Layout& b);

using Ordering = std::vector<int>;

Ordering identity_ordering(std::size_t n);

struct DockingOptions {
  /// Break wastage ties with the enclosed area; off gives the wastage-only baseline.
  bool enclosed_area_tiebreak = true;
};

/// Places parts in `order`, scanning every (side, x, o) drop location.
/// Parts that fit no location on a board move on to the next one; throws
/// PackingOverflow when a part fits nowhere.
Layout docking(const std::vector<RasterPart>& parts, const Ordering& order, const std::vector<BoardSize>& boards,
               const DockingOptions& options = {});

inline constexpr int kSlideIterations = 4;

/// Re-inserts the parts of `previous` with their new bitmaps, keeping each
/// placement's board and orientation, and repairs gaps and overlaps with at
/// most kSlideIterations axis moves per part. Returns the empty layout when a
/// part cannot fit.
Layout slide(const Layout& previous, const std::vector<RasterPart>& parts, int iterations = kSlideIterations);

/// Overlap-free, every placement inside its board, skylines consistent.
bool is_valid(const Layout& layout);

}  // namespace offcut
