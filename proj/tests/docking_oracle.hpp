#pragma once

#include <vector>

#include "offcut/layout.hpp"

namespace offcut::testing {

struct UsageRatio {
  long long parts = 0;
  long long box = 1;

  bool operator<(const UsageRatio& o) const { return parts * o.box < o.parts * box; }
  double value() const { return static_cast<double>(parts) / static_cast<double>(box); }
};

namespace detail {
inline void exhaustive_step(const Board& board, const std::vector<RasterPart>& parts, const Ordering& order,
                            std::size_t k, UsageRatio& best) {
  if (k == order.size()) {
    const UsageRatio u{board.part_area(), board.box_area()};
    if (best < u) best = u;
    return;
  }
  const RasterPart& part = parts[static_cast<std::size_t>(order[k])];
  for (DropSide side : {DropSide::Right, DropSide::Top}) {
    const int extent = side == DropSide::Top ? board.size().width : board.size().height;
    for (int x = 0; x < extent; ++x) {
      for (Orientation o : kOrientations) {
        const auto pos = board.dock_position(part.at(o), side, x);
        if (!pos) continue;
        Board next = board;
        next.place(order[k], part.ptr(o), *pos);
        exhaustive_step(next, parts, order, k + 1, best);
      }
    }
  }
}
}  // namespace detail

/// Best final usage over every sequence of drop locations (single board).
inline UsageRatio exhaustive_docking_usage(const std::vector<RasterPart>& parts, const Ordering& order,
                                           BoardSize board) {
  UsageRatio best{0, 1};
  detail::exhaustive_step(Board(board), parts, order, 0, best);
  return best;
}

}  // namespace offcut::testing
