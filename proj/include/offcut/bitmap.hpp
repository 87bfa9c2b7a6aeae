#pragma once

// Part rasterization. Masks are stored row-major with row 0 at the bottom
// (material v = 0) and column 0 at the left (u = 0).

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "offcut/design.hpp"

namespace offcut {

inline constexpr double kDefaultRasterRes = 0.5;  // mm per pixel

struct PixelRun {
  int begin = 0;
  int end = 0;  // exclusive
};

class PartBitmap {
 public:
  PartBitmap(int part_id, Orientation o, int width, int height, double res, std::vector<std::uint8_t> mask);

  int part_id() const { return id_; }
  Orientation orientation() const { return o_; }
  int width() const { return w_; }
  int height() const { return h_; }
  double res() const { return res_; }
  long long area() const { return area_; }

  bool at(int col, int row) const { return mask_[static_cast<std::size_t>(row) * w_ + col] != 0; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  // Height-fields. An empty column has top == 0; an empty row has right == 0.
  int bottom(int col) const { return bottom_[col]; }
  int top(int col) const { return top_[col]; }
  int left(int row) const { return left_[row]; }
  int right(int row) const { return right_[row]; }

  /// Filled extent measured from the bitmap origin (max right / max top).
  int extent_w() const { return extent_w_; }
  int extent_h() const { return extent_h_; }

  const std::vector<PixelRun>& row_runs(int row) const { return row_runs_[row]; }
  const std::vector<PixelRun>& col_runs(int col) const { return col_runs_[col]; }

  /// Mask rotated a quarter turn counter-clockwise, tagged with `o`.
  PartBitmap rotated_ccw(Orientation o) const;

  friend bool operator==(const PartBitmap& a, const PartBitmap& b) {
    return a.w_ == b.w_ && a.h_ == b.h_ && a.mask_ == b.mask_;
  }

 private:
  int id_;
  Orientation o_;
  int w_;
  int h_;
  double res_;
  std::vector<std::uint8_t> mask_;
  long long area_ = 0;
  std::vector<int> bottom_, top_, left_, right_;
  int extent_w_ = 0;
  int extent_h_ = 0;
  std::vector<std::vector<PixelRun>> row_runs_, col_runs_;
};

/// Pixel count along an extent: ceil(length / res).
int pixel_count(double length, double res);

/// Pixel (i, j) is set iff its center lies inside the contour.
/// Throws EmptyBitmap for degenerate contours or empty masks.
PartBitmap rasterize(const Part& part, double res, Orientation o = Orientation::R0);

/// The four orientation masks of one part.
struct RasterPart {
  int id = 0;
  std::array<std::shared_ptr<const PartBitmap>, 4> bitmaps;

  const PartBitmap& at(Orientation o) const { return *bitmaps[static_cast<std::size_t>(o)]; }
  const std::shared_ptr<const PartBitmap>& ptr(Orientation o) const {
    return bitmaps[static_cast<std::size_t>(o)];
  }
};

RasterPart rasterize_all_orientations(const Part& part, double res);

/// Worker-local memo of rasterized parts keyed by (id, lx, ly). Valid for a
/// single design, where a part's contour is a function of its lengths.
class Rasterizer {
 public:
  explicit Rasterizer(double res = kDefaultRasterRes) : res_(res) {}

  double res() const { return res_; }
  const RasterPart& get(const Part& part);
  std::vector<RasterPart> get_all(const std::vector<Part>& parts);

 private:
  double res_;
  std::map<std::tuple<int, double, double>, RasterPart> cache_;
};

}  // namespace offcut
