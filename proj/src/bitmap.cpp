#include "offcut/bitmap.hpp"

#include <algorithm>
#include <cmath>

#include "offcut/error.hpp"

namespace offcut {

PartBitmap::PartBitmap(int part_id, Orientation o, int width, int height, double res,
                       std::vector<std::uint8_t> mask)
    : id_(part_id), o_(o), w_(width), h_(height), res_(res), mask_(std::move(mask)) {
  bottom_.assign(w_, h_);
  top_.assign(w_, 0);
  left_.assign(h_, w_);
  right_.assign(h_, 0);
  row_runs_.resize(h_);
  col_runs_.resize(w_);
  for (int r = 0; r < h_; ++r) {
    for (int c = 0; c < w_; ++c) {
      if (!at(c, r)) continue;
      ++area_;
      bottom_[c] = std::min(bottom_[c], r);
      top_[c] = std::max(top_[c], r + 1);
      left_[r] = std::min(left_[r], c);
      right_[r] = std::max(right_[r], c + 1);
    }
  }
  for (int r = 0; r < h_; ++r) {
    for (int c = 0; c < w_;) {
      if (!at(c, r)) {
        ++c;
        continue;
      }
      const int b = c;
      while (c < w_ && at(c, r)) ++c;
      row_runs_[r].push_back({b, c});
    }
    extent_w_ = std::max(extent_w_, right_[r]);
  }
  for (int c = 0; c < w_; ++c) {
    for (int r = 0; r < h_;) {
      if (!at(c, r)) {
        ++r;
        continue;
      }
      const int b = r;
      while (r < h_ && at(c, r)) ++r;
      col_runs_[c].push_back({b, r});
    }
    extent_h_ = std::max(extent_h_, top_[c]);
  }
}

PartBitmap PartBitmap::rotated_ccw(Orientation o) const {
  // (col, row) -> (h - 1 - row, col)
  const int nw = h_;
  const int nh = w_;
  std::vector<std::uint8_t> m(static_cast<std::size_t>(nw) * nh, 0);
  for (int r = 0; r < h_; ++r) {
    for (int c = 0; c < w_; ++c) {
      if (at(c, r)) m[static_cast<std::size_t>(c) * nw + (h_ - 1 - r)] = 1;
    }
  }
  return PartBitmap(id_, o, nw, nh, res_, std::move(m));
}

int pixel_count(double length, double res) {
  return std::max(0, static_cast<int>(std::ceil(length / res - 1e-9)));
}

namespace {

PartBitmap rasterize_r0(const Part& part, double res) {
  if (part.contour.size() < 3 || std::abs(signed_area(part.contour)) <= 0.0) {
    throw EmptyBitmap("part " + std::to_string(part.id) + " has a degenerate contour");
  }
  const int w = pixel_count(part.lx, res);
  const int h = pixel_count(part.ly, res);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  const Polygon& poly = part.contour;
  std::vector<double> xs;
  for (int r = 0; r < h; ++r) {
    const double y = (r + 0.5) * res;
    xs.clear();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Vec2 a = poly[k];
      const Vec2 b = poly[(k + 1) % poly.size()];
      if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
        xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // centers (c + 0.5) * res in [xs[k], xs[k+1])
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] / res - 0.5)));
      const int c1 = std::min(w, static_cast<int>(std::ceil(xs[k + 1] / res - 0.5)));
      for (int c = c0; c < c1; ++c) mask[static_cast<std::size_t>(r) * w + c] = 1;
    }
  }
  PartBitmap bmp(part.id, Orientation::R0, w, h, res, std::move(mask));
  if (bmp.area() == 0) throw EmptyBitmap("part " + std::to_string(part.id) + " covers no pixel center");
  return bmp;
}

}  // namespace

PartBitmap rasterize(const Part& part, double res, Orientation o) {
  PartBitmap bmp = rasterize_r0(part, res);
  for (int k = 0; k < static_cast<int>(o); ++k) {
    bmp = bmp.rotated_ccw(static_cast<Orientation>(k + 1));
  }
  return bmp;
}

RasterPart rasterize_all_orientations(const Part& part, double res) {
  RasterPart out;
  out.id = part.id;
  PartBitmap bmp = rasterize_r0(part, res);
  for (std::size_t k = 0; k < 4; ++k) {
    auto next = k + 1 < 4 ? bmp.rotated_ccw(static_cast<Orientation>(k + 1)) : bmp;
    out.bitmaps[k] = std::make_shared<const PartBitmap>(std::move(bmp));
    bmp = std::move(next);
  }
  return out;
}

const RasterPart& Rasterizer::get(const Part& part) {
  const auto key = std::make_tuple(part.id, part.lx, part.ly);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  if (cache_.size() > 4096) cache_.clear();
  return cache_.emplace(key, rasterize_all_orientations(part, res_)).first->second;
}

std::vector<RasterPart> Rasterizer::get_all(const std::vector<Part>& parts) {
  std::vector<RasterPart> out;
  out.reserve(parts.size());
  for (const Part& p : parts) out.push_back(get(p));
  return out;
}

}  // namespace offcut
