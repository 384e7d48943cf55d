#include "handfit/depth_encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace handfit {

int DepthFrame::valid_count() const {
  int n = 0;
  for (uint8_t v : valid) n += v != 0;
  return n;
}

namespace {

struct CropRect {
  double u0, v0, u1, v1;
};

// 2D footprint of the metric cube at the crop center depth.
CropRect cube_rect(const CameraIntrinsics& cam, const Eigen::Vector3d& center, double side) {
  const double half = 0.5 * side;
  CropRect r;
  r.u0 = cam.fx * (center.x() - half) / center.z() + cam.cx;
  r.u1 = cam.fx * (center.x() + half) / center.z() + cam.cx;
  r.v0 = cam.fy * (center.y() - half) / center.z() + cam.cy;
  r.v1 = cam.fy * (center.y() + half) / center.z() + cam.cy;
  return r;
}

}  // namespace

DepthFrame preprocess(const DepthImage& raw, const CameraIntrinsics& cam,
                      const Eigen::Vector3d& crop_center, double crop_side_mm,
                      int out_size) {
  if (!(crop_center.z() > 0.0)) throw ValidationError("crop_center.z must be positive");
  if (out_size < 1) throw ValidationError("output size must be >= 1");
  const double half = 0.5 * crop_side_mm;

  // Pass 1: average depth of valid pixels inside the cube about crop_center.
  CropRect rect = cube_rect(cam, crop_center, crop_side_mm);
  double sum = 0.0;
  long count = 0;
  const int x0 = std::max(0, static_cast<int>(std::floor(rect.u0)));
  const int x1 = std::min(raw.width, static_cast<int>(std::ceil(rect.u1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(rect.v0)));
  const int y1 = std::min(raw.height, static_cast<int>(std::ceil(rect.v1)));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double d = raw.at(x, y);
      if (d > 0.0 && std::abs(d - crop_center.z()) <= half) {
        sum += d;
        ++count;
      }
    }
  }
  if (count == 0) throw EmptyCrop("no valid depth pixel inside the crop cube");

  // Pass 2: same cube re-centered at the average depth.
  Eigen::Vector3d center = crop_center;
  center.z() = sum / static_cast<double>(count);
  rect = cube_rect(cam, center, crop_side_mm);

  DepthFrame frame;
  frame.width = out_size;
  frame.height = out_size;
  frame.depth_mm.assign(static_cast<size_t>(out_size) * out_size, 0.0);
  frame.normalized.assign(static_cast<size_t>(out_size) * out_size, 0.0);
  frame.valid.assign(static_cast<size_t>(out_size) * out_size, 0);
  frame.crop_center = center;
  frame.crop_side_mm = crop_side_mm;

  const double su = out_size / (rect.u1 - rect.u0);
  const double sv = out_size / (rect.v1 - rect.v0);
  frame.crop_cam.fx = cam.fx * su;
  frame.crop_cam.fy = cam.fy * sv;
  frame.crop_cam.cx = (cam.cx - rect.u0) * su;
  frame.crop_cam.cy = (cam.cy - rect.v0) * sv;

  int n_valid = 0;
  for (int y = 0; y < out_size; ++y) {
    for (int x = 0; x < out_size; ++x) {
      // Nearest source pixel under the continuous crop->raw mapping.
      const double u = rect.u0 + (x + 0.5) / su;
      const double v = rect.v0 + (y + 0.5) / sv;
      const int sx = static_cast<int>(std::floor(u));
      const int sy = static_cast<int>(std::floor(v));
      if (sx < 0 || sx >= raw.width || sy < 0 || sy >= raw.height) continue;
      const double d = raw.at(sx, sy);
      if (d <= 0.0 || std::abs(d - center.z()) > half) continue;
      const size_t idx = static_cast<size_t>(y) * out_size + x;
      frame.depth_mm[idx] = d;
      frame.normalized[idx] = (d - center.z()) / half;
      frame.valid[idx] = 1;
      ++n_valid;
    }
  }
  if (n_valid == 0) throw EmptyCrop("re-centered crop contains no valid pixel");
  return frame;
}

namespace {

struct Region {
  int x, y, w, h;
};

struct RegionStats {
  int valid = 0;
  double sum = 0.0;
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
};

RegionStats scan(const DepthFrame& f, const Region& r) {
  RegionStats s;
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      if (!f.is_valid(x, y)) continue;
      const double d = f.depth_at(x, y);
      ++s.valid;
      s.sum += d;
      s.lo = std::min(s.lo, d);
      s.hi = std::max(s.hi, d);
    }
  }
  return s;
}

void split(const DepthFrame& f, double c, const Region& r, std::vector<QuadtreeLeaf>& out) {
  const RegionStats s = scan(f, r);
  const bool homogeneous = s.valid == 0 || (s.hi - s.lo) < c;
  if (homogeneous || (r.w == 1 && r.h == 1)) {
    QuadtreeLeaf leaf;
    leaf.x = r.x;
    leaf.y = r.y;
    leaf.w = r.w;
    leaf.h = r.h;
    leaf.valid_count = s.valid;
    if (s.valid > 0) {
      leaf.blob.mu_px = {r.x + 0.5 * r.w, r.y + 0.5 * r.h};
      leaf.blob.sigma_px = 0.5 * std::max(r.w, r.h);
      leaf.blob.z_mm = s.sum / s.valid;
    }
    out.push_back(leaf);
    return;
  }
  // Ceil/floor halves; degenerate (zero-area) quadrants are skipped, which
  // keeps 1-wide strips splitting along the long side only.
  const int wl = r.w - r.w / 2;
  const int wr = r.w / 2;
  const int ht = r.h - r.h / 2;
  const int hb = r.h / 2;
  const Region quads[4] = {
      {r.x, r.y, wl, ht},            // NW
      {r.x + wl, r.y, wr, ht},       // NE
      {r.x, r.y + ht, wl, hb},       // SW
      {r.x + wl, r.y + ht, wr, hb},  // SE
  };
  for (const Region& q : quads) {
    if (q.w > 0 && q.h > 0) split(f, c, q, out);
  }
}

}  // namespace

std::vector<QuadtreeLeaf> quadtree_leaves(const DepthFrame& frame, double c_mm) {
  if (!(c_mm > 0.0)) throw ValidationError("quadtree threshold must be positive");
  std::vector<QuadtreeLeaf> out;
  if (frame.width <= 0 || frame.height <= 0) return out;
  split(frame, c_mm, {0, 0, frame.width, frame.height}, out);
  return out;
}

std::vector<ImageBlob> quadtree_encode(const DepthFrame& frame, double c_mm) {
  std::vector<ImageBlob> blobs;
  for (const QuadtreeLeaf& leaf : quadtree_leaves(frame, c_mm)) {
    if (leaf.valid_count > 0) blobs.push_back(leaf.blob);
  }
  return blobs;
}

std::vector<Eigen::Vector3d> frame_point_cloud(const DepthFrame& frame) {
  std::vector<Eigen::Vector3d> cloud;
  cloud.reserve(frame.depth_mm.size() / 4);
  const CameraIntrinsics& cam = frame.crop_cam;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      if (!frame.is_valid(x, y)) continue;
      const double z = frame.depth_at(x, y);
      cloud.emplace_back((x + 0.5 - cam.cx) / cam.fx * z, (y + 0.5 - cam.cy) / cam.fy * z, z);
    }
  }
  return cloud;
}

}  // namespace handfit
