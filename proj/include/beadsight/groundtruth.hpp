#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "beadsight/core.hpp"

namespace beadsight {

struct BinaryContactMap {
  int grid = 0;
  std::vector<uint8_t> mask;  // grid*grid, row-major, 0/1

  BinaryContactMap() = default;
  explicit BinaryContactMap(int g) : grid(g), mask(size_t(g) * g, 0) {}

  bool at(int r, int c) const { return mask[size_t(r) * grid + c] != 0; }
  void set(int r, int c, bool v) { mask[size_t(r) * grid + c] = v ? 1 : 0; }
};

struct RasterResult {
  PressureMap map;
  bool clipped = false;  // disc extended beyond the pad edge
};

// Uniform pressure F/(pi r^2) over the contact disc, anti-aliased with a
// 4x4 subpixel coverage grid. The subpixel pattern is symmetric under the
// dihedral group, which keeps rasterization rotation-equivariant.
inline RasterResult rasterize_press(const ContactSpec& contact,
                                    const SensorGeometry& geom) {
  contact.validate();
  geom.validate();

  RasterResult out;
  out.map = PressureMap(geom.grid);
  out.clipped = !contact.fully_inside(geom);
  if (contact.force_N == 0.0) return out;

  const double r_m = contact.radius_mm * 1e-3;
  const double pressure_kpa = contact.force_N / (M_PI * r_m * r_m) * 1e-3;

  const double pitch = geom.pitch_mm();
  const double r_px = contact.radius_mm / pitch;
  const double cr = contact.center_mm.x / pitch - 0.5;  // center in px coords
  const double cc = contact.center_mm.y / pitch - 0.5;

  const int r0 = std::max(0, int(std::floor(cr - r_px)) - 1);
  const int r1 = std::min(geom.grid - 1, int(std::ceil(cr + r_px)) + 1);
  const int c0 = std::max(0, int(std::floor(cc - r_px)) - 1);
  const int c1 = std::min(geom.grid - 1, int(std::ceil(cc + r_px)) + 1);

  const double rr = r_px * r_px;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      int hits = 0;
      for (int sr = 0; sr < 4; ++sr) {
        const double pr = r - 0.5 + (sr + 0.5) / 4.0;
        const double dr = pr - cr;
        for (int sc = 0; sc < 4; ++sc) {
          const double pc = c - 0.5 + (sc + 0.5) / 4.0;
          const double dc = pc - cc;
          if (dr * dr + dc * dc <= rr) ++hits;
        }
      }
      if (hits > 0)
        out.map.at(r, c) = float(pressure_kpa * (hits / 16.0));
    }
  }
  return out;
}

// Integral of the pressure map over the pad, in newtons.
inline double total_force(const PressureMap& map, const SensorGeometry& geom) {
  double sum_kpa = 0.0;
  for (float v : map.pressure) sum_kpa += v;
  return sum_kpa * 1e3 * geom.pixel_area_m2();
}

// Pressure-weighted mean of pixel-center positions, in mm.
inline Vec2 center_of_pressure(const PressureMap& map, const SensorGeometry& geom) {
  double w_sum = 0.0, x_sum = 0.0, y_sum = 0.0;
  for (int r = 0; r < map.grid; ++r) {
    for (int c = 0; c < map.grid; ++c) {
      const double w = map.at(r, c);
      if (w <= 0.0) continue;
      w_sum += w;
      x_sum += w * (r + 0.5);
      y_sum += w * (c + 0.5);
    }
  }
  require(w_sum > 0.0, ErrorKind::numeric,
          "center_of_pressure: undefined for a zero-pressure map");
  const double pitch = geom.pitch_mm();
  return {x_sum / w_sum * pitch, y_sum / w_sum * pitch};
}

// Otsu threshold over `bins` equal-width bins spanning [min, max]. Candidate
// thresholds are the interior bin edges; returns the one maximizing
// between-class variance, ties broken toward the lower threshold. Class
// means use the exact per-bin value sums rather than bin centers.
inline double otsu_threshold(const PressureMap& map, int bins = 256) {
  require(bins >= 2, ErrorKind::data, "otsu_threshold: bins must be >= 2");
  const auto [mn_it, mx_it] =
      std::minmax_element(map.pressure.begin(), map.pressure.end());
  const double mn = *mn_it, mx = *mx_it;
  require(mx > mn, ErrorKind::numeric,
          "otsu_threshold: undefined for a constant map");

  const double width = (mx - mn) / bins;
  std::vector<int64_t> count(bins, 0);
  std::vector<double> value_sum(bins, 0.0);
  for (float v : map.pressure) {
    int b = std::min(bins - 1, int((v - mn) / width));
    if (b < 0) b = 0;
    count[b]++;
    value_sum[b] += v;
  }

  const double n = double(map.pressure.size());
  int64_t c0 = 0;
  double s0 = 0.0;
  double total = 0.0;
  for (double s : value_sum) total += s;

  double best_var = -1.0;
  double best_t = mn + width;
  for (int k = 1; k < bins; ++k) {
    c0 += count[k - 1];
    s0 += value_sum[k - 1];
    const int64_t c1 = int64_t(n) - c0;
    if (c0 == 0 || c1 == 0) continue;
    const double w0 = c0 / n, w1 = c1 / n;
    const double mu0 = s0 / c0, mu1 = (total - s0) / c1;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = mn + k * width;
    }
  }
  return best_t;
}

inline BinaryContactMap binarize(const PressureMap& map, double threshold) {
  BinaryContactMap out(map.grid);
  for (size_t i = 0; i < map.pressure.size(); ++i)
    out.mask[i] = map.pressure[i] > threshold ? 1 : 0;
  return out;
}

// Support mask (pressure > 0); the ground-truth side of the IOU metric.
inline BinaryContactMap support_mask(const PressureMap& map) {
  return binarize(map, 0.0);
}

inline double iou(const BinaryContactMap& a, const BinaryContactMap& b) {
  require(a.grid == b.grid && a.mask.size() == b.mask.size(), ErrorKind::data,
          "iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.mask.size(); ++i) {
    const bool av = a.mask[i] != 0, bv = b.mask[i] != 0;
    inter += (av && bv) ? 1 : 0;
    uni += (av || bv) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return double(inter) / double(uni);
}

}  // namespace beadsight
