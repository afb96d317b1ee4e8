#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "beadsight/core.hpp"
#include "beadsight/groundtruth.hpp"
#include "beadsight/rng.hpp"

namespace beadsight {

// 2-D bead bag state: current and rest positions of every bead center.
struct BeadState {
  std::vector<Vec2> centers_mm;
  std::vector<Vec2> rest_centers_mm;
  std::vector<double> radii_mm;

  size_t count() const { return centers_mm.size(); }

  void validate(const SensorGeometry& geom) const {
    require(count() >= 1, ErrorKind::data, "BeadState: no beads");
    require(centers_mm.size() == radii_mm.size() &&
                centers_mm.size() == rest_centers_mm.size(),
            ErrorKind::data, "BeadState: array length mismatch");
    for (size_t i = 0; i < count(); ++i) {
      require(radii_mm[i] > 0.0, ErrorKind::data, "BeadState: radius <= 0");
      require(centers_mm[i].x >= 0.0 && centers_mm[i].x <= geom.side_mm &&
                  centers_mm[i].y >= 0.0 && centers_mm[i].y <= geom.side_mm,
              ErrorKind::data, "BeadState: bead outside pad");
    }
  }
};

struct SimConfig {
  uint64_t seed = 0;
  int n_episodes = 1;
  int frames_per_episode = 192;  // mean; actual count jitters per episode
  double force_peak_N = 20.0;
  double finger_radius_mm = 5.0;
  int n_beads = 100;
  double bead_radius_mm = 2.0;
  double noise_std = 0.0;
  SensorGeometry geom;

  void validate() const {
    geom.validate();
    require(n_episodes > 0 && frames_per_episode > 0 && n_beads > 0,
            ErrorKind::data, "SimConfig: counts must be positive");
    require(noise_std >= 0.0, ErrorKind::data, "SimConfig: noise_std < 0");
    require(force_peak_N > 0.0 && finger_radius_mm > 0.0 && bead_radius_mm > 0.0,
            ErrorKind::data, "SimConfig: physical parameters must be > 0");
  }
};

// Sample non-overlapping bead centers inside the pad. Real bags are packed
// near the hexagonal limit, far denser than dart-throwing can reach, so
// beads sit on a jittered lattice; the jitter amplitude is chosen so the
// pairwise separation of at least 0.9 of the summed radii (slight overlap
// models squished beads) holds by construction.
inline BeadState init_beads(uint64_t seed, const SensorGeometry& geom,
                            int n_beads = 100, double bead_radius_mm = 2.0) {
  geom.validate();
  require(n_beads >= 1 && bead_radius_mm > 0.0, ErrorKind::data,
          "init_beads: invalid bead parameters");
  Rng rng(seed, /*stream=*/0xBEAD);
  const double r = bead_radius_mm;
  const double lo = r, hi = geom.side_mm - r;
  require(hi > lo, ErrorKind::data, "init_beads: bead larger than pad");

  const int gx = std::max(1, int(std::ceil(std::sqrt(double(n_beads)))));
  const int gy = (n_beads + gx - 1) / gx;
  const double spacing = (hi - lo) / std::max(gx, gy);
  const double min_sep = 0.9 * 2.0 * r;
  require(spacing >= min_sep, ErrorKind::data,
          "init_beads: could not place requested bead count");
  const double jitter = 0.5 * (spacing - min_sep);

  std::vector<Vec2> sites;
  sites.reserve(size_t(gx) * gy);
  for (int i = 0; i < gx; ++i)
    for (int j = 0; j < gy; ++j)
      sites.push_back({lo + (i + 0.5) * (hi - lo) / gx,
                       lo + (j + 0.5) * (hi - lo) / gy});
  for (size_t i = sites.size(); i > 1; --i)
    std::swap(sites[i - 1], sites[rng.below(i)]);

  BeadState st;
  for (int i = 0; i < n_beads; ++i) {
    Vec2 p = sites[i];
    p.x = std::clamp(p.x + rng.uniform(-jitter, jitter), lo, hi);
    p.y = std::clamp(p.y + rng.uniform(-jitter, jitter), lo, hi);
    st.centers_mm.push_back(p);
    st.rest_centers_mm.push_back(p);
    st.radii_mm.push_back(r);
  }
  return st;
}

// Push beads radially outward from the press center. Displacement magnitude
// is a Gaussian kernel of distance (sigma = 0.8 * finger radius) scaled by a
// saturating function of force; zero force is exactly the identity.
inline BeadState press_response(const BeadState& beads, const ContactSpec& contact) {
  contact.validate();
  BeadState out = beads;
  if (contact.force_N == 0.0) return out;

  const double amp_mm = 3.0 * contact.force_N / (contact.force_N + 5.0);
  const double sigma = 0.8 * contact.radius_mm;

  for (size_t i = 0; i < beads.count(); ++i) {
    const Vec2 rest = beads.rest_centers_mm[i];
    const double dx = rest.x - contact.center_mm.x;
    const double dy = rest.y - contact.center_mm.y;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d <= 1e-12) continue;  // radially singular point, stays put
    const double mag = amp_mm * std::exp(-d * d / (2.0 * sigma * sigma));
    out.centers_mm[i].x = rest.x + mag * dx / d;
    out.centers_mm[i].y = rest.y + mag * dy / d;
  }
  return out;
}

// Draw each bead as a shaded disc with an offset highlight over a dark
// background, then add clipped Gaussian pixel noise.
inline Frame render(const BeadState& beads, const SensorGeometry& geom,
                    double noise_std, Rng& rng, double timestamp_s = 0.0) {
  const int g = geom.grid;
  Frame frame(g, timestamp_s);
  const float bg = 0.12f;
  std::fill(frame.pixels.begin(), frame.pixels.end(), bg);

  const double pitch = geom.pitch_mm();
  for (size_t i = 0; i < beads.count(); ++i) {
    const Vec2 c = beads.centers_mm[i];
    const double r = beads.radii_mm[i];
    // per-bead tint so neighbors stay distinguishable
    const uint64_t h = (i + 1) * 0x9E3779B97F4A7C15ull;
    const double tint_r = 0.55 + 0.25 * double((h >> 8) & 0xFF) / 255.0;
    const double tint_g = 0.60 + 0.30 * double((h >> 16) & 0xFF) / 255.0;
    const double tint_b = 0.75 + 0.25 * double((h >> 24) & 0xFF) / 255.0;

    const int r0 = std::max(0, int(std::floor((c.x - r) / pitch - 0.5)));
    const int r1 = std::min(g - 1, int(std::ceil((c.x + r) / pitch - 0.5)) + 1);
    const int c0 = std::max(0, int(std::floor((c.y - r) / pitch - 0.5)));
    const int c1 = std::min(g - 1, int(std::ceil((c.y + r) / pitch - 0.5)) + 1);

    const double hx = c.x - 0.3 * r, hy = c.y - 0.3 * r;  // highlight center
    for (int pr = r0; pr <= r1; ++pr) {
      const double px = (pr + 0.5) * pitch;
      for (int pc = c0; pc <= c1; ++pc) {
        const double py = (pc + 0.5) * pitch;
        const double dx = px - c.x, dy = py - c.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r * r) continue;
        const double shade = 0.35 + 0.65 * std::sqrt(1.0 - d2 / (r * r));
        const double hd2 = (px - hx) * (px - hx) + (py - hy) * (py - hy);
        const double highlight = 0.35 * std::exp(-hd2 / (2.0 * 0.04 * r * r));
        frame.at(pr, pc, 0) = float(std::clamp(tint_r * shade + highlight, 0.0, 1.0));
        frame.at(pr, pc, 1) = float(std::clamp(tint_g * shade + highlight, 0.0, 1.0));
        frame.at(pr, pc, 2) = float(std::clamp(tint_b * shade + highlight, 0.0, 1.0));
      }
    }
  }

  if (noise_std > 0.0) {
    for (float& v : frame.pixels)
      v = float(std::clamp(double(v) + rng.normal(0.0, noise_std), 0.0, 1.0));
  }
  return frame;
}

// Trapezoidal force trace: zero-contact lead-in, ramp up, hold, ramp down,
// zero-contact tail. First and last samples are always zero.
inline std::vector<float> trapezoid_trace(int n_frames, double peak_N, Rng& rng) {
  std::vector<float> f(n_frames, 0.f);
  if (n_frames < 4) return f;
  const int lead = std::max(1, int(n_frames * 0.05));
  const int tail = std::max(1, int(n_frames * 0.05));
  const int active = n_frames - lead - tail;
  const int ramp_up = std::max(1, int(active * rng.uniform(0.2, 0.35)));
  const int ramp_down = std::max(1, int(active * rng.uniform(0.2, 0.35)));
  const int hold = std::max(0, active - ramp_up - ramp_down);
  for (int i = 0; i < active; ++i) {
    double v;
    if (i < ramp_up)
      v = peak_N * (i + 1) / double(ramp_up + 1);
    else if (i < ramp_up + hold)
      v = peak_N;
    else
      v = peak_N * (active - i - 1) / double(ramp_down);
    f[lead + i] = float(std::max(0.0, v));
  }
  return f;
}

// Full synthetic press episode; a pure function of (cfg.seed, episode_index).
inline PressEpisode generate_episode(const SimConfig& cfg, int episode_index) {
  cfg.validate();
  Rng rng(cfg.seed, uint64_t(episode_index) + 1);

  const double rf = cfg.finger_radius_mm;
  PressEpisode ep;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep%04d", episode_index);
  ep.id = buf;

  const int n_frames =
      std::max(4, int(std::lround(cfg.frames_per_episode * rng.uniform(0.9, 1.1))));
  const double peak = rng.uniform(5.0, cfg.force_peak_N);
  ep.contact.center_mm = {rng.uniform(rf, cfg.geom.side_mm - rf),
                          rng.uniform(rf, cfg.geom.side_mm - rf)};
  ep.contact.radius_mm = rf;
  ep.force_trace = trapezoid_trace(n_frames, peak, rng);

  BeadState beads = init_beads(rng.next_u64(), cfg.geom, cfg.n_beads,
                               cfg.bead_radius_mm);

  ep.frames.reserve(n_frames);
  ep.pressure_maps.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    ContactSpec contact{ep.contact.center_mm, rf, ep.force_trace[t]};
    BeadState pressed = press_response(beads, contact);
    ep.frames.push_back(render(pressed, cfg.geom, cfg.noise_std, rng,
                               t / cfg.geom.frame_hz));
    ep.pressure_maps.push_back(rasterize_press(contact, cfg.geom).map);
  }
  ep.validate();
  return ep;
}

// ---- real-camera ingestion ----

struct RawImage {
  int h = 0, w = 0;
  std::vector<float> px;  // h*w*3 row-major RGB

  RawImage() = default;
  RawImage(int h_, int w_) : h(h_), w(w_), px(size_t(h_) * w_ * 3, 0.f) {}
  float& at(int r, int c, int ch) { return px[(size_t(r) * w + c) * 3 + ch]; }
  float at(int r, int c, int ch) const { return px[(size_t(r) * w + c) * 3 + ch]; }
};

struct FisheyeIntrinsics {
  double focal_px = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double distortion = 1.0;  // 0 = rectilinear (identity), 1 = full equidistant
};

inline float bilinear(const RawImage& img, double r, double c, int ch) {
  r = std::clamp(r, 0.0, double(img.h - 1));
  c = std::clamp(c, 0.0, double(img.w - 1));
  const int r0 = int(r), c0 = int(c);
  const int r1 = std::min(r0 + 1, img.h - 1), c1 = std::min(c0 + 1, img.w - 1);
  const double fr = r - r0, fc = c - c0;
  return float((1 - fr) * ((1 - fc) * img.at(r0, c0, ch) + fc * img.at(r0, c1, ch)) +
               fr * ((1 - fc) * img.at(r1, c0, ch) + fc * img.at(r1, c1, ch)));
}

// Inverse equidistant remap: a rectified pixel at radius r_u samples the
// fisheye image at r_s = (1-d)*r_u + d*f*atan(r_u/f). distortion = 0 is the
// exact bilinear identity.
inline RawImage unwarp_fisheye(const RawImage& raw, const FisheyeIntrinsics& in) {
  require(in.focal_px > 0.0, ErrorKind::data,
          "unwarp_fisheye: focal length must be > 0");
  RawImage out(raw.h, raw.w);
  for (int r = 0; r < raw.h; ++r) {
    for (int c = 0; c < raw.w; ++c) {
      const double dx = c - in.cx, dy = r - in.cy;
      const double ru = std::sqrt(dx * dx + dy * dy);
      double scale = 1.0;
      if (ru > 1e-12) {
        const double rs = (1.0 - in.distortion) * ru +
                          in.distortion * in.focal_px * std::atan(ru / in.focal_px);
        scale = rs / ru;
      }
      const double sr = in.cy + dy * scale;
      const double sc = in.cx + dx * scale;
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = bilinear(raw, sr, sc, ch);
    }
  }
  return out;
}

// Center-crop to square, then exact area-average down to grid x grid.
inline Frame downsample(const RawImage& raw, const SensorGeometry& geom) {
  geom.validate();
  require(raw.h > 0 && raw.w > 0, ErrorKind::data, "downsample: empty image");
  const int side = std::min(raw.h, raw.w);
  const int off_r = (raw.h - side) / 2;
  const int off_c = (raw.w - side) / 2;
  const int g = geom.grid;
  require(side >= g, ErrorKind::data, "downsample: image smaller than grid");

  Frame out(g, 0.0);
  const double k = double(side) / g;
  for (int r = 0; r < g; ++r) {
    const double r_lo = r * k, r_hi = (r + 1) * k;
    for (int c = 0; c < g; ++c) {
      const double c_lo = c * k, c_hi = (c + 1) * k;
      double acc[3] = {0, 0, 0};
      for (int sr = int(r_lo); sr < int(std::ceil(r_hi)); ++sr) {
        const double wr = std::min(r_hi, double(sr + 1)) - std::max(r_lo, double(sr));
        for (int sc = int(c_lo); sc < int(std::ceil(c_hi)); ++sc) {
          const double wc =
              std::min(c_hi, double(sc + 1)) - std::max(c_lo, double(sc));
          const double w = wr * wc;
          for (int ch = 0; ch < 3; ++ch)
            acc[ch] += w * raw.at(off_r + sr, off_c + sc, ch);
        }
      }
      for (int ch = 0; ch < 3; ++ch)
        out.at(r, c, ch) = float(acc[ch] / (k * k));
    }
  }
  return out;
}

}  // namespace beadsight
