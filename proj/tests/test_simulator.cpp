#include <gtest/gtest.h>

#include "beadsight/simulator.hpp"

using namespace beadsight;

namespace {
SimConfig small_cfg() {
  SimConfig cfg;
  cfg.seed = 9;
  cfg.frames_per_episode = 24;
  cfg.geom.grid = 64;
  cfg.n_beads = 40;
  return cfg;
}
}  // namespace

TEST(InitBeads, DeterministicGivenSeed) {
  SensorGeometry geom;
  BeadState a = init_beads(123, geom, 100, 2.0);
  BeadState b = init_beads(123, geom, 100, 2.0);
  ASSERT_EQ(a.count(), 100u);
  for (size_t i = 0; i < a.count(); ++i) {
    EXPECT_EQ(a.centers_mm[i].x, b.centers_mm[i].x);
    EXPECT_EQ(a.centers_mm[i].y, b.centers_mm[i].y);
  }
}

TEST(InitBeads, PairwiseSeparationAndContainment) {
  SensorGeometry geom;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    BeadState st = init_beads(seed, geom, 100, 2.0);
    for (size_t i = 0; i < st.count(); ++i) {
      EXPECT_GE(st.centers_mm[i].x, 2.0);
      EXPECT_LE(st.centers_mm[i].x, 38.0);
      EXPECT_GE(st.centers_mm[i].y, 2.0);
      EXPECT_LE(st.centers_mm[i].y, 38.0);
      for (size_t j = i + 1; j < st.count(); ++j) {
        const double dx = st.centers_mm[i].x - st.centers_mm[j].x;
        const double dy = st.centers_mm[i].y - st.centers_mm[j].y;
        EXPECT_GE(std::sqrt(dx * dx + dy * dy),
                  0.9 * (st.radii_mm[i] + st.radii_mm[j]) - 1e-12);
      }
    }
  }
}

TEST(InitBeads, FailsWhenPadCannotFit) {
  SensorGeometry geom;
  geom.side_mm = 10.0;
  EXPECT_THROW(init_beads(1, geom, 500, 2.0), Error);
}

TEST(PressResponse, ZeroForceIsIdentity) {
  SensorGeometry geom;
  BeadState st = init_beads(5, geom, 50, 2.0);
  BeadState out = press_response(st, {{20, 20}, 5.0, 0.0});
  for (size_t i = 0; i < st.count(); ++i) {
    EXPECT_EQ(out.centers_mm[i].x, st.centers_mm[i].x);
    EXPECT_EQ(out.centers_mm[i].y, st.centers_mm[i].y);
  }
}

TEST(PressResponse, DisplacementMonotoneInForce) {
  SensorGeometry geom;
  BeadState st = init_beads(5, geom, 50, 2.0);
  for (double f : {1.0, 3.0, 8.0}) {
    BeadState lo = press_response(st, {{20, 20}, 5.0, f});
    BeadState hi = press_response(st, {{20, 20}, 5.0, 2 * f});
    for (size_t i = 0; i < st.count(); ++i) {
      const double dlo = std::hypot(lo.centers_mm[i].x - st.centers_mm[i].x,
                                    lo.centers_mm[i].y - st.centers_mm[i].y);
      const double dhi = std::hypot(hi.centers_mm[i].x - st.centers_mm[i].x,
                                    hi.centers_mm[i].y - st.centers_mm[i].y);
      EXPECT_GE(dhi, dlo - 1e-12);
    }
  }
}

TEST(PressResponse, FarBeadsBarelyMove) {
  SensorGeometry geom;
  BeadState st;
  st.centers_mm = {{35.0, 20.0}};  // 15 mm = 3 radii from the press center
  st.rest_centers_mm = st.centers_mm;
  st.radii_mm = {2.0};
  BeadState out = press_response(st, {{20.0, 20.0}, 5.0, 20.0});
  const double d = std::hypot(out.centers_mm[0].x - 35.0, out.centers_mm[0].y - 20.0);
  EXPECT_LT(d, 0.01);
}

TEST(Render, DeterministicWithoutNoise) {
  SensorGeometry geom;
  geom.grid = 64;
  BeadState st = init_beads(7, geom, 30, 2.0);
  Rng r1(0), r2(0);
  Frame a = render(st, geom, 0.0, r1);
  Frame b = render(st, geom, 0.0, r2);
  EXPECT_EQ(a.pixels, b.pixels);
}

TEST(Render, EmptyStateIsUniformBackground) {
  SensorGeometry geom;
  geom.grid = 32;
  BeadState st;
  Rng rng(0);
  Frame f = render(st, geom, 0.0, rng);
  for (size_t i = 1; i < f.pixels.size(); ++i) EXPECT_EQ(f.pixels[i], f.pixels[0]);
}

TEST(Render, NoiseMeanMatchesHalfNormal) {
  SensorGeometry geom;
  geom.grid = 256;
  BeadState st;  // uniform background far from the clip boundaries? bg=0.12
  Rng rng(3);
  const double sigma = 0.02;  // 6 sigma from the [0,1] boundaries at bg 0.12
  Frame clean = render(st, geom, 0.0, rng);
  Frame noisy = render(st, geom, sigma, rng);
  double mean_abs = 0.0;
  for (size_t i = 0; i < clean.pixels.size(); ++i)
    mean_abs += std::abs(double(noisy.pixels[i]) - double(clean.pixels[i]));
  mean_abs /= double(clean.pixels.size());
  const double expect = sigma * std::sqrt(2.0 / M_PI);
  EXPECT_NEAR(mean_abs, expect, 0.05 * expect);
}

TEST(GenerateEpisode, TraceShapeAndDeterminism) {
  SimConfig cfg = small_cfg();
  PressEpisode a = generate_episode(cfg, 0);
  PressEpisode b = generate_episode(cfg, 0);
  EXPECT_EQ(a.force_trace, b.force_trace);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (size_t t = 0; t < a.frames.size(); ++t)
    EXPECT_EQ(a.frames[t].pixels, b.frames[t].pixels);

  EXPECT_EQ(a.force_trace.front(), 0.f);
  EXPECT_EQ(a.force_trace.back(), 0.f);
  float peak = 0.f;
  for (float f : a.force_trace) peak = std::max(peak, f);
  EXPECT_LE(peak, cfg.force_peak_N);
  EXPECT_GE(peak, 5.f * 0.99f);
}

TEST(GenerateEpisode, ForceTraceMatchesMapIntegrals) {
  SimConfig cfg = small_cfg();
  cfg.geom.grid = 256;  // conservation tolerance assumes full resolution
  PressEpisode ep = generate_episode(cfg, 1);
  for (size_t t = 0; t < ep.length(); ++t) {
    const double f = total_force(ep.pressure_maps[t], cfg.geom);
    if (ep.force_trace[t] == 0.f)
      EXPECT_EQ(f, 0.0);
    else
      EXPECT_LT(std::abs(f - ep.force_trace[t]) / ep.force_trace[t], 0.005);
  }
}

TEST(GenerateEpisode, MonotoneVisualSignalDuringRampUp) {
  SimConfig cfg = small_cfg();
  PressEpisode ep = generate_episode(cfg, 2);
  // find the ramp-up: prefix of non-decreasing force
  auto diff_to_first = [&](size_t t) {
    double d = 0.0;
    for (size_t i = 0; i < ep.frames[t].pixels.size(); ++i)
      d += std::abs(double(ep.frames[t].pixels[i]) - double(ep.frames[0].pixels[i]));
    return d / double(ep.frames[t].pixels.size());
  };
  double prev = 0.0;
  for (size_t t = 1; t < ep.length(); ++t) {
    if (ep.force_trace[t] < ep.force_trace[t - 1]) break;
    const double d = diff_to_first(t);
    EXPECT_GE(d, prev - 1e-9) << "at frame " << t;
    prev = d;
  }
}

TEST(Unwarp, ZeroDistortionIsIdentity) {
  RawImage img(32, 48);
  Rng rng(1);
  for (float& v : img.px) v = float(rng.uniform());
  FisheyeIntrinsics in{/*focal*/ 20.0, /*cx*/ 24.0, /*cy*/ 16.0, /*distortion*/ 0.0};
  RawImage out = unwarp_fisheye(img, in);
  EXPECT_EQ(out.px, img.px);
}

TEST(Unwarp, RejectsBadFocalAndKeepsCenter) {
  RawImage img(33, 33);
  img.at(16, 16, 0) = 1.f;
  FisheyeIntrinsics bad{0.0, 16.0, 16.0, 1.0};
  EXPECT_THROW(unwarp_fisheye(img, bad), Error);
  FisheyeIntrinsics in{12.0, 16.0, 16.0, 1.0};
  RawImage out = unwarp_fisheye(img, in);
  EXPECT_EQ(out.at(16, 16, 0), 1.f);
}

TEST(Unwarp, StraightensCentralLine) {
  // scene: vertical bright line at scene x = cx + 8 in the rectilinear frame.
  // synthesize the distorted view with the forward equidistant model, then
  // unwarp and check the line is straight again.
  const int n = 101;
  const double f = 40.0, cx = 50.0, cy = 50.0;
  auto scene = [&](double x, double y) {
    (void)y;
    return std::exp(-(x - (cx + 8.0)) * (x - (cx + 8.0)) / 2.0);
  };
  RawImage distorted(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double dx = c - cx, dy = r - cy;
      const double rs = std::sqrt(dx * dx + dy * dy);
      double scale = 1.0;
      if (rs > 1e-9) {
        const double ru = f * std::tan(rs / f);  // forward equidistant
        scale = ru / rs;
      }
      const float v = float(scene(cx + dx * scale, cy + dy * scale));
      for (int ch = 0; ch < 3; ++ch) distorted.at(r, c, ch) = v;
    }

  FisheyeIntrinsics in{f, cx, cy, 1.0};
  RawImage rect = unwarp_fisheye(distorted, in);

  // per-row intensity-weighted line position; fit nothing, just check spread
  std::vector<double> centers;
  for (int r = 30; r < 70; ++r) {
    double w = 0, wc = 0;
    for (int c = 0; c < n; ++c) {
      w += rect.at(r, c, 0);
      wc += rect.at(r, c, 0) * c;
    }
    centers.push_back(wc / w);
  }
  double lo = 1e9, hi = -1e9;
  for (double c : centers) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  EXPECT_LT(hi - lo, 1.0);  // residual below one pixel
  EXPECT_NEAR(centers[0], cx + 8.0, 1.0);
}

TEST(Downsample, ConstantImage) {
  RawImage img(64, 96);
  for (float& v : img.px) v = 0.375f;
  SensorGeometry geom;
  geom.grid = 32;
  Frame f = downsample(img, geom);
  for (float v : f.pixels) EXPECT_NEAR(v, 0.375f, 1e-6);
}

TEST(Downsample, CheckerboardAverages) {
  RawImage img(512, 512);
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 512; ++c) {
      const float v = ((r / 1) % 2) ^ ((c / 1) % 2) ? 1.f : 0.f;
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = v;
    }
  SensorGeometry geom;
  Frame f = downsample(img, geom);  // 512 -> 256, each output cell sees 2x2
  for (float v : f.pixels) EXPECT_NEAR(v, 0.5f, 1e-6);
}

TEST(Downsample, PreservesMeanWithoutCrop) {
  RawImage img(96, 96);
  Rng rng(4);
  for (float& v : img.px) v = float(rng.uniform());
  double mean_in = 0.0;
  for (float v : img.px) mean_in += v;
  mean_in /= double(img.px.size());

  SensorGeometry geom;
  geom.grid = 32;
  Frame f = downsample(img, geom);
  double mean_out = 0.0;
  for (float v : f.pixels) mean_out += v;
  mean_out /= double(f.pixels.size());
  EXPECT_NEAR(mean_in, mean_out, 1e-6);
}
