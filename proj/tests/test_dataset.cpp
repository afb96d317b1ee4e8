#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "beadsight/dataset.hpp"
#include "beadsight/groundtruth.hpp"
#include "beadsight/simulator.hpp"

using namespace beadsight;

namespace {

fs::path temp_root(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("beadsight_test_" + name);
  fs::remove_all(p);
  return p;
}

SimConfig tiny_sim() {
  SimConfig cfg;
  cfg.seed = 17;
  cfg.frames_per_episode = 20;
  cfg.geom.grid = 32;
  cfg.n_beads = 20;
  return cfg;
}

}  // namespace

TEST(Dihedral, RotFourTimesAndFlipTwiceAreIdentity) {
  PressureMap m(8);
  Rng rng(1);
  for (float& v : m.pressure) v = float(rng.uniform());

  PressureMap r = m;
  for (int i = 0; i < 4; ++i) r = apply_dihedral(r, 1);
  EXPECT_EQ(r.pressure, m.pressure);

  PressureMap f = apply_dihedral(apply_dihedral(m, 4), 4);
  EXPECT_EQ(f.pressure, m.pressure);
}

TEST(Dihedral, HandEnumeratedRotationOn3x3) {
  PressureMap m(3);
  for (int i = 0; i < 9; ++i) m.pressure[i] = float(i);
  PressureMap r = apply_dihedral(m, 1);
  // out(r,c) = in(N-1-c, r): index-permutation oracle
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      EXPECT_EQ(r.at(row, col), m.at(3 - 1 - col, row));
}

TEST(Dihedral, GroupTableClosedAndConsistent) {
  PressureMap m(8);
  Rng rng(2);
  for (float& v : m.pressure) v = float(rng.uniform());
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      const int c = compose_dihedral(b, a);  // apply a, then b
      PressureMap seq = apply_dihedral(apply_dihedral(m, a), b);
      PressureMap one = apply_dihedral(m, c);
      EXPECT_EQ(seq.pressure, one.pressure) << "a=" << a << " b=" << b;
    }
  }
}

TEST(Dihedral, InverseRestoresExactly) {
  Frame f(8, 0.0);
  Rng rng(3);
  for (float& v : f.pixels) v = float(rng.uniform());
  for (int t = 0; t < 8; ++t) {
    Frame back = apply_dihedral(apply_dihedral(f, t), inverse_dihedral(t));
    EXPECT_EQ(back.pixels, f.pixels) << "t=" << t;
  }
}

TEST(Dihedral, IdentityElement) {
  Frame f(8, 0.0);
  Rng rng(4);
  for (float& v : f.pixels) v = float(rng.uniform());
  EXPECT_EQ(apply_dihedral(f, 0).pixels, f.pixels);
}

TEST(Dihedral, OffCenterDiscCopsAreTheEightImages) {
  SensorGeometry geom;
  geom.grid = 64;
  auto base = rasterize_press({{12.0, 25.0}, 4.0, 3.0}, geom).map;
  const Vec2 cop0 = center_of_pressure(base, geom);
  std::vector<std::pair<double, double>> seen;
  for (int t = 0; t < 8; ++t) {
    auto m = apply_dihedral(base, t);
    const Vec2 cop = center_of_pressure(m, geom);
    // dihedral image of the CoP: transform a one-pixel map at the nearest
    // pixel and find where it lands (index-level oracle)
    for (auto& [x, y] : seen)
      EXPECT_TRUE(std::abs(x - cop.x) > 1e-6 || std::abs(y - cop.y) > 1e-6);
    seen.push_back({cop.x, cop.y});
    // every image is the same distance from the pad center
    const double d0 = std::hypot(cop0.x - 20.0, cop0.y - 20.0);
    EXPECT_NEAR(std::hypot(cop.x - 20.0, cop.y - 20.0), d0, 1e-6);
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(SplitEpisodes, PaperCounts) {
  std::vector<std::string> ids;
  for (int i = 0; i < 500; ++i) ids.push_back("ep" + std::to_string(i));
  auto split = split_episodes(ids, {0.7, 0.1, 0.2}, 1);
  int n_train = 0, n_val = 0, n_test = 0;
  for (auto& [id, s] : split) {
    n_train += s == Split::train;
    n_val += s == Split::val;
    n_test += s == Split::test;
  }
  EXPECT_EQ(n_train, 350);
  EXPECT_EQ(n_val, 50);
  EXPECT_EQ(n_test, 100);
}

TEST(SplitEpisodes, TenIdsRoundTo712) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("e" + std::to_string(i));
  auto split = split_episodes(ids, {0.7, 0.1, 0.2}, 7);
  int n_train = 0, n_val = 0, n_test = 0;
  for (auto& [id, s] : split) {
    n_train += s == Split::train;
    n_val += s == Split::val;
    n_test += s == Split::test;
  }
  EXPECT_EQ(n_train, 7);
  EXPECT_EQ(n_val, 1);
  EXPECT_EQ(n_test, 2);
}

TEST(SplitEpisodes, ExactPartitionAndBadFractions) {
  std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  auto split = split_episodes(ids, {0.7, 0.1, 0.2}, 3);
  EXPECT_EQ(split.size(), ids.size());  // every id exactly once (map keys)
  for (auto& id : ids) EXPECT_TRUE(split.count(id));
  EXPECT_THROW(split_episodes(ids, {0.5, 0.1, 0.2}, 3), Error);
}

TEST(Storage, RoundTripBitExact) {
  const fs::path root = temp_root("roundtrip");
  SimConfig cfg = tiny_sim();
  PressEpisode ep = generate_episode(cfg, 0);
  // quantization happens on first write; re-read then re-write must be exact
  write_episode(ep, root);
  DatasetManifest m = read_manifest(root);
  m.geom = cfg.geom;
  write_manifest(m, root);
  PressEpisode back = read_episode(root, ep.id, cfg.geom);

  EXPECT_EQ(back.force_trace, ep.force_trace);
  for (size_t t = 0; t < ep.length(); ++t)
    EXPECT_EQ(back.pressure_maps[t].pressure, ep.pressure_maps[t].pressure);

  // frames: compare after quantization
  for (size_t t = 0; t < ep.length(); ++t)
    for (size_t i = 0; i < ep.frames[t].pixels.size(); ++i)
      EXPECT_EQ(quantize_u8(back.frames[t].pixels[i]),
                quantize_u8(ep.frames[t].pixels[i]));

  // second generation writes byte-identical files
  const fs::path root2 = temp_root("roundtrip2");
  write_episode(generate_episode(cfg, 0), root2);
  for (const char* name : {"frames.u8", "force.f32", "pressure.f32"}) {
    std::ifstream f1(root / "episodes" / ep.id / name, std::ios::binary);
    std::ifstream f2(root2 / "episodes" / ep.id / name, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    EXPECT_EQ(s1, s2) << name;
  }
  fs::remove_all(root);
  fs::remove_all(root2);
}

TEST(Storage, DuplicateIdRefused) {
  const fs::path root = temp_root("dup");
  PressEpisode ep = generate_episode(tiny_sim(), 0);
  write_episode(ep, root);
  EXPECT_THROW(write_episode(ep, root), Error);
  fs::remove_all(root);
}

TEST(Storage, ManifestCountIncrements) {
  const fs::path root = temp_root("count");
  SimConfig cfg = tiny_sim();
  for (int i = 0; i < 3; ++i) {
    write_episode(generate_episode(cfg, i), root);
    EXPECT_EQ(read_manifest(root).episode_ids.size(), size_t(i + 1));
  }
  fs::remove_all(root);
}

namespace {
fs::path make_dataset(const std::string& name, int n_eps, SimConfig cfg) {
  const fs::path root = temp_root(name);
  for (int i = 0; i < n_eps; ++i) write_episode(generate_episode(cfg, i), root);
  DatasetManifest m = read_manifest(root);
  m.geom = cfg.geom;
  m.split = split_episodes(m.episode_ids, {0.7, 0.1, 0.2}, cfg.seed);
  write_manifest(m, root);
  return root;
}
}  // namespace

TEST(Sampler, WindowBoundsTransformsAndSplitAudit) {
  SimConfig cfg = tiny_sim();
  const fs::path root = make_dataset("sampler", 10, cfg);
  DatasetManifest m = read_manifest(root);
  const int H = 5;
  TrainSampler sampler(root, m, H, Rng(1));

  std::set<std::string> train_ids;
  for (auto& id : m.ids_in(Split::train)) train_ids.insert(id);

  std::set<int> transforms_seen;
  for (int i = 0; i < 500; ++i) {
    AugmentedSample s = sampler.sample();
    EXPECT_TRUE(train_ids.count(s.episode_id)) << "non-train episode sampled";
    EXPECT_GE(s.t, size_t(H - 1));
    EXPECT_LT(s.t, read_episode_meta(root, s.episode_id).frames);
    EXPECT_EQ(s.window.frames.size(), size_t(H));
    transforms_seen.insert(s.transform_id);
  }
  EXPECT_EQ(transforms_seen.size(), 8u);
  fs::remove_all(root);
}

TEST(Sampler, TransformAppliedJointlyToWindowAndTarget) {
  SimConfig cfg = tiny_sim();
  const fs::path root = make_dataset("joint", 5, cfg);
  DatasetManifest m = read_manifest(root);
  const int H = 3;
  TrainSampler sampler(root, m, H, Rng(2));
  for (int i = 0; i < 50; ++i) {
    AugmentedSample s = sampler.sample();
    // undo the transform and compare against the stored episode
    const int inv = inverse_dihedral(s.transform_id);
    FrameWindow w = apply_dihedral(s.window, inv);
    PressureMap target = apply_dihedral(s.target, inv);
    FrameWindow w_ref = read_window(root, s.episode_id, m.geom, s.t, H);
    PressureMap t_ref = read_pressure_frame(root, s.episode_id, m.geom, s.t);
    for (int f = 0; f < H; ++f)
      ASSERT_EQ(w.frames[f].pixels, w_ref.frames[f].pixels);
    ASSERT_EQ(target.pressure, t_ref.pressure);
  }
  fs::remove_all(root);
}

TEST(Sampler, SkipsShortEpisodes) {
  SimConfig cfg = tiny_sim();
  const fs::path root = make_dataset("short", 6, cfg);
  DatasetManifest m = read_manifest(root);
  // H larger than every episode: sampler must reject the whole split
  EXPECT_THROW(TrainSampler(root, m, 10000, Rng(1)), Error);
  fs::remove_all(root);
}

TEST(ReadWindow, MatchesEpisodeFrames) {
  SimConfig cfg = tiny_sim();
  const fs::path root = make_dataset("window", 2, cfg);
  DatasetManifest m = read_manifest(root);
  PressEpisode ep = read_episode(root, "ep0000", m.geom);
  const int H = 4;
  const size_t t = 9;
  FrameWindow w = read_window(root, "ep0000", m.geom, t, H);
  for (int i = 0; i < H; ++i)
    EXPECT_EQ(w.frames[i].pixels, ep.frames[t + 1 - H + i].pixels);
  EXPECT_THROW(read_window(root, "ep0000", m.geom, 2, H), Error);
  fs::remove_all(root);
}
