#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beadsight/core.hpp"
#include "beadsight/rng.hpp"

namespace beadsight {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kDatasetVersion = 1;

enum class Split { train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& n) {
  if (n == "train") return Split::train;
  if (n == "val") return Split::val;
  if (n == "test") return Split::test;
  throw Error(ErrorKind::data, "unknown split name: " + n);
}

struct DatasetManifest {
  int version = kDatasetVersion;
  SensorGeometry geom;
  std::vector<std::string> episode_ids;
  std::map<std::string, Split> split;
  std::string provenance;

  std::vector<std::string> ids_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& id : episode_ids)
      if (auto it = split.find(id); it != split.end() && it->second == s)
        out.push_back(id);
    return out;
  }
};

// ---- dihedral group (4 rotations x optional vertical flip) ----
//
// transform_id = rot_quarter_turns + 4 * flip; the rotation is applied
// first, then the flip. All transforms are exact index permutations.

// Generic spatial permutation over a row-major (N, N, C) buffer.
template <typename T>
inline std::vector<T> dihedral_permute(const std::vector<T>& src, int n,
                                       int channels, int transform_id) {
  require(transform_id >= 0 && transform_id < 8, ErrorKind::data,
          "dihedral: transform_id out of range");
  require(src.size() == size_t(n) * n * channels, ErrorKind::data,
          "dihedral: buffer size mismatch");
  const int rot = transform_id % 4;
  const bool flip = transform_id >= 4;

  auto rotate_once = [n, channels](const std::vector<T>& a) {
    std::vector<T> b(a.size());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        for (int ch = 0; ch < channels; ++ch)
          b[(size_t(r) * n + c) * channels + ch] =
              a[(size_t(n - 1 - c) * n + r) * channels + ch];
    return b;
  };

  std::vector<T> cur = src;
  for (int k = 0; k < rot; ++k) cur = rotate_once(cur);
  if (flip) {
    std::vector<T> b(cur.size());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        for (int ch = 0; ch < channels; ++ch)
          b[(size_t(r) * n + c) * channels + ch] =
              cur[(size_t(n - 1 - r) * n + c) * channels + ch];
    cur = std::move(b);
  }
  return cur;
}

inline Frame apply_dihedral(const Frame& f, int transform_id) {
  Frame out = f;
  out.pixels = dihedral_permute(f.pixels, f.grid, 3, transform_id);
  return out;
}

inline PressureMap apply_dihedral(const PressureMap& m, int transform_id) {
  PressureMap out = m;
  out.pressure = dihedral_permute(m.pressure, m.grid, 1, transform_id);
  return out;
}

inline FrameWindow apply_dihedral(const FrameWindow& w, int transform_id) {
  FrameWindow out;
  out.frames.reserve(w.frames.size());
  for (const Frame& f : w.frames) out.frames.push_back(apply_dihedral(f, transform_id));
  return out;
}

namespace detail {
// Probe-based group tables: apply transforms to a labeled 8x8 array and
// match results, so the tables cannot drift from the permutation code.
inline std::array<std::vector<int>, 8> dihedral_probe() {
  std::array<std::vector<int>, 8> out;
  std::vector<int> probe(64);
  for (int i = 0; i < 64; ++i) probe[i] = i;
  for (int t = 0; t < 8; ++t) out[t] = dihedral_permute(probe, 8, 1, t);
  return out;
}
}  // namespace detail

// id of "apply `first`, then `second`"
inline int compose_dihedral(int second, int first) {
  static const auto probes = detail::dihedral_probe();
  const std::vector<int> seq = dihedral_permute(probes[first], 8, 1, second);
  for (int t = 0; t < 8; ++t)
    if (probes[t] == seq) return t;
  throw Error(ErrorKind::numeric, "dihedral composition not closed");
}

inline int inverse_dihedral(int t) {
  for (int u = 0; u < 8; ++u)
    if (compose_dihedral(u, t) == 0) return u;
  throw Error(ErrorKind::numeric, "dihedral inverse missing");
}

// ---- episode splitting ----

inline std::map<std::string, Split> split_episodes(
    const std::vector<std::string>& ids,
    std::array<double, 3> fractions = {0.7, 0.1, 0.2}, uint64_t seed = 0) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  require(std::abs(sum - 1.0) < 1e-9, ErrorKind::data,
          "split_episodes: fractions must sum to 1");

  std::vector<std::string> shuffled = ids;
  Rng rng(seed, /*stream=*/0x51D);
  for (size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);

  const size_t n = shuffled.size();
  const size_t n_train = size_t(std::llround(fractions[0] * double(n)));
  const size_t n_val = size_t(std::llround(fractions[1] * double(n)));
  require(n_train + n_val <= n, ErrorKind::data, "split_episodes: rounding overflow");

  std::map<std::string, Split> out;
  for (size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::train
              : i < n_train + n_val ? Split::val
                                    : Split::test;
    out[shuffled[i]] = s;
  }
  return out;
}

// ---- on-disk layout ----
//
//   <root>/manifest.json
//   <root>/episodes/<id>/meta.json      contact + frame count
//   <root>/episodes/<id>/frames.u8      T*g*g*3 bytes, frame-major RGB
//   <root>/episodes/<id>/force.f32      T little-endian floats, N
//   <root>/episodes/<id>/pressure.f32   T*g*g little-endian floats, kPa

inline void write_manifest(const DatasetManifest& m, const fs::path& root) {
  json j;
  j["version"] = m.version;
  j["geometry"] = {{"side_mm", m.geom.side_mm},
                   {"grid", m.geom.grid},
                   {"frame_hz", m.geom.frame_hz}};
  j["episodes"] = m.episode_ids;
  json split = json::object();
  for (const auto& [id, s] : m.split) split[id] = split_name(s);
  j["split"] = split;
  j["provenance"] = m.provenance;

  fs::create_directories(root);
  std::ofstream f(root / "manifest.json", std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot write manifest.json");
  f << j.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const fs::path& root) {
  std::ifstream f(root / "manifest.json", std::ios::binary);
  require(f.good(), ErrorKind::data,
          "cannot open " + (root / "manifest.json").string());
  json j = json::parse(f);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  require(m.version == kDatasetVersion, ErrorKind::data,
          "unsupported dataset version");
  m.geom.side_mm = j.at("geometry").at("side_mm").get<double>();
  m.geom.grid = j.at("geometry").at("grid").get<int>();
  m.geom.frame_hz = j.at("geometry").at("frame_hz").get<double>();
  for (const auto& id : j.at("episodes")) m.episode_ids.push_back(id.get<std::string>());
  for (const auto& [id, s] : j.at("split").items())
    m.split[id] = split_from_name(s.get<std::string>());
  m.provenance = j.value("provenance", "");
  return m;
}

namespace detail {
template <typename T>
void write_binary(const fs::path& p, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::ofstream f(p, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot write " + p.string());
  f.write(reinterpret_cast<const char*>(v.data()),
          std::streamsize(v.size() * sizeof(T)));
  require(f.good(), ErrorKind::data, "short write to " + p.string());
}

template <typename T>
std::vector<T> read_binary(const fs::path& p, size_t count) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::ifstream f(p, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open " + p.string());
  std::vector<T> v(count);
  f.read(reinterpret_cast<char*>(v.data()), std::streamsize(count * sizeof(T)));
  require(size_t(f.gcount()) == count * sizeof(T), ErrorKind::data,
          "short read from " + p.string());
  return v;
}
}  // namespace detail

inline uint8_t quantize_u8(float v) {
  return uint8_t(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

// Persist an episode and append it to the manifest. Frames are quantized to
// u8 on the first write; round-trips are bit-exact thereafter.
inline std::string write_episode(const PressEpisode& ep, const fs::path& root) {
  ep.validate();
  const fs::path dir = root / "episodes" / ep.id;
  require(!fs::exists(dir), ErrorKind::data,
          "write_episode: episode already exists: " + ep.id);
  fs::create_directories(dir);

  DatasetManifest m;
  if (fs::exists(root / "manifest.json")) m = read_manifest(root);
  const int g = m.episode_ids.empty() && ep.frames.empty()
                    ? 0
                    : (ep.frames.empty() ? m.geom.grid : ep.frames[0].grid);
  if (m.episode_ids.empty() && !ep.frames.empty()) m.geom.grid = g;

  json meta;
  meta["contact"] = {{"center_mm", {ep.contact.center_mm.x, ep.contact.center_mm.y}},
                     {"radius_mm", ep.contact.radius_mm}};
  meta["frames"] = ep.frames.size();
  {
    std::ofstream f(dir / "meta.json", std::ios::binary);
    require(f.good(), ErrorKind::data, "cannot write meta.json");
    f << meta.dump(2) << "\n";
  }

  std::vector<uint8_t> u8;
  u8.reserve(ep.frames.size() * size_t(g) * g * 3);
  for (const Frame& fr : ep.frames)
    for (float v : fr.pixels) u8.push_back(quantize_u8(v));
  detail::write_binary(dir / "frames.u8", u8);

  detail::write_binary(dir / "force.f32", ep.force_trace);

  std::vector<float> press;
  press.reserve(ep.pressure_maps.size() * size_t(g) * g);
  for (const PressureMap& pm : ep.pressure_maps)
    press.insert(press.end(), pm.pressure.begin(), pm.pressure.end());
  detail::write_binary(dir / "pressure.f32", press);

  m.episode_ids.push_back(ep.id);
  write_manifest(m, root);
  return ep.id;
}

struct EpisodeMeta {
  ContactSpec contact;
  size_t frames = 0;
};

inline EpisodeMeta read_episode_meta(const fs::path& root, const std::string& id) {
  std::ifstream f(root / "episodes" / id / "meta.json", std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open meta.json for " + id);
  json j = json::parse(f);
  EpisodeMeta m;
  m.contact.center_mm = {j.at("contact").at("center_mm")[0].get<double>(),
                         j.at("contact").at("center_mm")[1].get<double>()};
  m.contact.radius_mm = j.at("contact").at("radius_mm").get<double>();
  m.frames = j.at("frames").get<size_t>();
  return m;
}

inline Frame frame_from_u8(const uint8_t* data, int grid, double timestamp_s) {
  Frame fr(grid, timestamp_s);
  const size_t n = size_t(grid) * grid * 3;
  for (size_t i = 0; i < n; ++i) fr.pixels[i] = float(data[i]) / 255.f;
  return fr;
}

inline PressEpisode read_episode(const fs::path& root, const std::string& id,
                                 const SensorGeometry& geom) {
  const fs::path dir = root / "episodes" / id;
  const EpisodeMeta meta = read_episode_meta(root, id);
  const int g = geom.grid;
  const size_t T = meta.frames;

  PressEpisode ep;
  ep.id = id;
  ep.contact = meta.contact;
  ep.force_trace = detail::read_binary<float>(dir / "force.f32", T);

  const auto u8 = detail::read_binary<uint8_t>(dir / "frames.u8", T * g * g * 3);
  ep.frames.reserve(T);
  for (size_t t = 0; t < T; ++t)
    ep.frames.push_back(
        frame_from_u8(u8.data() + t * size_t(g) * g * 3, g, t / geom.frame_hz));

  const auto press = detail::read_binary<float>(dir / "pressure.f32", T * g * g);
  ep.pressure_maps.reserve(T);
  for (size_t t = 0; t < T; ++t) {
    PressureMap pm(g);
    std::copy(press.begin() + t * size_t(g) * g,
              press.begin() + (t + 1) * size_t(g) * g, pm.pressure.begin());
    ep.pressure_maps.push_back(std::move(pm));
  }
  ep.validate();
  return ep;
}

// Window of H frames ending at t (inclusive), loaded straight from disk.
inline FrameWindow read_window(const fs::path& root, const std::string& id,
                               const SensorGeometry& geom, size_t t, int H) {
  const fs::path dir = root / "episodes" / id;
  const int g = geom.grid;
  require(t + 1 >= size_t(H), ErrorKind::data, "read_window: t < H-1");

  std::ifstream f(dir / "frames.u8", std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open frames.u8 for " + id);
  const size_t frame_bytes = size_t(g) * g * 3;
  std::vector<uint8_t> buf(frame_bytes * H);
  f.seekg(std::streamoff((t + 1 - H) * frame_bytes));
  f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  require(size_t(f.gcount()) == buf.size(), ErrorKind::data,
          "short read of frames.u8 for " + id);

  FrameWindow w;
  for (int i = 0; i < H; ++i)
    w.frames.push_back(frame_from_u8(buf.data() + size_t(i) * frame_bytes, g,
                                     double(t + 1 - H + i) / geom.frame_hz));
  return w;
}

inline PressureMap read_pressure_frame(const fs::path& root, const std::string& id,
                                       const SensorGeometry& geom, size_t t) {
  const fs::path dir = root / "episodes" / id;
  const int g = geom.grid;
  std::ifstream f(dir / "pressure.f32", std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open pressure.f32 for " + id);
  PressureMap pm(g);
  f.seekg(std::streamoff(t * size_t(g) * g * sizeof(float)));
  f.read(reinterpret_cast<char*>(pm.pressure.data()),
         std::streamsize(pm.pressure.size() * sizeof(float)));
  require(size_t(f.gcount()) == pm.pressure.size() * sizeof(float), ErrorKind::data,
          "short read of pressure.f32 for " + id);
  return pm;
}

// ---- training sampler ----

struct AugmentedSample {
  FrameWindow window;
  PressureMap target;
  int transform_id = 0;
  std::string episode_id;
  size_t t = 0;
};

// Uniform (episode, time, dihedral transform) sampler over the train split.
// Episodes shorter than H are skipped with a one-time warning.
class TrainSampler {
 public:
  TrainSampler(fs::path root, DatasetManifest manifest, int H, Rng rng)
      : root_(std::move(root)), manifest_(std::move(manifest)), H_(H),
        rng_(rng) {
    for (const auto& id : manifest_.ids_in(Split::train)) {
      const size_t len = read_episode_meta(root_, id).frames;
      if (len < size_t(H_)) {
        std::fprintf(stderr, "warning: episode %s shorter than H=%d, skipped\n",
                     id.c_str(), H_);
        continue;
      }
      ids_.push_back(id);
      lengths_.push_back(len);
    }
    require(!ids_.empty(), ErrorKind::data,
            "TrainSampler: no usable training episodes");
  }

  const Rng& rng() const { return rng_; }
  void set_rng(Rng rng) { rng_ = rng; }

  AugmentedSample sample() {
    const size_t e = rng_.below(ids_.size());
    const size_t len = lengths_[e];
    const size_t t = H_ - 1 + rng_.below(len - H_ + 1);
    const int transform = int(rng_.below(8));

    AugmentedSample s;
    s.episode_id = ids_[e];
    s.t = t;
    s.transform_id = transform;
    s.window = apply_dihedral(
        read_window(root_, ids_[e], manifest_.geom, t, H_), transform);
    s.target = apply_dihedral(
        read_pressure_frame(root_, ids_[e], manifest_.geom, t), transform);
    return s;
  }

 private:
  fs::path root_;
  DatasetManifest manifest_;
  int H_;
  Rng rng_;
  std::vector<std::string> ids_;
  std::vector<size_t> lengths_;
};

}  // namespace beadsight
