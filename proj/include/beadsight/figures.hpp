#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "beadsight/core.hpp"
#include "beadsight/evaluation.hpp"

namespace beadsight {

// Minimal RGB8 PNG writer (zlib deflate, no interlace).
inline void write_png(const std::filesystem::path& path, int w, int h,
                      const std::vector<uint8_t>& rgb) {
  require(rgb.size() == size_t(w) * h * 3, ErrorKind::data,
          "write_png: buffer size mismatch");

  std::vector<uint8_t> raw;
  raw.reserve(size_t(h) * (size_t(w) * 3 + 1));
  for (int r = 0; r < h; ++r) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + size_t(r) * w * 3,
               rgb.begin() + size_t(r + 1) * w * 3);
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  require(compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 6) == Z_OK,
          ErrorKind::numeric, "write_png: deflate failed");
  comp.resize(comp_len);

  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot write " + path.string());
  auto be32 = [](uint32_t v) {
    return std::array<uint8_t, 4>{uint8_t(v >> 24), uint8_t(v >> 16),
                                  uint8_t(v >> 8), uint8_t(v)};
  };
  auto chunk = [&](const char type[4], const std::vector<uint8_t>& data) {
    auto len = be32(uint32_t(data.size()));
    f.write(reinterpret_cast<const char*>(len.data()), 4);
    f.write(type, 4);
    if (!data.empty())
      f.write(reinterpret_cast<const char*>(data.data()),
              std::streamsize(data.size()));
    uLong crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
    auto c = be32(uint32_t(crc));
    f.write(reinterpret_cast<const char*>(c.data()), 4);
  };

  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  f.write(reinterpret_cast<const char*>(sig), 8);
  std::vector<uint8_t> ihdr;
  auto app32 = [&ihdr, &be32](uint32_t v) {
    auto b = be32(v);
    ihdr.insert(ihdr.end(), b.begin(), b.end());
  };
  app32(uint32_t(w));
  app32(uint32_t(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  chunk("IHDR", ihdr);
  chunk("IDAT", comp);
  chunk("IEND", {});
  require(f.good(), ErrorKind::data, "short write to " + path.string());
}

// Inferno-like colormap on t in [0,1].
inline std::array<uint8_t, 3> heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double r = std::clamp(3.0 * t, 0.0, 1.0);
  const double g = std::clamp(3.0 * t - 1.0, 0.0, 1.0);
  const double b = std::clamp(3.0 * t - 2.0, 0.0, 1.0);
  return {uint8_t(r * 255), uint8_t(g * 255), uint8_t(b * 255)};
}

inline void save_pressure_png(const std::filesystem::path& path,
                              const PressureMap& map, double max_kpa) {
  const int g = map.grid;
  std::vector<uint8_t> rgb(size_t(g) * g * 3);
  const double scale = max_kpa > 0 ? 1.0 / max_kpa : 1.0;
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) {
      const auto col = heat_color(map.at(r, c) * scale);
      for (int ch = 0; ch < 3; ++ch) rgb[(size_t(r) * g + c) * 3 + ch] = col[ch];
    }
  write_png(path, g, g, rgb);
}

// Side-by-side target | prediction on a shared color scale.
inline void save_comparison_png(const std::filesystem::path& path,
                                const PressureMap& target,
                                const PressureMap& pred) {
  const int g = target.grid;
  double max_kpa = 1e-9;
  for (float v : target.pressure) max_kpa = std::max(max_kpa, double(v));
  for (float v : pred.pressure) max_kpa = std::max(max_kpa, double(v));
  const int w = 2 * g + 4;
  std::vector<uint8_t> rgb(size_t(g) * w * 3, 40);
  auto blit = [&](const PressureMap& m, int x0) {
    for (int r = 0; r < g; ++r)
      for (int c = 0; c < g; ++c) {
        const auto col = heat_color(m.at(r, c) / max_kpa);
        for (int ch = 0; ch < 3; ++ch)
          rgb[(size_t(r) * w + x0 + c) * 3 + ch] = col[ch];
      }
  };
  blit(target, 0);
  blit(pred, g + 4);
  write_png(path, w, g, rgb);
}

inline void save_segment_heatmap_png(const std::filesystem::path& path,
                                     const SegmentGrid& grid, int cell_px = 64) {
  double max_v = 1e-9;
  for (int i = 0; i < 16; ++i)
    if (grid.count[i] > 0) max_v = std::max(max_v, grid.mae[i]);
  const int s = 4 * cell_px;
  std::vector<uint8_t> rgb(size_t(s) * s * 3);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const int cell = (r / cell_px) * 4 + (c / cell_px);
      std::array<uint8_t, 3> col{60, 60, 60};  // empty cell: gray
      if (grid.count[cell] > 0) col = heat_color(grid.mae[cell] / max_v);
      for (int ch = 0; ch < 3; ++ch) rgb[(size_t(r) * s + c) * 3 + ch] = col[ch];
    }
  write_png(path, s, s, rgb);
}

// FNV-1a 64 over a file's bytes; used to fingerprint checkpoints in reports.
inline std::string file_fnv1a_hex(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open " + path.string());
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= uint8_t(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", (unsigned long long)h);
  return out;
}

}  // namespace beadsight
