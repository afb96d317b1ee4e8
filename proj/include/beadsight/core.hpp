#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace beadsight {

// Error categories map onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) throw Error(kind, msg);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Physical pad and capture constants shared by every module.
struct SensorGeometry {
  double side_mm = 40.0;
  int grid = 256;
  double frame_hz = 30.0;

  void validate() const {
    require(side_mm > 0.0, ErrorKind::data, "SensorGeometry: side_mm must be > 0");
    require(grid >= 8, ErrorKind::data, "SensorGeometry: grid must be >= 8");
    require(frame_hz > 0.0, ErrorKind::data, "SensorGeometry: frame_hz must be > 0");
  }

  // mm per pixel (0.15625 at defaults)
  double pitch_mm() const { return side_mm / grid; }
  double pitch_m() const { return pitch_mm() * 1e-3; }
  double pixel_area_m2() const { return pitch_m() * pitch_m(); }
};

// Sensor frame: mm coordinates (x, y) with x along the first array axis
// (rows) and y along the second (cols). Pixel centers sit at half-integer
// multiples of the pitch, so mm (0,0) is the outer corner of pixel (0,0).
inline std::pair<double, double> mm_to_px(Vec2 p_mm, const SensorGeometry& geom) {
  const double pitch = geom.pitch_mm();
  return {p_mm.x / pitch - 0.5, p_mm.y / pitch - 0.5};
}

inline Vec2 px_to_mm(std::pair<double, double> p_px, const SensorGeometry& geom) {
  const double pitch = geom.pitch_mm();
  return {(p_px.first + 0.5) * pitch, (p_px.second + 0.5) * pitch};
}

// One RGB observation, intensities in [0,1], stored row-major interleaved
// (row, col, channel).
struct Frame {
  int grid = 0;
  double timestamp_s = 0.0;
  std::vector<float> pixels;  // grid*grid*3

  Frame() = default;
  Frame(int g, double ts) : grid(g), timestamp_s(ts), pixels(size_t(g) * g * 3, 0.f) {}

  float& at(int r, int c, int ch) { return pixels[(size_t(r) * grid + c) * 3 + ch]; }
  float at(int r, int c, int ch) const { return pixels[(size_t(r) * grid + c) * 3 + ch]; }

  void validate() const {
    require(grid >= 1, ErrorKind::data, "Frame: empty grid");
    require(pixels.size() == size_t(grid) * grid * 3, ErrorKind::data,
            "Frame: pixel buffer size mismatch");
    for (float v : pixels)
      require(v >= 0.f && v <= 1.f && std::isfinite(v), ErrorKind::data,
              "Frame: intensity outside [0,1]");
  }
};

// Ordered window of exactly H frames, oldest first.
struct FrameWindow {
  std::vector<Frame> frames;

  void validate(int expected_h) const {
    require(int(frames.size()) == expected_h, ErrorKind::data,
            "FrameWindow: length != H");
    for (size_t i = 1; i < frames.size(); ++i)
      require(frames[i].timestamp_s > frames[i - 1].timestamp_s, ErrorKind::data,
              "FrameWindow: timestamps not strictly increasing");
  }
};

// Per-pixel normal pressure in kPa over the pad.
struct PressureMap {
  int grid = 0;
  std::vector<float> pressure;  // grid*grid, row-major

  PressureMap() = default;
  explicit PressureMap(int g) : grid(g), pressure(size_t(g) * g, 0.f) {}

  float& at(int r, int c) { return pressure[size_t(r) * grid + c]; }
  float at(int r, int c) const { return pressure[size_t(r) * grid + c]; }

  void validate() const {
    require(grid >= 1, ErrorKind::data, "PressureMap: empty grid");
    require(pressure.size() == size_t(grid) * grid, ErrorKind::data,
            "PressureMap: buffer size mismatch");
    for (float v : pressure)
      require(v >= 0.f && std::isfinite(v), ErrorKind::data,
              "PressureMap: pressure must be finite and >= 0");
  }
};

// One instant of a cylindrical press: center, finger radius, normal force.
struct ContactSpec {
  Vec2 center_mm;
  double radius_mm = 5.0;
  double force_N = 0.0;

  void validate() const {
    require(radius_mm > 0.0, ErrorKind::data, "ContactSpec: radius_mm must be > 0");
    require(force_N >= 0.0, ErrorKind::data, "ContactSpec: force_N must be >= 0");
  }

  bool fully_inside(const SensorGeometry& geom) const {
    return center_mm.x - radius_mm >= 0.0 && center_mm.y - radius_mm >= 0.0 &&
           center_mm.x + radius_mm <= geom.side_mm &&
           center_mm.y + radius_mm <= geom.side_mm;
  }
};

// One recorded press: frames, synchronized force trace, derived pressure maps.
struct PressEpisode {
  std::string id;
  ContactSpec contact;  // force_N field unused here; per-frame forces below
  std::vector<float> force_trace;
  std::vector<Frame> frames;
  std::vector<PressureMap> pressure_maps;

  size_t length() const { return frames.size(); }

  void validate() const {
    require(!id.empty(), ErrorKind::data, "PressEpisode: empty id");
    require(frames.size() == force_trace.size() &&
                frames.size() == pressure_maps.size(),
            ErrorKind::data, "PressEpisode: frame/force/map length mismatch");
  }
};

}  // namespace beadsight
