#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <optional>

#include "beadsight/dataset.hpp"
#include "beadsight/groundtruth.hpp"
#include "beadsight/model.hpp"

namespace beadsight {

// ---- metric primitives over aligned (pred, target) frame lists ----
// Predictions are expected to be clamped to >= 0 already (PressureMap
// contract); tensor_to_pressure does this.

inline double pixel_mae(const std::vector<PressureMap>& preds,
                        const std::vector<PressureMap>& targets) {
  require(preds.size() == targets.size() && !preds.empty(), ErrorKind::data,
          "pixel_mae: size mismatch or empty");
  double ae = 0.0;
  size_t n = 0;
  for (size_t f = 0; f < preds.size(); ++f) {
    require(preds[f].pressure.size() == targets[f].pressure.size(),
            ErrorKind::data, "pixel_mae: map shape mismatch");
    for (size_t i = 0; i < preds[f].pressure.size(); ++i)
      ae += std::abs(double(preds[f].pressure[i]) - double(targets[f].pressure[i]));
    n += preds[f].pressure.size();
  }
  return ae / double(n);
}

// Mean |F_pred - F_gt| / F_gt * 100 over frames with F_gt > eps_N.
inline double force_percent_mae(const std::vector<PressureMap>& preds,
                                const std::vector<PressureMap>& targets,
                                const SensorGeometry& geom,
                                double eps_N = 0.01) {
  require(preds.size() == targets.size(), ErrorKind::data,
          "force_percent_mae: size mismatch");
  double acc = 0.0;
  size_t n = 0;
  for (size_t f = 0; f < preds.size(); ++f) {
    const double f_gt = total_force(targets[f], geom);
    if (f_gt <= eps_N) continue;
    const double f_pred = total_force(preds[f], geom);
    acc += std::abs(f_pred - f_gt) / f_gt * 100.0;
    ++n;
  }
  require(n > 0, ErrorKind::numeric,
          "force_percent_mae: no frames above the non-zero force threshold");
  return acc / double(n);
}

struct GatedMetric {
  double mean = 0.0;
  size_t frames = 0;
  size_t misses = 0;  // gated frames where the metric was undefined
};

// Mean CoP distance over frames gated by ground-truth force >= gate_N.
// Gated frames whose prediction carries no pressure count as misses.
inline GatedMetric cop_distance(const std::vector<PressureMap>& preds,
                                const std::vector<PressureMap>& targets,
                                const SensorGeometry& geom, double gate_N = 2.0) {
  require(preds.size() == targets.size(), ErrorKind::data,
          "cop_distance: size mismatch");
  GatedMetric out;
  double acc = 0.0;
  for (size_t f = 0; f < preds.size(); ++f) {
    if (total_force(targets[f], geom) < gate_N) continue;
    double pred_sum = 0.0;
    for (float v : preds[f].pressure) pred_sum += v;
    if (pred_sum <= 0.0) {
      out.misses++;
      continue;
    }
    const Vec2 cp = center_of_pressure(preds[f], geom);
    const Vec2 ct = center_of_pressure(targets[f], geom);
    acc += std::hypot(cp.x - ct.x, cp.y - ct.y);
    out.frames++;
  }
  if (out.frames > 0) out.mean = acc / double(out.frames);
  return out;
}

// Otsu-binarized prediction vs support of the target, gated like CoP.
// Constant (degenerate-Otsu) predictions count as misses.
inline GatedMetric contact_iou(const std::vector<PressureMap>& preds,
                               const std::vector<PressureMap>& targets,
                               const SensorGeometry& geom, double gate_N = 2.0) {
  require(preds.size() == targets.size(), ErrorKind::data,
          "contact_iou: size mismatch");
  GatedMetric out;
  double acc = 0.0;
  for (size_t f = 0; f < preds.size(); ++f) {
    if (total_force(targets[f], geom) < gate_N) continue;
    double thresh;
    try {
      thresh = otsu_threshold(preds[f]);
    } catch (const Error&) {
      out.misses++;
      continue;
    }
    acc += iou(binarize(preds[f], thresh), support_mask(targets[f]));
    out.frames++;
  }
  if (out.frames > 0) out.mean = acc / double(out.frames);
  return out;
}

// ---- 4x4 segment heatmap ----

struct SegmentGrid {
  std::array<double, 16> mae{};   // kPa; valid only where count > 0
  std::array<int, 16> count{};

  double& at(int row, int col) { return mae[row * 4 + col]; }
  double at(int row, int col) const { return mae[row * 4 + col]; }
};

inline SegmentGrid segment_heatmap(const std::vector<double>& episode_maes,
                                   const std::vector<Vec2>& press_centers,
                                   const SensorGeometry& geom) {
  require(episode_maes.size() == press_centers.size(), ErrorKind::data,
          "segment_heatmap: size mismatch");
  SegmentGrid grid;
  std::array<double, 16> sums{};
  const double cell = geom.side_mm / 4.0;
  for (size_t i = 0; i < episode_maes.size(); ++i) {
    const int r = std::clamp(int(press_centers[i].x / cell), 0, 3);
    const int c = std::clamp(int(press_centers[i].y / cell), 0, 3);
    sums[r * 4 + c] += episode_maes[i];
    grid.count[r * 4 + c]++;
  }
  for (int i = 0; i < 16; ++i)
    grid.mae[i] = grid.count[i] > 0 ? sums[i] / grid.count[i] : 0.0;
  return grid;
}

// ---- full test-split evaluation ----

struct PerEpisodeRow {
  std::string id;
  Vec2 press_center_mm;
  double mae_kpa = 0.0;
  size_t frames = 0;
};

struct EvalReport {
  double mae_kpa = 0.0;
  double force_pct_mae = 0.0;
  double cop_err_mm = 0.0;
  double mean_iou = 0.0;
  size_t cop_frames = 0, cop_misses = 0;
  size_t iou_frames = 0, iou_misses = 0;
  size_t total_frames = 0;
  SegmentGrid segment_mae;
  std::vector<PerEpisodeRow> per_episode;
};

using Predictor = std::function<PressureMap(const FrameWindow&)>;

// Sweep every valid window of the chosen split through the predictor and
// aggregate the paper's metric suite.
inline EvalReport evaluate(const Predictor& predict, const fs::path& root,
                           const DatasetManifest& manifest, int H,
                           Split split = Split::test, double gate_N = 2.0,
                           size_t stride = 1) {
  EvalReport rep;
  std::vector<PressureMap> all_preds, all_targets;
  std::vector<double> ep_maes;
  std::vector<Vec2> ep_centers;

  for (const std::string& id : manifest.ids_in(split)) {
    const EpisodeMeta meta = read_episode_meta(root, id);
    if (meta.frames < size_t(H)) continue;
    double ep_ae = 0.0;
    size_t ep_px = 0, ep_frames = 0;
    for (size_t t = H - 1; t < meta.frames; t += stride) {
      FrameWindow w = read_window(root, id, manifest.geom, t, H);
      PressureMap target = read_pressure_frame(root, id, manifest.geom, t);
      PressureMap pred = predict(w);
      for (size_t i = 0; i < pred.pressure.size(); ++i)
        ep_ae += std::abs(double(pred.pressure[i]) - double(target.pressure[i]));
      ep_px += pred.pressure.size();
      ep_frames++;
      all_preds.push_back(std::move(pred));
      all_targets.push_back(std::move(target));
    }
    if (ep_frames == 0) continue;
    PerEpisodeRow row;
    row.id = id;
    row.press_center_mm = meta.contact.center_mm;
    row.mae_kpa = ep_ae / double(ep_px);
    row.frames = ep_frames;
    rep.per_episode.push_back(row);
    ep_maes.push_back(row.mae_kpa);
    ep_centers.push_back(row.press_center_mm);
  }
  require(!all_preds.empty(), ErrorKind::data, "evaluate: no usable test frames");

  rep.total_frames = all_preds.size();
  rep.mae_kpa = pixel_mae(all_preds, all_targets);
  rep.force_pct_mae = force_percent_mae(all_preds, all_targets, manifest.geom);
  const GatedMetric cop = cop_distance(all_preds, all_targets, manifest.geom, gate_N);
  rep.cop_err_mm = cop.mean;
  rep.cop_frames = cop.frames;
  rep.cop_misses = cop.misses;
  const GatedMetric ci = contact_iou(all_preds, all_targets, manifest.geom, gate_N);
  rep.mean_iou = ci.mean;
  rep.iou_frames = ci.frames;
  rep.iou_misses = ci.misses;
  rep.segment_mae = segment_heatmap(ep_maes, ep_centers, manifest.geom);
  return rep;
}

template <typename T>
inline Predictor model_predictor(UNet<T>& net) {
  return [&net](const FrameWindow& w) {
    return tensor_to_pressure(net.forward(window_to_tensor<T>(w, net.config())));
  };
}

inline Predictor zero_predictor(int grid) {
  return [grid](const FrameWindow&) { return PressureMap(grid); };
}

inline json report_to_json(const EvalReport& rep) {
  json j;
  j["mae_kpa"] = rep.mae_kpa;
  j["force_pct_mae"] = rep.force_pct_mae;
  j["cop_err_mm"] = rep.cop_err_mm;
  j["mean_iou"] = rep.mean_iou;
  j["total_frames"] = rep.total_frames;
  j["cop"] = {{"frames", rep.cop_frames}, {"misses", rep.cop_misses}};
  j["iou"] = {{"frames", rep.iou_frames}, {"misses", rep.iou_misses}};
  json seg = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) {
      if (rep.segment_mae.count[r * 4 + c] > 0)
        row.push_back(rep.segment_mae.at(r, c));
      else
        row.push_back(nullptr);  // empty cell
    }
    seg.push_back(row);
  }
  j["segment_mae_kpa"] = seg;
  json eps = json::array();
  for (const auto& row : rep.per_episode)
    eps.push_back({{"id", row.id},
                   {"press_center_mm", {row.press_center_mm.x, row.press_center_mm.y}},
                   {"mae_kpa", row.mae_kpa},
                   {"frames", row.frames}});
  j["per_episode"] = eps;
  return j;
}

// ---- streaming inference ----

// Ring buffer of the last H frames; front-filled by replicating the first
// frame until the window is warm. Emits one clamped map per frame.
template <typename T>
class StreamInfer {
 public:
  explicit StreamInfer(UNet<T>& net) : net_(net), H_(net.config().H) {}

  PressureMap push(const Frame& frame) {
    if (buf_.empty()) {
      for (int i = 0; i < H_; ++i) buf_.push_back(frame);
    } else {
      buf_.pop_front();
      buf_.push_back(frame);
    }
    const auto t0 = std::chrono::steady_clock::now();
    FrameWindow w;
    w.frames.assign(buf_.begin(), buf_.end());
    // replicated frames share a timestamp; bypass window validation
    Tensor<T> x = window_to_tensor_unchecked(w);
    PressureMap out = tensor_to_pressure(net_.forward(x));
    last_latency_s_ = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    ++emitted_;
    return out;
  }

  size_t emitted() const { return emitted_; }
  double last_latency_s() const { return last_latency_s_; }

 private:
  Tensor<T> window_to_tensor_unchecked(const FrameWindow& w) {
    const UNetConfig& cfg = net_.config();
    const int g = cfg.grid;
    Tensor<T> x(cfg.in_channels(), g, g);
    for (int f = 0; f < cfg.H; ++f)
      for (int r = 0; r < g; ++r)
        for (int c = 0; c < g; ++c)
          for (int ch = 0; ch < 3; ++ch)
            x.at(f * 3 + ch, r, c) = T(w.frames[f].at(r, c, ch));
    return x;
  }

  UNet<T>& net_;
  int H_;
  std::deque<Frame> buf_;
  size_t emitted_ = 0;
  double last_latency_s_ = 0.0;
};

}  // namespace beadsight
