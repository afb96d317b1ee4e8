#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "beadsight/dataset.hpp"
#include "beadsight/model.hpp"

namespace beadsight {

struct TrainConfig {
  size_t steps = 1000;
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 0;
  size_t val_every = 200;
  size_t val_stride = 1;  // frames between validation windows
  fs::path checkpoint_dir;

  void validate() const {
    require(batch_size > 0 && val_every > 0 && val_stride > 0, ErrorKind::data,
            "TrainConfig: counts must be positive");
    require(lr > 0.0, ErrorKind::data, "TrainConfig: lr must be > 0");
  }
};

template <typename T>
class Adam {
 public:
  Adam(const std::vector<Param<T>*>& params, const TrainConfig& cfg) : cfg_(cfg) {
    for (auto* p : params) {
      m_.emplace_back(p->size(), T(0));
      v_.emplace_back(p->size(), T(0));
    }
  }

  int64_t t() const { return t_; }

  void step(const std::vector<Param<T>*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      for (size_t j = 0; j < p.size(); ++j) {
        const double g = double(p.grad[j]);
        m_[i][j] = T(cfg_.beta1 * double(m_[i][j]) + (1.0 - cfg_.beta1) * g);
        v_[i][j] = T(cfg_.beta2 * double(v_[i][j]) + (1.0 - cfg_.beta2) * g * g);
        const double mhat = double(m_[i][j]) / bc1;
        const double vhat = double(v_[i][j]) / bc2;
        p.value[j] = T(double(p.value[j]) -
                       cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_t(int64_t t) { t_ = t; }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
};

// One Adam update over a batch; returns the mean batch MSE.
template <typename T>
inline double train_step(UNet<T>& net, Adam<T>& opt,
                         const std::vector<AugmentedSample>& batch) {
  require(!batch.empty(), ErrorKind::data, "train_step: empty batch");
  net.zero_grad();
  double loss_sum = 0.0;
  const T inv_b = T(1.0 / double(batch.size()));
  for (const AugmentedSample& s : batch) {
    Tensor<T> x = window_to_tensor<T>(s.window, net.config());
    Tensor<T> target = pressure_to_tensor<T>(s.target);
    Tensor<T> pred = net.forward(x);
    const double loss = double(mse_loss(pred, target));
    require(std::isfinite(loss), ErrorKind::numeric,
            "train_step: non-finite loss (diverged); try a lower learning rate");
    loss_sum += loss;
    Tensor<T> dy = mse_loss_grad(pred, target);
    for (T& g : dy.v) g *= inv_b;
    net.backward(dy);
  }
  opt.step(net.params());
  return loss_sum / double(batch.size());
}

struct ValMetrics {
  double mse = 0.0;
  double mae_kpa = 0.0;
  size_t frames = 0;
};

// Deterministic sweep over all valid windows of the given split, no
// augmentation. MSE on the raw output, MAE on the clamped map.
template <typename T>
inline ValMetrics validate(UNet<T>& net, const fs::path& root,
                           const DatasetManifest& manifest, Split split,
                           size_t stride = 1) {
  const UNetConfig& cfg = net.config();
  ValMetrics out;
  double se = 0.0, ae = 0.0;
  size_t px = 0;
  for (const std::string& id : manifest.ids_in(split)) {
    const size_t T_len = read_episode_meta(root, id).frames;
    if (T_len < size_t(cfg.H)) continue;
    for (size_t t = cfg.H - 1; t < T_len; t += stride) {
      FrameWindow w = read_window(root, id, manifest.geom, t, cfg.H);
      PressureMap target = read_pressure_frame(root, id, manifest.geom, t);
      Tensor<T> pred = net.forward(window_to_tensor<T>(w, cfg));
      for (size_t i = 0; i < pred.size(); ++i) {
        const double p = double(pred.v[i]);
        const double gt = double(target.pressure[i]);
        se += (p - gt) * (p - gt);
        ae += std::abs(std::max(0.0, p) - gt);
      }
      px += pred.size();
      out.frames++;
    }
  }
  require(px > 0, ErrorKind::data, "validate: no usable frames in split");
  out.mse = se / double(px);
  out.mae_kpa = ae / double(px);
  return out;
}

// ---- resumable optimizer state ----

inline constexpr uint32_t kTrainStateVersion = 1;

template <typename T>
inline void save_train_state(const fs::path& path, UNet<T>& net, Adam<T>& opt,
                             size_t step, double best_val, size_t best_step,
                             const Rng& sampler_rng) {
  nlohmann::json header;
  header["step"] = step;
  header["best_val"] = best_val;
  header["best_step"] = best_step;
  header["rng_key"] = sampler_rng.key();
  header["rng_counter"] = sampler_rng.counter();
  header["adam_t"] = opt.t();
  nlohmann::json tensors = nlohmann::json::array();
  for (auto* p : net.params())
    tensors.push_back({{"name", p->name}, {"shape", p->shape}});
  header["tensors"] = tensors;

  const std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot write train state " + path.string());
  f.write("BSTS", 4);
  auto put_u32 = [&f](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kTrainStateVersion);
  put_u32(uint32_t(hs.size()));
  f.write(hs.data(), std::streamsize(hs.size()));

  auto write_f32 = [&f](const std::vector<T>& v) {
    std::vector<float> buf(v.size());
    for (size_t i = 0; i < v.size(); ++i) buf[i] = float(v[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
  };
  for (auto* p : net.params()) write_f32(p->value);
  for (auto& m : opt.first_moments()) write_f32(m);
  for (auto& v : opt.second_moments()) write_f32(v);
  require(f.good(), ErrorKind::data, "short write to train state " + path.string());
}

template <typename T>
struct ResumeInfo {
  size_t step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  size_t best_step = 0;
  Rng sampler_rng{0};
};

template <typename T>
inline ResumeInfo<T> load_train_state(const fs::path& path, UNet<T>& net,
                                      Adam<T>& opt) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open train state " + path.string());
  char magic[4];
  f.read(magic, 4);
  require(f.good() && std::memcmp(magic, "BSTS", 4) == 0, ErrorKind::data,
          "not a train state file: " + path.string());
  uint32_t version = 0, hlen = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&hlen), 4);
  require(f.good() && version == kTrainStateVersion, ErrorKind::data,
          "unsupported train state version");
  std::string hs(hlen, '\0');
  f.read(hs.data(), hlen);
  const nlohmann::json header = nlohmann::json::parse(hs);

  auto params = net.params();
  const auto& tensors = header.at("tensors");
  require(tensors.size() == params.size(), ErrorKind::data,
          "train state tensor count mismatch");
  for (size_t i = 0; i < params.size(); ++i)
    require(tensors[i].at("name").get<std::string>() == params[i]->name,
            ErrorKind::data, "train state tensor name mismatch");

  auto read_f32 = [&f, &path](std::vector<T>& v) {
    std::vector<float> buf(v.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           std::streamsize(buf.size() * sizeof(float)));
    require(f.good(), ErrorKind::data, "truncated train state " + path.string());
    for (size_t i = 0; i < v.size(); ++i) v[i] = T(buf[i]);
  };
  for (auto* p : params) read_f32(p->value);
  for (auto& m : opt.first_moments()) read_f32(m);
  for (auto& v : opt.second_moments()) read_f32(v);

  opt.set_t(header.at("adam_t").get<int64_t>());
  ResumeInfo<T> info;
  info.step = header.at("step").get<size_t>();
  info.best_val = header.at("best_val").get<double>();
  info.best_step = header.at("best_step").get<size_t>();
  info.sampler_rng = Rng::from_state(header.at("rng_key").get<uint64_t>(),
                                     header.at("rng_counter").get<uint64_t>());
  return info;
}

struct FitResult {
  fs::path best_checkpoint;
  fs::path latest_checkpoint;
  size_t steps_run = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

// Full training loop: sample, update, validate, checkpoint best and latest.
template <typename T>
inline FitResult fit(const TrainConfig& cfg, const UNetConfig& ucfg,
                     const fs::path& data_root, const DatasetManifest& manifest,
                     std::ostream* log = nullptr, bool resume = false) {
  cfg.validate();
  ucfg.validate();
  fs::create_directories(cfg.checkpoint_dir);
  const fs::path best_path = cfg.checkpoint_dir / "best.ckpt";
  const fs::path latest_path = cfg.checkpoint_dir / "latest.ckpt";
  const fs::path state_path = cfg.checkpoint_dir / "latest.state";

  UNet<T> net(ucfg);
  net.init_params(cfg.seed);
  Adam<T> opt(net.params(), cfg);
  TrainSampler sampler(data_root, manifest, ucfg.H, Rng(cfg.seed, 0x5A));

  FitResult res;
  size_t start_step = 0;
  size_t best_step = 0;
  if (resume && fs::exists(state_path)) {
    auto info = load_train_state(state_path, net, opt);
    start_step = info.step;
    res.best_val = info.best_val;
    best_step = info.best_step;
    sampler.set_rng(info.sampler_rng);
  }

  if (cfg.steps == 0 || !fs::exists(best_path)) {
    save_checkpoint(best_path, net);
    save_checkpoint(latest_path, net);
  }

  const bool has_val = !manifest.ids_in(Split::val).empty();
  for (size_t step = start_step; step < cfg.steps; ++step) {
    std::vector<AugmentedSample> batch;
    batch.reserve(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(sampler.sample());
    const double train_mse = train_step(net, opt, batch);

    const bool do_val =
        has_val && ((step + 1) % cfg.val_every == 0 || step + 1 == cfg.steps);
    if (log) {
      *log << step + 1 << ", " << train_mse;
    }
    if (do_val) {
      const ValMetrics vm = validate(net, data_root, manifest, Split::val,
                                     cfg.val_stride);
      if (log) *log << ", " << vm.mse << ", " << vm.mae_kpa;
      if (vm.mse < res.best_val) {
        res.best_val = vm.mse;
        best_step = step + 1;
        save_checkpoint(best_path, net);
      }
      save_checkpoint(latest_path, net);
      save_train_state(state_path, net, opt, step + 1, res.best_val, best_step,
                       sampler.rng());
    }
    if (log) *log << "\n" << std::flush;
    res.steps_run = step + 1;
  }

  save_checkpoint(latest_path, net);
  save_train_state(state_path, net, opt, std::max(start_step, cfg.steps),
                   res.best_val, best_step, sampler.rng());
  if (!has_val && cfg.steps > 0) save_checkpoint(best_path, net);

  res.best_checkpoint = best_path;
  res.latest_checkpoint = latest_path;
  return res;
}

}  // namespace beadsight
