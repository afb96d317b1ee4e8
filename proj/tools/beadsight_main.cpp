// beadsight: synthetic tactile-sensor pipeline in one binary.
//   gen    synthesize a press dataset (episodes + split manifest)
//   train  fit the pressure-map network on a dataset
//   eval   metric report + figures for a checkpoint on the test split
//   infer  streaming per-frame inference over a recorded episode
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "beadsight/evaluation.hpp"
#include "beadsight/figures.hpp"
#include "beadsight/simulator.hpp"
#include "beadsight/training.hpp"

namespace bs = beadsight;
using bs::fs::path;
using json = nlohmann::json;

namespace {

void write_config_echo(const path& dir, const json& resolved) {
  bs::fs::create_directories(dir);
  std::ofstream f(dir / "config.json", std::ios::binary);
  bs::require(f.good(), bs::ErrorKind::data,
              "cannot write config echo in " + dir.string());
  f << resolved.dump(2) << "\n";
}

struct GenArgs {
  std::string out;
  int episodes = 0;
  uint64_t seed = 0;
  int frames = 192;
  int grid = 256;
  double finger_radius_mm = 5.0;
  double peak_force_n = 20.0;
  int beads = 100;
  double bead_radius_mm = 2.0;
  double noise_std = 0.0;
  bool force = false;
};

int cmd_gen(const GenArgs& a) {
  const path root = a.out;
  if (bs::fs::exists(root) && !bs::fs::is_empty(root)) {
    bs::require(a.force, bs::ErrorKind::data,
                "output directory is not empty (pass --force to overwrite): " +
                    root.string());
    bs::fs::remove_all(root);
  }

  bs::SimConfig cfg;
  cfg.seed = a.seed;
  cfg.n_episodes = a.episodes;
  cfg.frames_per_episode = a.frames;
  cfg.force_peak_N = a.peak_force_n;
  cfg.finger_radius_mm = a.finger_radius_mm;
  cfg.n_beads = a.beads;
  cfg.bead_radius_mm = a.bead_radius_mm;
  cfg.noise_std = a.noise_std;
  cfg.geom.grid = a.grid;
  cfg.validate();

  const json resolved = {
      {"command", "gen"},        {"episodes", a.episodes},
      {"seed", a.seed},          {"frames", a.frames},
      {"grid", a.grid},          {"finger_radius_mm", a.finger_radius_mm},
      {"peak_force_n", a.peak_force_n}, {"beads", a.beads},
      {"bead_radius_mm", a.bead_radius_mm}, {"noise_std", a.noise_std}};

  for (int i = 0; i < a.episodes; ++i) {
    bs::write_episode(bs::generate_episode(cfg, i), root);
    std::cout << "episode " << i + 1 << "/" << a.episodes << "\r" << std::flush;
  }
  std::cout << "\n";

  bs::DatasetManifest m = bs::read_manifest(root);
  m.geom = cfg.geom;
  m.split = bs::split_episodes(m.episode_ids, {0.7, 0.1, 0.2}, a.seed);
  m.provenance = resolved.dump();
  bs::write_manifest(m, root);
  write_config_echo(root, resolved);
  std::cout << "wrote " << a.episodes << " episodes to " << root.string()
            << " (train/val/test = " << m.ids_in(bs::Split::train).size() << "/"
            << m.ids_in(bs::Split::val).size() << "/"
            << m.ids_in(bs::Split::test).size() << ")\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  size_t steps = 1000;
  uint64_t seed = 0;
  double lr = 1e-4;
  int batch = 16;
  int h = 15;
  int base_channels = 64;
  size_t val_every = 200;
  size_t val_stride = 1;
  bool resume = false;
};

int cmd_train(const TrainArgs& a) {
  const path root = a.data;
  const path out = a.out;
  bs::DatasetManifest m = bs::read_manifest(root);

  bs::UNetConfig ucfg;
  ucfg.H = a.h;
  ucfg.grid = m.geom.grid;
  ucfg.base_channels = a.base_channels;

  bs::TrainConfig tc;
  tc.steps = a.steps;
  tc.batch_size = a.batch;
  tc.lr = a.lr;
  tc.seed = a.seed;
  tc.val_every = a.val_every;
  tc.val_stride = a.val_stride;
  tc.checkpoint_dir = out;

  const json resolved = {{"command", "train"}, {"data", root.string()},
                         {"steps", a.steps},   {"seed", a.seed},
                         {"lr", a.lr},         {"batch", a.batch},
                         {"h", a.h},           {"base_channels", a.base_channels},
                         {"grid", ucfg.grid},  {"val_every", a.val_every},
                         {"val_stride", a.val_stride}};
  write_config_echo(out, resolved);

  const auto mode = a.resume ? std::ios::app : std::ios::trunc;
  std::ofstream log(out / "train_log.txt", mode);
  bs::require(log.good(), bs::ErrorKind::data, "cannot open train log");

  bs::FitResult res = bs::fit<float>(tc, ucfg, root, m, &log, a.resume);
  std::cout << "ran " << res.steps_run << " steps; best val MSE "
            << res.best_val << "\nbest:   " << res.best_checkpoint.string()
            << "\nlatest: " << res.latest_checkpoint.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  double gate_n = 2.0;
  size_t stride = 1;
  std::string baseline;  // "zero" for the no-model baseline
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a) {
  const path root = a.data;
  const path out = a.out;
  bs::DatasetManifest m = bs::read_manifest(root);
  const bs::Split split = bs::split_from_name(a.split);

  bs::Predictor predict;
  int H = 1;
  std::string ckpt_hash;
  std::unique_ptr<bs::UNet<float>> net;
  if (a.baseline == "zero") {
    predict = bs::zero_predictor(m.geom.grid);
  } else {
    bs::require(!a.checkpoint.empty(), bs::ErrorKind::usage,
                "--checkpoint is required unless --baseline zero is given");
    const bs::UNetConfig ucfg = bs::checkpoint_config(a.checkpoint);
    bs::require(ucfg.grid == m.geom.grid, bs::ErrorKind::data,
                "checkpoint grid does not match dataset grid");
    net = std::make_unique<bs::UNet<float>>(ucfg);
    bs::load_checkpoint(a.checkpoint, *net);
    predict = bs::model_predictor(*net);
    H = ucfg.H;
    ckpt_hash = bs::file_fnv1a_hex(a.checkpoint);
  }

  const bs::EvalReport rep =
      bs::evaluate(predict, root, m, H, split, a.gate_n, a.stride);

  const json resolved = {{"command", "eval"},   {"data", root.string()},
                         {"checkpoint", a.checkpoint},
                         {"gate_n", a.gate_n},  {"stride", a.stride},
                         {"baseline", a.baseline}, {"split", a.split}};
  write_config_echo(out, resolved);

  json j = bs::report_to_json(rep);
  j["config"] = resolved;
  j["checkpoint_fnv1a"] = ckpt_hash;
  {
    std::ofstream f(out / "report.json", std::ios::binary);
    bs::require(f.good(), bs::ErrorKind::data, "cannot write report.json");
    f << j.dump(2) << "\n";
  }
  {
    std::ofstream f(out / "report.txt", std::ios::binary);
    f << "pixel MAE (kPa):        " << rep.mae_kpa << "\n"
      << "force error (%):        " << rep.force_pct_mae << "\n"
      << "CoP error (mm):         " << rep.cop_err_mm << "  ("
      << rep.cop_frames << " frames, " << rep.cop_misses << " misses)\n"
      << "contact IOU:            " << rep.mean_iou << "  (" << rep.iou_frames
      << " frames, " << rep.iou_misses << " misses)\n"
      << "frames evaluated:       " << rep.total_frames << "\n";
  }

  bs::save_segment_heatmap_png(out / "segment_heatmap.png", rep.segment_mae);
  if (!rep.per_episode.empty()) {
    // reconstruction figure for the final frame of the first episode
    const std::string& id = rep.per_episode.front().id;
    const size_t t = bs::read_episode_meta(root, id).frames - 1;
    bs::FrameWindow w = bs::read_window(root, id, m.geom, t, H);
    bs::PressureMap target = bs::read_pressure_frame(root, id, m.geom, t);
    bs::save_comparison_png(out / "sample_reconstruction.png", target,
                            predict(w));
  }

  std::cout << "MAE " << rep.mae_kpa << " kPa | force " << rep.force_pct_mae
            << "% | CoP " << rep.cop_err_mm << " mm | IOU " << rep.mean_iou
            << "\nreport: " << (out / "report.json").string() << "\n";
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string source;  // episode directory (meta.json + frames.u8)
  std::string out;
};

int cmd_infer(const InferArgs& a) {
  const path src = a.source;
  const path out = a.out;
  const bs::UNetConfig ucfg = bs::checkpoint_config(a.checkpoint);
  bs::UNet<float> net(ucfg);
  bs::load_checkpoint(a.checkpoint, net);
  bs::SensorGeometry geom;
  geom.grid = ucfg.grid;

  const json resolved = {{"command", "infer"},
                         {"checkpoint", a.checkpoint},
                         {"source", src.string()},
                         {"h", ucfg.H},
                         {"grid", ucfg.grid}};
  write_config_echo(out, resolved);

  size_t n_frames = 0;
  if (bs::fs::exists(src / "meta.json"))
    n_frames = bs::read_episode_meta(src.parent_path().parent_path(),
                                     src.filename().string())
                   .frames;

  std::ofstream csv(out / "timeseries.csv", std::ios::binary);
  bs::require(csv.good(), bs::ErrorKind::data, "cannot write timeseries.csv");
  csv << "frame,force_N,cop_x_mm,cop_y_mm,latency_s\n";
  std::ofstream maps(out / "pred_pressure.f32", std::ios::binary);
  bs::require(maps.good(), bs::ErrorKind::data, "cannot write pred_pressure.f32");

  if (n_frames == 0) {
    std::cout << "empty source, wrote empty outputs\n";
    return 0;
  }

  const size_t frame_bytes = size_t(geom.grid) * geom.grid * 3;
  std::ifstream frames(src / "frames.u8", std::ios::binary);
  bs::require(frames.good(), bs::ErrorKind::data,
              "cannot open " + (src / "frames.u8").string());

  bs::StreamInfer<float> stream(net);
  std::vector<uint8_t> buf(frame_bytes);
  for (size_t t = 0; t < n_frames; ++t) {
    frames.read(reinterpret_cast<char*>(buf.data()),
                std::streamsize(buf.size()));
    bs::require(size_t(frames.gcount()) == buf.size(), bs::ErrorKind::data,
                "short read of frames.u8");
    const bs::Frame fr =
        bs::frame_from_u8(buf.data(), geom.grid, double(t) / geom.frame_hz);
    const bs::PressureMap pred = stream.push(fr);

    maps.write(reinterpret_cast<const char*>(pred.pressure.data()),
               std::streamsize(pred.pressure.size() * sizeof(float)));
    const double force = bs::total_force(pred, geom);
    double sum = 0.0;
    for (float v : pred.pressure) sum += v;
    csv << t << "," << force << ",";
    if (sum > 0.0) {
      const bs::Vec2 cop = bs::center_of_pressure(pred, geom);
      csv << cop.x << "," << cop.y;
    } else {
      csv << "nan,nan";
    }
    csv << "," << stream.last_latency_s() << "\n";
  }
  std::cout << "streamed " << stream.emitted() << " frames to "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BeadSight synthetic tactile-sensing pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "TOML config file with [gen]/[train]/[eval]/[infer] sections; "
                 "command-line flags take precedence");
  int workers = 1;
  app.add_option("--workers", workers,
                 "parallel worker cap (this build runs single-threaded)")
      ->envname("BEADNET_WORKERS");

  GenArgs ga;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--out", ga.out, "dataset output directory")->required();
  gen->add_option("--episodes", ga.episodes, "number of press episodes")
      ->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "master random seed")->capture_default_str();
  gen->add_option("--frames", ga.frames, "mean frames per episode")
      ->capture_default_str();
  gen->add_option("--grid", ga.grid, "pressure/image grid resolution")
      ->capture_default_str();
  gen->add_option("--finger-radius-mm", ga.finger_radius_mm, "press radius")
      ->capture_default_str();
  gen->add_option("--peak-force-n", ga.peak_force_n, "maximum peak force")
      ->capture_default_str();
  gen->add_option("--beads", ga.beads, "bead count")->capture_default_str();
  gen->add_option("--bead-radius-mm", ga.bead_radius_mm, "bead radius")
      ->capture_default_str();
  gen->add_option("--noise-std", ga.noise_std, "image noise sigma")
      ->capture_default_str();
  gen->add_flag("--force", ga.force, "overwrite a non-empty output directory");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "train the pressure network");
  train->set_help_flag("--help", "print help");  // frees -h for the window flag
  train->add_option("--data", ta.data, "dataset root")->required();
  train->add_option("--out", ta.out, "checkpoint/log directory")->required();
  train->add_option("--steps", ta.steps, "optimizer steps")->capture_default_str();
  train->add_option("--seed", ta.seed, "seed")->capture_default_str();
  train->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--batch", ta.batch, "batch size")->capture_default_str();
  train->add_option("--h", ta.h, "frames per input window")->capture_default_str();
  train->add_option("--base-channels", ta.base_channels,
                    "encoder width at full resolution")->capture_default_str();
  train->add_option("--val-every", ta.val_every, "steps between validations")
      ->capture_default_str();
  train->add_option("--val-stride", ta.val_stride,
                    "frame stride for validation sweeps")->capture_default_str();
  train->add_flag("--resume", ta.resume, "resume from <out>/latest.state");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", ea.data, "dataset root")->required();
  eval->add_option("--checkpoint", ea.checkpoint, "model checkpoint");
  eval->add_option("--out", ea.out, "report/figure directory")->required();
  eval->add_option("--gate-n", ea.gate_n,
                   "force gate for CoP and IOU metrics (N)")
      ->capture_default_str();
  eval->add_option("--stride", ea.stride, "frame stride")->capture_default_str();
  eval->add_option("--baseline", ea.baseline,
                   "'zero': evaluate the all-zero predictor instead");
  eval->add_option("--split", ea.split, "split to evaluate")
      ->capture_default_str();

  InferArgs ia;
  CLI::App* infer = app.add_subcommand("infer", "stream over a recorded episode");
  infer->add_option("--checkpoint", ia.checkpoint, "model checkpoint")->required();
  infer->add_option("--source", ia.source, "episode directory")->required();
  infer->add_option("--out", ia.out, "output directory")->required();

  try {
    app.parse(argc, argv);
    (void)workers;  // single-core build: accepted for interface compatibility
    if (gen->parsed()) return cmd_gen(ga);
    if (train->parsed()) return cmd_train(ta);
    if (eval->parsed()) return cmd_eval(ea);
    if (infer->parsed()) return cmd_infer(ia);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors map to exit code 1
  } catch (const bs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return int(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
