#include "scotopic/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "scotopic/idx.hpp"
#include "scotopic/model_io.hpp"
#include "scotopic/spiking.hpp"
#include "scotopic/synth.hpp"
#include "scotopic/util.hpp"

namespace scotopic {

namespace {

namespace fs = std::filesystem;

class StageTimer {
 public:
  explicit StageTimer(ExperimentManifest& m) : manifest_(m) {}

  template <typename F>
  auto run(const std::string& name, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish(name, start);
      } else {
        auto result = fn();
        finish(name, start);
        return result;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + name + "': " + e.what());
    }
  }

 private:
  void finish(const std::string& name,
              std::chrono::steady_clock::time_point start) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest_.add_stage(name, secs);
  }

  ExperimentManifest& manifest_;
};

void emit(ExperimentManifest& manifest, const std::string& out_dir,
          const std::string& name, const std::string& bytes) {
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << bytes;
  manifest.add_artifact(name, bytes);
}

ExperimentManifest start_manifest(const ExperimentConfig& cfg, const std::string& command) {
  ExperimentManifest m;
  m.command = command;
  m.seed = cfg.run.seed;
  m.config_text = serialize_config(cfg);
  return m;
}

void finish_manifest(ExperimentManifest& m, const ExperimentConfig& cfg,
                     const std::string& command) {
  fs::create_directories(cfg.run.out_dir);
  m.save(cfg.run.out_dir + "/" + command + "_manifest.txt");
}

std::vector<IntensityImage> take_subset(std::vector<IntensityImage> v, int n) {
  if (n > 0 && static_cast<size_t>(n) < v.size()) v.resize(n);
  return v;
}

std::string train_log_csv(const TrainReport& report) {
  std::string csv = "epoch,mean_nll,t0\n";
  for (size_t e = 0; e < report.epoch_loss.size(); ++e) {
    csv += std::to_string(e) + "," + format_double(report.epoch_loss[e]) + ",";
    csv += e < report.t0_trace.size() ? format_double(report.t0_trace[e]) : std::string("");
    csv += "\n";
  }
  return csv;
}

SatOptions sat_options_from(const ExperimentConfig& cfg) {
  SatOptions opt;
  opt.regime = cfg.sprt.regime == "FR" ? Regime::FreeResponse : Regime::Interrogation;
  opt.values = opt.regime == Regime::FreeResponse ? cfg.sprt.thresholds : cfg.sprt.int_ppps;
  opt.grid = cfg.query_grid();
  opt.max_ppp = cfg.sprt.max_ppp;
  opt.bootstrap = cfg.sprt.bootstrap;
  opt.stream_seed = mix_seed(cfg.run.seed, 11);
  opt.readout_seed = mix_seed(cfg.run.seed, 12);
  opt.bootstrap_seed = mix_seed(cfg.run.seed, 13);
  opt.threads = cfg.run.threads;
  return opt;
}

}  // namespace

LoadedData load_dataset(const ExperimentConfig& cfg) {
  LoadedData data;
  if (cfg.dataset.train_images.empty()) {
    data.train = synth_digits(cfg.dataset.synth_train, mix_seed(cfg.run.seed, 101));
    data.test = synth_digits(cfg.dataset.synth_test, mix_seed(cfg.run.seed, 202));
  } else {
    data.train = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
    data.test = load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
  }
  data.train = take_subset(std::move(data.train), cfg.dataset.train_subset);
  data.test = take_subset(std::move(data.test), cfg.dataset.test_subset);
  return data;
}

std::unique_ptr<PosteriorModel> ModelBundle::posterior() const {
  if (kind == "waldnet") return std::make_unique<AdaptedPosterior>(adapted);
  if (kind == "rate") return std::make_unique<RatePosterior>(rate);
  if (kind == "ensemble") return std::make_unique<EnsemblePosterior>(ensemble);
  if (kind == "photopic") return std::make_unique<PhotopicPosterior>(ensemble.members.back());
  if (kind == "waldnet-estimated-light")
    return std::make_unique<EstimatedLightPosterior>(adapted, estimator);
  throw std::invalid_argument("bundle: unknown model kind '" + kind + "'");
}

ModelBundle train_bundle(const ExperimentConfig& cfg,
                         const std::vector<IntensityImage>& train_data,
                         TrainReport* report) {
  ModelBundle bundle;
  bundle.kind = cfg.model.kind;
  const ArchKind arch = cfg.model.arch == "conv" ? ArchKind::Conv : ArchKind::Mlp;
  if (cfg.model.kind == "waldnet" || cfg.model.kind == "waldnet-estimated-light") {
    bundle.adapted = train_posterior(train_data, cfg.train, cfg.noise, arch, report);
  } else if (cfg.model.kind == "rate") {
    bundle.rate = train_rate(train_data, cfg.train, cfg.noise, arch, report);
  } else if (cfg.model.kind == "ensemble") {
    bundle.ensemble.members = train_ensemble(train_data, cfg.model.anchors, cfg.train,
                                             cfg.noise, arch, report);
  } else if (cfg.model.kind == "photopic") {
    // the photopic baseline is the brightest specialist applied to rescaled input
    const std::vector<double> top = {cfg.model.anchors.back()};
    bundle.ensemble.members =
        train_ensemble(train_data, top, cfg.train, cfg.noise, arch, report);
  } else {
    throw std::invalid_argument("train: unknown model kind '" + cfg.model.kind + "'");
  }
  return bundle;
}

ModelBundle load_bundle(const ExperimentConfig& cfg) {
  if (cfg.model.model_path.empty())
    throw std::invalid_argument("model_path must be set for evaluation commands");
  ModelBundle bundle;
  bundle.kind = cfg.model.kind;
  const std::string bytes = read_file_bytes(cfg.model.model_path);
  const int kind = model_kind(bytes);
  if (cfg.model.kind == "waldnet" || cfg.model.kind == "waldnet-estimated-light") {
    if (kind != 1) throw std::runtime_error("model file is not an adapted network");
    bundle.adapted = adapted_from_bytes(bytes);
  } else if (cfg.model.kind == "rate") {
    if (kind != 2) throw std::runtime_error("model file is not a plain network");
    bundle.rate = plain_from_bytes(bytes);
  } else if (cfg.model.kind == "ensemble" || cfg.model.kind == "photopic") {
    if (kind != 3) throw std::runtime_error("model file is not an ensemble");
    bundle.ensemble.members = ensemble_from_bytes(bytes);
  } else {
    throw std::invalid_argument("load: unknown model kind '" + cfg.model.kind + "'");
  }
  if (cfg.model.kind == "waldnet-estimated-light") {
    std::ifstream in(cfg.model.estimator_path);
    if (!in)
      throw std::runtime_error("cannot open estimator_path " + cfg.model.estimator_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    bundle.estimator = light_estimator_from_csv(text);
  }
  return bundle;
}

std::string exposure_table_csv(const std::vector<double>& illuminances,
                               const std::vector<double>& times) {
  if (illuminances.empty() || times.empty())
    throw std::invalid_argument("exposure_table: empty grid");
  std::string csv = "illuminance_lux";
  for (double t : times) csv += ",t=" + format_double(t) + "s";
  csv += "\n";
  for (double lux : illuminances) {
    csv += format_double(lux);
    for (double t : times) csv += "," + format_double(bits_of_signal(t, lux));
    csv += "\n";
  }
  return csv;
}

ExperimentManifest run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "train");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  TrainReport report;
  const ModelBundle bundle =
      timer.run("train", [&] { return train_bundle(cfg, data.train, &report); });
  timer.run("emit", [&] {
    std::string bytes;
    if (bundle.kind == "waldnet" || bundle.kind == "waldnet-estimated-light")
      bytes = adapted_to_bytes(bundle.adapted);
    else if (bundle.kind == "rate")
      bytes = plain_to_bytes(bundle.rate);
    else
      bytes = ensemble_to_bytes(bundle.ensemble.members);
    emit(manifest, cfg.run.out_dir, "model.bin", bytes);
    emit(manifest, cfg.run.out_dir, "train_log.csv", train_log_csv(report));
  });
  finish_manifest(manifest, cfg, "train");
  return manifest;
}

ExperimentManifest run_tune_thresholds(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "tune-thresholds");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  const ModelBundle bundle = timer.run("load-model", [&] { return load_bundle(cfg); });
  const auto model = bundle.posterior();

  const RiskDataset risk = timer.run("trajectories", [&] {
    const std::vector<double> grid = cfg.query_grid();
    const double per_bin = cfg.noise.ppp_per_bin();
    const int bins = std::max(1, static_cast<int>(std::lround(cfg.sprt.max_ppp / per_bin)));
    std::vector<Trajectory> trs(data.train.size());
    parallel_chunks(data.train.size(), 16, cfg.run.threads, [&](size_t b, size_t e) {
      for (size_t i = b; i < e; ++i) {
        PhotonStream stream(data.train[i], cfg.noise, bins, mix_seed(cfg.run.seed, 300 + i));
        trs[i] = eval_trajectory(stream, *model, grid, mix_seed(cfg.run.seed, 400 + i));
      }
    });
    return risk_dataset_from_trajectories(trs, cfg.noise.bin_width);
  });

  timer.run("optimize", [&] {
    for (double eta : cfg.sprt.etas) {
      const ThresholdSchedule init = best_constant_schedule(risk, eta, 50, cfg.anneal.step_cost);
      const ThresholdSchedule tuned = optimize_schedule(risk, eta, cfg.anneal, init);
      emit(manifest, cfg.run.out_dir, "schedule_eta_" + format_double(eta) + ".csv",
           schedule_csv(tuned, eta, cfg.anneal, cfg.run.seed));
    }
  });
  finish_manifest(manifest, cfg, "tune-thresholds");
  return manifest;
}

ExperimentManifest run_sweep_sat(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "sweep-sat");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  const ModelBundle bundle = timer.run("load-model", [&] { return load_bundle(cfg); });
  const auto model = bundle.posterior();
  const std::vector<SatRow> rows = timer.run("sweep", [&] {
    return sat_sweep(data.test, *model, cfg.noise, sat_options_from(cfg));
  });
  timer.run("emit", [&] {
    std::string csv = sat_csv_header() + "\n";
    for (const SatRow& r : rows) csv += sat_csv_row(r) + "\n";
    emit(manifest, cfg.run.out_dir, "sat.csv", csv);
  });
  finish_manifest(manifest, cfg, "sweep-sat");
  return manifest;
}

ExperimentManifest run_sweep_noise(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sweep_noise.parameter != "dark_current" &&
      cfg.sweep_noise.parameter != "read_noise_std" &&
      cfg.sweep_noise.parameter != "fpn_std" &&
      cfg.sweep_noise.parameter != "jitter_std_deg")
    throw std::invalid_argument("sweep-noise: unknown parameter '" +
                                cfg.sweep_noise.parameter + "'");
  ExperimentManifest manifest = start_manifest(cfg, "sweep-noise");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  const ModelBundle bundle = timer.run("load-model", [&] { return load_bundle(cfg); });
  const auto model = bundle.posterior();

  std::string csv = "parameter,value," + sat_csv_header() + "\n";
  timer.run("sweep", [&] {
    for (double value : cfg.sweep_noise.values) {
      NoiseConfig noise = cfg.noise;
      if (cfg.sweep_noise.parameter == "dark_current") noise.dark_current = value;
      if (cfg.sweep_noise.parameter == "read_noise_std") noise.read_noise_std = value;
      if (cfg.sweep_noise.parameter == "fpn_std") noise.fpn_std = value;
      if (cfg.sweep_noise.parameter == "jitter_std_deg") noise.jitter_std_deg = value;
      SatOptions opt = sat_options_from(cfg);
      opt.regime = Regime::FreeResponse;
      opt.values = cfg.sprt.thresholds;
      for (const SatRow& r : sat_sweep(data.test, *model, noise, opt))
        csv += cfg.sweep_noise.parameter + "," + format_double(value) + "," +
               sat_csv_row(r) + "\n";
    }
  });
  timer.run("emit", [&] { emit(manifest, cfg.run.out_dir, "noise_sweep.csv", csv); });
  finish_manifest(manifest, cfg, "sweep-noise");
  return manifest;
}

ExperimentManifest run_fit_light(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "fit-light");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  const LightEstimator est = timer.run("fit", [&] {
    std::vector<std::pair<CountImage, double>> pairs;
    size_t img_idx = 0;
    for (double anchor : cfg.model.anchors) {
      for (int i = 0; i < cfg.light.train_per_anchor; ++i) {
        const IntensityImage& img = data.train[img_idx % data.train.size()];
        pairs.emplace_back(
            simulate_counts(img, cfg.noise, anchor, mix_seed(cfg.run.seed, 500 + img_idx)),
            anchor);
        ++img_idx;
      }
    }
    return fit_light_estimator(pairs, cfg.light.s_candidates, cfg.light.k_candidates,
                               mix_seed(cfg.run.seed, 77));
  });
  timer.run("emit",
            [&] { emit(manifest, cfg.run.out_dir, "light.csv", light_estimator_csv(est)); });
  finish_manifest(manifest, cfg, "fit-light");
  return manifest;
}

ExperimentManifest run_spiking_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "spiking-bench");
  StageTimer timer(manifest);
  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  ExperimentConfig mcfg = cfg;
  mcfg.model.kind = "waldnet";
  const ModelBundle bundle = timer.run("load-model", [&] { return load_bundle(mcfg); });

  // The bench compares raw-count pipelines: readout corruption is not part of
  // the recurrent runtime, so it is disabled for both sides.
  NoiseConfig noise = cfg.noise;
  noise.read_noise_std = 0.0;
  noise.fpn_std = 0.0;

  std::string csv = "tau_dis,error_rate,median_ppp,mult_ratio,spikes_total\n";
  timer.run("bench", [&] {
    const std::vector<double> grid = cfg.query_grid();
    const ThresholdSchedule schedule = ThresholdSchedule::constant(cfg.spiking.threshold);
    const int n = std::min<int>(cfg.spiking.n_examples, static_cast<int>(data.test.size()));
    const double per_bin = noise.ppp_per_bin();
    const int bins = std::max(1, static_cast<int>(std::lround(cfg.sprt.max_ppp / per_bin)));

    std::vector<size_t> baseline_mults(n, 0);
    std::vector<uint8_t> baseline_wrong(n, 0);
    for (double tau : cfg.spiking.tau_dis) {
      size_t s_mults = 0, spikes = 0, b_mults = 0;
      int wrong = 0;
      std::vector<double> stop_ppps;
      for (int i = 0; i < n; ++i) {
        PhotonStream stream(data.test[i], noise, bins, mix_seed(cfg.run.seed, 600 + i));
        const SpikingResult sr = run_stream_spiking(stream, bundle.adapted, schedule, grid,
                                                    cfg.sprt.max_ppp, tau);
        if (baseline_mults[i] == 0) {
          const SpikingResult br =
              continuous_baseline(stream, bundle.adapted, schedule, grid, cfg.sprt.max_ppp);
          baseline_mults[i] = br.power.baseline_mults;
          baseline_wrong[i] = br.trace.correct() ? 0 : 1;
        }
        s_mults += sr.power.spiking_mults;
        b_mults += baseline_mults[i];
        spikes += sr.power.spikes_total;
        wrong += sr.trace.correct() ? 0 : 1;
        stop_ppps.push_back(sr.trace.stop_ppp);
      }
      csv += format_double(tau) + "," + format_double(double(wrong) / n) + "," +
             format_double(median_of(stop_ppps)) + "," +
             format_double(double(s_mults) / double(b_mults)) + "," +
             std::to_string(spikes) + "\n";
    }
  });
  timer.run("emit", [&] { emit(manifest, cfg.run.out_dir, "spiking.csv", csv); });
  finish_manifest(manifest, cfg, "spiking-bench");
  return manifest;
}

ExperimentManifest run_exposure_table(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "exposure-table");
  StageTimer timer(manifest);
  timer.run("emit", [&] {
    emit(manifest, cfg.run.out_dir, "exposure_table.csv",
         exposure_table_csv(cfg.exposure.illuminances, cfg.exposure.times));
  });
  finish_manifest(manifest, cfg, "exposure-table");
  return manifest;
}

ExperimentManifest run_make_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "make-dataset");
  StageTimer timer(manifest);
  timer.run("generate", [&] {
    const auto train = synth_digits(cfg.dataset.synth_train, mix_seed(cfg.run.seed, 101));
    const auto test = synth_digits(cfg.dataset.synth_test, mix_seed(cfg.run.seed, 202));
    fs::create_directories(cfg.run.out_dir);
    save_idx(train, cfg.run.out_dir + "/train-images-idx3-ubyte",
             cfg.run.out_dir + "/train-labels-idx1-ubyte");
    save_idx(test, cfg.run.out_dir + "/test-images-idx3-ubyte",
             cfg.run.out_dir + "/test-labels-idx1-ubyte");
    for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                             "test-images-idx3-ubyte", "test-labels-idx1-ubyte"})
      manifest.add_artifact(name, read_file_bytes(cfg.run.out_dir + "/" + std::string(name)));
  });
  finish_manifest(manifest, cfg, "make-dataset");
  return manifest;
}

ExperimentManifest run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentManifest manifest = start_manifest(cfg, "run");
  StageTimer timer(manifest);

  const LoadedData data = timer.run("load", [&] { return load_dataset(cfg); });
  TrainReport report;
  const ModelBundle bundle =
      timer.run("train", [&] { return train_bundle(cfg, data.train, &report); });
  const auto model = bundle.posterior();

  if (cfg.sprt.regime == "FR" && !cfg.sprt.etas.empty()) {
    timer.run("tune-thresholds", [&] {
      const std::vector<double> grid = cfg.query_grid();
      const double per_bin = cfg.noise.ppp_per_bin();
      const int bins = std::max(1, static_cast<int>(std::lround(cfg.sprt.max_ppp / per_bin)));
      std::vector<Trajectory> trs(data.train.size());
      parallel_chunks(data.train.size(), 16, cfg.run.threads, [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
          PhotonStream stream(data.train[i], cfg.noise, bins, mix_seed(cfg.run.seed, 300 + i));
          trs[i] = eval_trajectory(stream, *model, grid, mix_seed(cfg.run.seed, 400 + i));
        }
      });
      const RiskDataset risk = risk_dataset_from_trajectories(trs, cfg.noise.bin_width);
      for (double eta : cfg.sprt.etas) {
        const ThresholdSchedule init =
            best_constant_schedule(risk, eta, 50, cfg.anneal.step_cost);
        const ThresholdSchedule tuned = optimize_schedule(risk, eta, cfg.anneal, init);
        emit(manifest, cfg.run.out_dir, "schedule_eta_" + format_double(eta) + ".csv",
             schedule_csv(tuned, eta, cfg.anneal, cfg.run.seed));
      }
    });
  }

  const std::vector<SatRow> rows = timer.run("sweep", [&] {
    return sat_sweep(data.test, *model, cfg.noise, sat_options_from(cfg));
  });
  timer.run("emit", [&] {
    std::string csv = sat_csv_header() + "\n";
    for (const SatRow& r : rows) csv += sat_csv_row(r) + "\n";
    emit(manifest, cfg.run.out_dir, "sat.csv", csv);
    std::string mbytes;
    if (bundle.kind == "waldnet" || bundle.kind == "waldnet-estimated-light")
      mbytes = adapted_to_bytes(bundle.adapted);
    else if (bundle.kind == "rate")
      mbytes = plain_to_bytes(bundle.rate);
    else
      mbytes = ensemble_to_bytes(bundle.ensemble.members);
    emit(manifest, cfg.run.out_dir, "model.bin", mbytes);
  });
  finish_manifest(manifest, cfg, "run");
  return manifest;
}

}  // namespace scotopic
