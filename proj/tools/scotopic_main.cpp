#include <cstdio>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "scotopic/config.hpp"
#include "scotopic/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  long long seed = -1;
  std::string out_dir;
  int subset = -1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config file");
  sub->add_option("--seed", args.seed, "override [run] seed");
  sub->add_option("--out", args.out_dir, "override [run] out_dir");
  sub->add_option("--subset", args.subset,
                  "cap both train and test subsets at this many examples");
}

scotopic::ExperimentConfig resolve(const CommonArgs& args) {
  scotopic::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = scotopic::load_config(args.config_path);
  if (args.seed >= 0) cfg.run.seed = static_cast<uint64_t>(args.seed);
  if (!args.out_dir.empty()) cfg.run.out_dir = args.out_dir;
  if (args.subset >= 0) {
    cfg.dataset.train_subset = args.subset;
    cfg.dataset.test_subset = args.subset;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scotopic: photon-counting sensor simulation, exposure-adaptive "
               "classifiers and sequential decisions"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    std::function<scotopic::ExperimentManifest(const scotopic::ExperimentConfig&)> fn;
  };
  const Command commands[] = {
      {"train", "train the configured model (step one)", scotopic::run_train},
      {"tune-thresholds", "fit time-varying decision thresholds (step two)",
       scotopic::run_tune_thresholds},
      {"sweep-sat", "speed-accuracy tradeoff table on the test set",
       scotopic::run_sweep_sat},
      {"sweep-noise", "FR tradeoff under one varied noise parameter",
       scotopic::run_sweep_noise},
      {"fit-light", "fit the PPP estimator from pooled photon counts",
       scotopic::run_fit_light},
      {"spiking-bench", "spiking vs continuous power/accuracy comparison",
       scotopic::run_spiking_bench},
      {"exposure-table", "bits-of-signal table over illuminance and exposure",
       scotopic::run_exposure_table},
      {"make-dataset", "write the procedural digit corpus as IDX files",
       scotopic::run_make_dataset},
      {"run", "full pipeline: train, tune thresholds, sweep",
       scotopic::run_experiment},
  };

  CommonArgs args[std::size(commands)];
  const Command* selected = nullptr;
  const CommonArgs* selected_args = nullptr;
  for (size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
    add_common(sub, args[i]);
    sub->callback([&, i] {
      selected = &commands[i];
      selected_args = &args[i];
    });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const scotopic::ExperimentConfig cfg = resolve(*selected_args);
    const scotopic::ExperimentManifest manifest = selected->fn(cfg);
    std::printf("%s: wrote %zu artifact(s) to %s\n", selected->name,
                manifest.artifacts.size(), cfg.run.out_dir.c_str());
    for (const auto& a : manifest.artifacts)
      std::printf("  %s  sha256:%s\n", a.path.c_str(), a.sha256.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
