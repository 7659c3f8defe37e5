#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scotopic/config.hpp"
#include "scotopic/light.hpp"
#include "scotopic/manifest.hpp"
#include "scotopic/sprt.hpp"

namespace scotopic {

struct LoadedData {
  std::vector<IntensityImage> train;
  std::vector<IntensityImage> test;
};

// IDX files when paths are configured, procedural digits otherwise; subset
// caps applied in both cases.
LoadedData load_dataset(const ExperimentConfig& cfg);

// A trained model of any configured kind plus whatever it needs at eval time.
struct ModelBundle {
  std::string kind;
  AdaptedNetwork adapted;
  Network rate;
  Ensemble ensemble;
  LightEstimator estimator;

  // View as a posterior model; the bundle must outlive the returned object.
  std::unique_ptr<PosteriorModel> posterior() const;
};

ModelBundle train_bundle(const ExperimentConfig& cfg,
                         const std::vector<IntensityImage>& train_data,
                         TrainReport* report = nullptr);
ModelBundle load_bundle(const ExperimentConfig& cfg);

// Bits-of-signal grid: one row per illuminance, one column per exposure time.
std::string exposure_table_csv(const std::vector<double>& illuminances,
                               const std::vector<double>& times);

// CLI stages. Each loads what it needs, writes CSV/model artifacts under
// cfg.run.out_dir, and persists a manifest with content hashes.
ExperimentManifest run_train(const ExperimentConfig& cfg);
ExperimentManifest run_tune_thresholds(const ExperimentConfig& cfg);
ExperimentManifest run_sweep_sat(const ExperimentConfig& cfg);
ExperimentManifest run_sweep_noise(const ExperimentConfig& cfg);
ExperimentManifest run_fit_light(const ExperimentConfig& cfg);
ExperimentManifest run_spiking_bench(const ExperimentConfig& cfg);
ExperimentManifest run_exposure_table(const ExperimentConfig& cfg);
ExperimentManifest run_make_dataset(const ExperimentConfig& cfg);

// Full pipeline: train, tune thresholds when the FR regime is configured,
// then the SAT sweep, all recorded in one manifest.
ExperimentManifest run_experiment(const ExperimentConfig& cfg);

}  // namespace scotopic
