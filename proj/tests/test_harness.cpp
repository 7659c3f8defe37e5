#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scotopic/config.hpp"
#include "scotopic/experiment.hpp"
#include "scotopic/idx.hpp"
#include "scotopic/manifest.hpp"
#include "scotopic/model_io.hpp"
#include "scotopic/synth.hpp"
#include "scotopic/train.hpp"

using namespace scotopic;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("scotopic_test_" + tag);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("idx round trip and error reporting") {
  const auto imgs = synth_digits(12, 5);
  const std::string dir = temp_dir("idx");
  const std::string ip = dir + "/images", lp = dir + "/labels";
  save_idx(imgs, ip, lp);
  const auto back = load_idx(ip, lp);
  REQUIRE(back.size() == imgs.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == imgs[i].label);
    CHECK(back[i].height == 28);
    for (size_t p = 0; p < back[i].pixels.size(); ++p)
      CHECK(std::abs(back[i].pixels[p] - imgs[i].pixels[p]) <= 0.5 / 255.0 + 1e-9);
  }

  // pixel value 255 maps to intensity 1.0 exactly
  IntensityImage bright;
  bright.height = bright.width = 2;
  bright.channels = 1;
  bright.label = 3;
  bright.pixels = {1.0, 0.0, 1.0, 1.0};
  save_idx({bright}, ip, lp);
  CHECK(load_idx(ip, lp)[0].pixels[0] == 1.0);

  // bad magic
  {
    std::ofstream bad(ip, std::ios::binary);
    bad << "nonsense nonsense nonsense";
  }
  CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("magic"), std::runtime_error);

  // truncation names the byte counts
  save_idx({bright}, ip, lp);
  {
    std::string bytes;
    {
      std::ifstream in(ip, std::ios::binary);
      bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    std::ofstream out(ip, std::ios::binary);
    out << bytes.substr(0, bytes.size() - 2);
  }
  try {
    load_idx(ip, lp);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected") != std::string::npos);
    CHECK(msg.find("20") != std::string::npos);  // 16 header + 4 pixels
  }

  // image/label count mismatch
  save_idx({bright}, ip, lp);
  const auto two = synth_digits(2, 6);
  save_idx(two, dir + "/imgs2", dir + "/labels2");
  CHECK_THROWS_WITH_AS(load_idx(ip, dir + "/labels2"), doctest::Contains("mismatch"),
                       std::runtime_error);
}

TEST_CASE("config round trip, strictness and validation") {
  ExperimentConfig cfg;
  cfg.model.kind = "ensemble";
  cfg.noise.read_noise_std = 0.22;
  cfg.sprt.thresholds = {1, 2, 3};
  cfg.run.seed = 99;
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config(text);
  CHECK(back == cfg);
  CHECK(back.noise.read_noise_std == 0.22);
  CHECK(back.sprt.thresholds == std::vector<double>({1, 2, 3}));

  CHECK_THROWS_WITH_AS(parse_config("[nope]\nx = 1\n"), doctest::Contains("unknown section"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("[noise]\ntypo_key = 1\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("dark_current = 1\n"), doctest::Contains("section"),
                       std::invalid_argument);

  ExperimentConfig bad;
  bad.model.kind = "perceptron";
  CHECK_THROWS(bad.validate());
  bad = ExperimentConfig{};
  bad.sprt.regime = "SOMETIMES";
  CHECK_THROWS(bad.validate());
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // two-block message
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("model containers round trip") {
  std::vector<IntensityImage> data = synth_digits(30, 9);
  // tiny adapted model via a couple of training steps
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 30;
  tc.exposures_per_image = 1;
  tc.learning_rate = 0.001;
  tc.seed = 3;
  NoiseConfig noise;
  const AdaptedNetwork net = train_posterior(data, tc, noise, ArchKind::Mlp);

  const std::string bytes = adapted_to_bytes(net);
  CHECK(model_kind(bytes) == 1);
  const AdaptedNetwork back = adapted_from_bytes(bytes);
  CHECK(back.prior_strength == net.prior_strength);
  CHECK(back.reference_exposure == net.reference_exposure);
  CHECK(back.count_scale == net.count_scale);
  CHECK(back.prior_mean.v == net.prior_mean.v);
  const auto* d0 = static_cast<const Dense*>(net.core.layers[0].get());
  const auto* d0b = static_cast<const Dense*>(back.core.layers[0].get());
  CHECK(d0->W.v == d0b->W.v);

  // identical forward results after the round trip
  CountImage c;
  c.height = 28;
  c.width = 28;
  c.channels = 1;
  c.counts.assign(784, 1.0);
  c.num_bins = 10;
  c.ppp = 10.0;
  CHECK(net.forward_adapted(c).log_ratios == back.forward_adapted(c).log_ratios);

  // plain + ensemble containers
  Network plain = build_network(ArchKind::Mlp, 4, 4, 1, 3);
  init_weights(plain, 5);
  const Network plain_back = plain_from_bytes(plain_to_bytes(plain));
  CHECK(static_cast<const Dense*>(plain.layers[0].get())->W.v ==
        static_cast<const Dense*>(plain_back.layers[0].get())->W.v);

  std::vector<Specialist> ens;
  for (double a : {2.2, 22.0}) {
    Specialist s;
    s.anchor_ppp = a;
    s.net = build_network(ArchKind::Mlp, 4, 4, 1, 3);
    init_weights(s.net, static_cast<uint64_t>(a));
    ens.push_back(std::move(s));
  }
  const auto ens_back = ensemble_from_bytes(ensemble_to_bytes(ens));
  REQUIRE(ens_back.size() == 2);
  CHECK(ens_back[1].anchor_ppp == 22.0);

  CHECK_THROWS(plain_from_bytes(bytes));            // kind mismatch
  CHECK_THROWS(adapted_from_bytes(bytes.substr(0, 40)));  // truncated
  CHECK_THROWS(model_kind("xxxx"));
}

TEST_CASE("synthetic digits are deterministic and well formed") {
  const auto a = synth_digits(50, 123);
  const auto b = synth_digits(50, 123);
  const auto c = synth_digits(50, 124);
  REQUIRE(a.size() == 50);
  bool identical = true, differs = false;
  int label_seen[10] = {0};
  for (size_t i = 0; i < a.size(); ++i) {
    identical = identical && a[i].pixels == b[i].pixels && a[i].label == b[i].label;
    differs = differs || a[i].pixels != c[i].pixels;
    CHECK(a[i].height == 28);
    CHECK(a[i].label >= 0);
    CHECK(a[i].label <= 9);
    ++label_seen[a[i].label];
    for (double p : a[i].pixels) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("exposure table emits the populated cells") {
  const std::string csv = exposure_table_csv({1.0}, {1.0});
  CHECK(csv.find("5\n") != std::string::npos);  // full moon at one second: 5 bits
  CHECK_THROWS(exposure_table_csv({-1.0}, {1.0}));
  CHECK_THROWS(exposure_table_csv({}, {1.0}));
}

TEST_CASE("run_experiment produces byte-identical artifacts on rerun") {
  ExperimentConfig cfg;
  cfg.dataset.synth_train = 80;
  cfg.dataset.synth_test = 40;
  cfg.model.kind = "waldnet";
  cfg.model.arch = "mlp";
  cfg.noise.read_noise_std = 0.0;
  cfg.noise.fpn_std = 0.0;
  cfg.noise.bin_width = 2.2;  // short streams keep this test quick
  cfg.train.epochs = 2;
  cfg.train.batch_size = 40;
  cfg.train.exposures_per_image = 2;
  cfg.train.ppp_min = 2.2;
  cfg.train.ppp_max = 22.0;
  cfg.sprt.regime = "FR";
  cfg.sprt.grid_min = 2.2;
  cfg.sprt.grid_max = 22.0;
  cfg.sprt.grid_points = 8;
  cfg.sprt.max_ppp = 22.0;
  cfg.sprt.thresholds = {0.0, 2.0};
  cfg.sprt.etas = {0.01};
  cfg.sprt.bootstrap = 50;
  cfg.anneal.iterations = 40;
  cfg.run.seed = 7;

  cfg.run.out_dir = temp_dir("runA");
  const ExperimentManifest m1 = run_experiment(cfg);
  cfg.run.out_dir = temp_dir("runB");
  const ExperimentManifest m2 = run_experiment(cfg);

  REQUIRE(m1.artifacts.size() == m2.artifacts.size());
  for (size_t i = 0; i < m1.artifacts.size(); ++i) {
    CHECK(m1.artifacts[i].path == m2.artifacts[i].path);
    CHECK(m1.artifacts[i].sha256 == m2.artifacts[i].sha256);
  }
  CHECK(fs::exists(fs::path(cfg.run.out_dir) / "sat.csv"));
  CHECK(fs::exists(fs::path(cfg.run.out_dir) / "run_manifest.txt"));
  CHECK(!m1.stages.empty());

  // the manifest text carries the config snapshot and the hashes
  const std::string text = m1.to_text();
  CHECK(text.find("[artifacts]") != std::string::npos);
  CHECK(text.find("sha256:") != std::string::npos);
  CHECK(text.find("[config]") != std::string::npos);
}

TEST_CASE("stage errors carry the stage name") {
  ExperimentConfig cfg;
  cfg.dataset.train_images = "/nonexistent/file";
  cfg.dataset.train_labels = "/nonexistent/labels";
  cfg.dataset.test_images = "/nonexistent/file";
  cfg.dataset.test_labels = "/nonexistent/labels";
  cfg.run.out_dir = temp_dir("err");
  try {
    run_train(cfg);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("stage 'load'") != std::string::npos);
  }
}
