#include "scotopic/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "scotopic/sprt.hpp"
#include "scotopic/util.hpp"

namespace scotopic {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

// One table drives both parsing and serialization so round-trips are exact
// by construction.
struct Key {
  std::string section;
  std::string name;
  Setter set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    auto add = [&](const std::string& sec, const std::string& name, Setter set,
                   std::function<std::string(const ExperimentConfig&)> get) {
      k.push_back({sec, name, std::move(set), std::move(get)});
    };

    add("dataset", "train_images",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.train_images = v; },
        [](const ExperimentConfig& c) { return c.dataset.train_images; });
    add("dataset", "train_labels",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.train_labels = v; },
        [](const ExperimentConfig& c) { return c.dataset.train_labels; });
    add("dataset", "test_images",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.test_images = v; },
        [](const ExperimentConfig& c) { return c.dataset.test_images; });
    add("dataset", "test_labels",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.test_labels = v; },
        [](const ExperimentConfig& c) { return c.dataset.test_labels; });
    add("dataset", "synth_train",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.synth_train = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.dataset.synth_train); });
    add("dataset", "synth_test",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.synth_test = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.dataset.synth_test); });
    add("dataset", "train_subset",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.train_subset = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.dataset.train_subset); });
    add("dataset", "test_subset",
        [](ExperimentConfig& c, const std::string& v) { c.dataset.test_subset = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.dataset.test_subset); });

    add("model", "kind",
        [](ExperimentConfig& c, const std::string& v) { c.model.kind = v; },
        [](const ExperimentConfig& c) { return c.model.kind; });
    add("model", "arch",
        [](ExperimentConfig& c, const std::string& v) { c.model.arch = v; },
        [](const ExperimentConfig& c) { return c.model.arch; });
    add("model", "anchors",
        [](ExperimentConfig& c, const std::string& v) { c.model.anchors = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.model.anchors); });
    add("model", "model_path",
        [](ExperimentConfig& c, const std::string& v) { c.model.model_path = v; },
        [](const ExperimentConfig& c) { return c.model.model_path; });
    add("model", "estimator_path",
        [](ExperimentConfig& c, const std::string& v) { c.model.estimator_path = v; },
        [](const ExperimentConfig& c) { return c.model.estimator_path; });

    add("noise", "dark_current",
        [](ExperimentConfig& c, const std::string& v) { c.noise.dark_current = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.dark_current); });
    add("noise", "read_noise_std",
        [](ExperimentConfig& c, const std::string& v) { c.noise.read_noise_std = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.read_noise_std); });
    add("noise", "fpn_std",
        [](ExperimentConfig& c, const std::string& v) { c.noise.fpn_std = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.fpn_std); });
    add("noise", "jitter_std_deg",
        [](ExperimentConfig& c, const std::string& v) { c.noise.jitter_std_deg = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.jitter_std_deg); });
    add("noise", "illuminance",
        [](ExperimentConfig& c, const std::string& v) { c.noise.illuminance = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.illuminance); });
    add("noise", "bin_width",
        [](ExperimentConfig& c, const std::string& v) { c.noise.bin_width = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.noise.bin_width); });

    add("train", "learning_rate",
        [](ExperimentConfig& c, const std::string& v) { c.train.learning_rate = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.train.learning_rate); });
    add("train", "batch_size",
        [](ExperimentConfig& c, const std::string& v) { c.train.batch_size = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.train.batch_size); });
    add("train", "epochs",
        [](ExperimentConfig& c, const std::string& v) { c.train.epochs = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.train.epochs); });
    add("train", "weight_decay",
        [](ExperimentConfig& c, const std::string& v) { c.train.weight_decay = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.train.weight_decay); });
    add("train", "exposures_per_image",
        [](ExperimentConfig& c, const std::string& v) {
          c.train.exposures_per_image = std::stoi(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.train.exposures_per_image); });
    add("train", "ppp_min",
        [](ExperimentConfig& c, const std::string& v) { c.train.ppp_min = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.train.ppp_min); });
    add("train", "ppp_max",
        [](ExperimentConfig& c, const std::string& v) { c.train.ppp_max = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.train.ppp_max); });

    add("anneal", "initial_temperature",
        [](ExperimentConfig& c, const std::string& v) {
          c.anneal.initial_temperature = std::stod(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.anneal.initial_temperature); });
    add("anneal", "decay",
        [](ExperimentConfig& c, const std::string& v) { c.anneal.decay = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.anneal.decay); });
    add("anneal", "floor",
        [](ExperimentConfig& c, const std::string& v) { c.anneal.floor = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.anneal.floor); });
    add("anneal", "iterations",
        [](ExperimentConfig& c, const std::string& v) { c.anneal.iterations = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.anneal.iterations); });
    add("anneal", "smoothness_weight",
        [](ExperimentConfig& c, const std::string& v) {
          c.anneal.smoothness_weight = std::stod(v);
        },
        [](const ExperimentConfig& c) { return format_double(c.anneal.smoothness_weight); });
    add("anneal", "step_size",
        [](ExperimentConfig& c, const std::string& v) { c.anneal.step_size = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.anneal.step_size); });
    add("anneal", "step_cost",
        [](ExperimentConfig& c, const std::string& v) {
          if (v == "ppp") c.anneal.step_cost = StepCost::PppIncrement;
          else if (v == "constant") c.anneal.step_cost = StepCost::Constant;
          else throw std::invalid_argument("config: step_cost must be ppp or constant");
        },
        [](const ExperimentConfig& c) {
          return c.anneal.step_cost == StepCost::PppIncrement ? "ppp" : "constant";
        });

    add("sprt", "regime",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.regime = v; },
        [](const ExperimentConfig& c) { return c.sprt.regime; });
    add("sprt", "grid_min",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.grid_min = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.sprt.grid_min); });
    add("sprt", "grid_max",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.grid_max = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.sprt.grid_max); });
    add("sprt", "grid_points",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.grid_points = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.sprt.grid_points); });
    add("sprt", "max_ppp",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.max_ppp = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.sprt.max_ppp); });
    add("sprt", "thresholds",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.thresholds = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.sprt.thresholds); });
    add("sprt", "int_ppps",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.int_ppps = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.sprt.int_ppps); });
    add("sprt", "etas",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.etas = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.sprt.etas); });
    add("sprt", "bootstrap",
        [](ExperimentConfig& c, const std::string& v) { c.sprt.bootstrap = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.sprt.bootstrap); });

    add("sweep_noise", "parameter",
        [](ExperimentConfig& c, const std::string& v) { c.sweep_noise.parameter = v; },
        [](const ExperimentConfig& c) { return c.sweep_noise.parameter; });
    add("sweep_noise", "values",
        [](ExperimentConfig& c, const std::string& v) { c.sweep_noise.values = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.sweep_noise.values); });

    add("spiking", "tau_dis",
        [](ExperimentConfig& c, const std::string& v) { c.spiking.tau_dis = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.spiking.tau_dis); });
    add("spiking", "threshold",
        [](ExperimentConfig& c, const std::string& v) { c.spiking.threshold = std::stod(v); },
        [](const ExperimentConfig& c) { return format_double(c.spiking.threshold); });
    add("spiking", "n_examples",
        [](ExperimentConfig& c, const std::string& v) { c.spiking.n_examples = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.spiking.n_examples); });

    add("exposure", "illuminances",
        [](ExperimentConfig& c, const std::string& v) {
          c.exposure.illuminances = parse_list(v);
        },
        [](const ExperimentConfig& c) { return join(c.exposure.illuminances); });
    add("exposure", "times",
        [](ExperimentConfig& c, const std::string& v) { c.exposure.times = parse_list(v); },
        [](const ExperimentConfig& c) { return join(c.exposure.times); });

    add("light", "s_candidates",
        [](ExperimentConfig& c, const std::string& v) { c.light.s_candidates = parse_int_list(v); },
        [](const ExperimentConfig& c) { return join(c.light.s_candidates); });
    add("light", "k_candidates",
        [](ExperimentConfig& c, const std::string& v) { c.light.k_candidates = parse_int_list(v); },
        [](const ExperimentConfig& c) { return join(c.light.k_candidates); });
    add("light", "train_per_anchor",
        [](ExperimentConfig& c, const std::string& v) {
          c.light.train_per_anchor = std::stoi(v);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.light.train_per_anchor); });

    add("run", "seed",
        [](ExperimentConfig& c, const std::string& v) { c.run.seed = std::stoull(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.run.seed); });
    add("run", "threads",
        [](ExperimentConfig& c, const std::string& v) { c.run.threads = std::stoi(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.run.threads); });
    add("run", "out_dir",
        [](ExperimentConfig& c, const std::string& v) { c.run.out_dir = v; },
        [](const ExperimentConfig& c) { return c.run.out_dir; });
    return k;
  }();
  return keys;
}

}  // namespace

std::vector<double> ExperimentConfig::query_grid() const {
  return log_ppp_grid(sprt.grid_min, sprt.grid_max, sprt.grid_points);
}

void ExperimentConfig::validate() const {
  noise.validate();
  train.validate();
  anneal.validate();
  if (model.kind != "waldnet" && model.kind != "rate" && model.kind != "photopic" &&
      model.kind != "ensemble" && model.kind != "waldnet-estimated-light")
    throw std::invalid_argument("config: unknown model kind '" + model.kind + "'");
  if (model.arch != "conv" && model.arch != "mlp")
    throw std::invalid_argument("config: unknown arch '" + model.arch + "'");
  if (sprt.regime != "FR" && sprt.regime != "INT")
    throw std::invalid_argument("config: regime must be FR or INT");
  if (sprt.grid_points < 2 || !(sprt.grid_min > 0.0) || !(sprt.grid_max > sprt.grid_min))
    throw std::invalid_argument("config: bad query grid");
  if (dataset.synth_train < 0 || dataset.synth_test < 0 || dataset.train_subset < 0 ||
      dataset.test_subset < 0)
    throw std::invalid_argument("config: negative dataset size");
  if (run.threads < 0) throw std::invalid_argument("config: negative thread count");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const Key& k : key_table())
        if (k.section == section) known = true;
      if (!known)
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": unknown section [" + section + "]");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": key outside any section");
    bool found = false;
    for (const Key& k : key_table()) {
      if (k.section == section && k.name == key) {
        k.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "' in [" + section + "]");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const Key& k : key_table()) {
    if (k.section != section) {
      if (!out.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace scotopic
