#include "sincvae/run_config.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/error.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace sincvae {

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> table = {
      {"seed", "0", "run seed; every random stream derives from it"},
      {"out", "out", "output directory"},

      {"data.format", "bonn", "preprocess input: bonn | edf"},
      {"data.normal_dir", "", "bonn: directory of non-seizure segments (set A or B)"},
      {"data.seizure_dir", "", "bonn: directory of seizure segments (set E)"},
      {"data.edf", "", "edf: comma-separated EDF tracks"},
      {"data.channels", "", "edf: comma-separated channel labels (empty = all)"},
      {"data.annotations", "", "seizure intervals CSV track_id,start_s,end_s"},
      {"data.train", "", "training windows (.svws); default <out>/train.svws"},
      {"data.test", "", "test windows (.svws); default <out>/test.svws"},
      {"data.tracks", "", "full annotated tracks (.svws) for phase rates; default <out>/tracks.svws"},
      {"data.checkpoint", "", "model checkpoint; default <out>/model.svae"},

      {"preprocess.window_s", "1", "window length in seconds"},
      {"preprocess.filter", "auto", "none | lowpass:HZ | bandpass:LO:HI | auto (bonn lowpass:40, edf bandpass:0.5:25)"},
      {"preprocess.filter_taps", "255", "FIR length (odd)"},
      {"preprocess.zscore", "true", "z-score with training-set channel statistics"},
      {"preprocess.test_fraction", "0.2", "bonn: trailing fraction of normal segments held out"},
      {"preprocess.test_minutes", "10", "edf: minutes of non-seizure windows held out"},

      {"model.variant", "sinc", "sinc | plain"},
      {"model.filter_count", "8", "sinc filters per input channel (unused by plain)"},
      {"model.kernel_length", "31", "sinc kernel length (odd)"},
      {"model.activation", "identity", "activation after the filterbank: relu | tanh | identity"},
      {"model.block_activation", "relu", "activation inside conv blocks"},
      {"model.norm_axis", "time", "layer-norm axes after the filterbank: time | channel_time"},
      {"model.latent_dim", "8", "latent dimension"},
      {"model.conv_blocks", "2", "encoder/decoder conv blocks"},
      {"model.block_channels", "16", "channels per conv block"},

      {"train.learning_rate", "0.0005", "Adam learning rate"},
      {"train.batch_size", "128", "minibatch size"},
      {"train.max_epochs", "1000", "epoch limit"},
      {"train.patience", "20", "early-stopping patience in epochs"},
      {"train.validation_fraction", "0.2", "fraction of training windows used for validation"},

      {"score.stochastic", "false", "sample eps instead of using the posterior mean"},
      {"detect.threshold", "percentile:95", "max | percentile:P[:nearest]"},
      {"detect.preictal_s", "900", "preictal horizon in seconds"},
      {"detect.postictal_s", "900", "postictal horizon in seconds"},

      {"select.space", "chbmit", "bonn | chbmit | custom"},
      {"select.kernel_lengths", "", "custom space: comma list"},
      {"select.filter_counts", "", "custom space: comma list"},
      {"select.activations", "", "custom space: comma list"},
      {"select.latent_dims", "", "custom space: comma list"},
      {"select.cv", "kfold", "kfold | loto"},
      {"select.folds", "10", "k for k-fold"},
      {"select.alpha", "0.05", "significance level"},
      {"select.workers", "1", "trial threads"},
      {"select.complexity_order", "model.latent_dim,model.filter_count,model.kernel_length,model.activation=identity",
       "tie-break keys"},
      {"select.results", "", "existing results CSV; skips training"},

      {"synth.train_duration_s", "2400", "normal-only training track length"},
      {"synth.test_duration_s", "900", "length of each test track"},
      {"synth.test_tracks", "1", "test tracks with bursts"},
      {"synth.channels", "1", "channels"},
      {"synth.sampling_rate", "128", "Hz"},
      {"synth.burst_count", "20", "bursts per test track"},
      {"synth.burst_duration_s", "20", "burst length"},
      {"synth.burst_gain", "3", "burst RMS over background RMS"},
      {"synth.burst_band", "3:8", "burst band LO:HI in Hz"},
      {"synth.edf", "true", "also write the tracks as EDF"},
  };
  return table;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig, "unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::apply(const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorCode::kConfig, "expected key=value, got '" + assignment + "'");
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

void RunConfig::load(std::istream& in, const std::string& source) {
  std::string line;
  Index row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    try {
      apply(body);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, source + ":" + std::to_string(row) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open config " + path.string());
  load(in, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  require(parse_double(get(key), v), ErrorCode::kConfig, key + " must be a number, got '" + get(key) + "'");
  return v;
}

long long RunConfig::get_int(const std::string& key) const {
  long long v = 0;
  require(parse_int64(get(key), v), ErrorCode::kConfig, key + " must be an integer, got '" + get(key) + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::kConfig, key + " must be true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  const std::string& v = get(key);
  if (trim(v).empty()) return {};
  return split_csv_line(v);
}

std::uint64_t RunConfig::seed() const {
  const long long s = get_int("seed");
  require(s >= 0, ErrorCode::kConfig, "seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

std::filesystem::path RunConfig::out_dir() const {
  require(!get("out").empty(), ErrorCode::kConfig, "out must not be empty");
  return get("out");
}

std::filesystem::path RunConfig::path_or(const std::string& key, const std::string& fallback) const {
  const std::string& v = get(key);
  return v.empty() ? out_dir() / fallback : std::filesystem::path(v);
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
}

VaeArchitecture RunConfig::architecture() const {
  VaeArchitecture a;
  a.variant = parse_variant(get("model.variant"));
  a.filter_count = get_int("model.filter_count");
  a.kernel_length = get_int("model.kernel_length");
  a.activation = parse_activation(get("model.activation"));
  a.block_activation = parse_activation(get("model.block_activation"));
  a.norm_axis = parse_norm_axis(get("model.norm_axis"));
  a.latent_dim = get_int("model.latent_dim");
  a.conv_block_count = get_int("model.conv_blocks");
  a.channels_per_block = get_int("model.block_channels");
  return a;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.learning_rate = get_double("train.learning_rate");
  c.batch_size = get_int("train.batch_size");
  c.max_epochs = get_int("train.max_epochs");
  c.patience = get_int("train.patience");
  c.validation_fraction = get_double("train.validation_fraction");
  c.seed = seed();
  c.validate();
  return c;
}

ThresholdPolicy RunConfig::threshold_policy() const { return parse_threshold_policy(get("detect.threshold")); }

PhaseHorizons RunConfig::horizons() const {
  PhaseHorizons h{get_double("detect.preictal_s"), get_double("detect.postictal_s")};
  require(h.preictal_s >= 0.0 && h.postictal_s >= 0.0, ErrorCode::kConfig, "phase horizons must be >= 0");
  return h;
}

}  // namespace sincvae
