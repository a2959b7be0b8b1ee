#include "sincvae/commands.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/log.hpp"
#include "sincvae/rng.hpp"
#include "sincvae/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>

namespace sincvae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare(const RunConfig& config, const std::string& command) {
  const fs::path out = config.out_dir();
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorCode::kIo, "cannot create output directory " + out.string() + ": " + ec.message());
  std::ofstream conf(out / (command + ".conf"));
  require(conf.good(), ErrorCode::kIo, "cannot write " + (out / (command + ".conf")).string());
  conf << "# sincvae " << command << " resolved config\n";
  config.write(conf);
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

WindowSet load_set(const RunConfig& config, const std::string& key, const std::string& fallback) {
  const fs::path p = config.path_or(key, fallback);
  require(fs::exists(p), ErrorCode::kIo, "missing input " + p.string() + " (set " + key + ")");
  return load_window_set(p.string());
}

std::optional<FilterSpec> filter_spec(const RunConfig& config, const std::string& format) {
  std::string text = config.get("preprocess.filter");
  if (text == "auto") text = format == "bonn" ? "lowpass:40" : "bandpass:0.5:25";
  if (text == "none") return std::nullopt;
  const Index taps = config.get_int("preprocess.filter_taps");
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t colon; (colon = text.find(':', start)) != std::string::npos; start = colon + 1) {
    parts.push_back(text.substr(start, colon - start));
  }
  parts.push_back(text.substr(start));
  double a = 0.0;
  double b = 0.0;
  if (parts.size() == 2 && parts[0] == "lowpass" && parse_double(parts[1], a)) return FilterSpec::lowpass(a, taps);
  if (parts.size() == 3 && parts[0] == "bandpass" && parse_double(parts[1], a) && parse_double(parts[2], b)) {
    return FilterSpec::bandpass(a, b, taps);
  }
  fail(ErrorCode::kConfig, "preprocess.filter must be none, lowpass:HZ or bandpass:LO:HI, got '" + text + "'");
}

TimeSeriesRecording maybe_filter(const TimeSeriesRecording& rec, const std::optional<FilterSpec>& spec) {
  return spec ? fir_filter(rec, *spec) : rec;
}

json stats_json(const ChannelStats& s, const std::vector<std::string>& names) {
  return {{"channels", names},
          {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())}};
}

void finish_preprocess(const RunConfig& config, const fs::path& out, std::vector<WindowSet*> sets,
                       const std::optional<FilterSpec>& filter) {
  WindowSet& train = *sets.front();
  json norm = {{"zscore", config.get_bool("preprocess.zscore")},
               {"filter", filter ? json(filter->kind == FilterKind::kLowpass
                                            ? "lowpass:" + format_double(filter->high_hz)
                                            : "bandpass:" + format_double(filter->low_hz) + ":" +
                                                  format_double(filter->high_hz))
                                 : json("none")}};
  if (config.get_bool("preprocess.zscore")) {
    const ChannelStats stats = compute_stats(train);
    for (WindowSet* s : sets) {
      if (s->count() > 0) *s = zscore(*s, stats);
    }
    norm["stats"] = stats_json(stats, train.channel_names);
  }
  write_json(out / "normalization.json", norm);
}

std::string subject_of(const std::string& track) {
  const auto cut = track.rfind('_');
  return cut == std::string::npos || cut == 0 ? track : track.substr(0, cut);
}

std::string threshold_name(const ThresholdPolicy& p) {
  if (p.kind == ThresholdPolicy::Kind::kMax) return "t1";
  if (p.percentile == 95.0 && p.method == PercentileMethod::kLinear) return "t2";
  return p.to_string();
}

ScoreOptions score_options(const RunConfig& config) {
  ScoreOptions o;
  o.stochastic = config.get_bool("score.stochastic");
  o.seed = derive_seed(config.seed(), 5);
  return o;
}

Eigen::VectorXd validation_scores(const WindowSet& train, const VaeModel& model, const ScoreOptions& options) {
  for (Index i : model.validation_indices) {
    require(i >= 0 && i < train.count(), ErrorCode::kState,
            "checkpoint validation indices do not fit the training windows; was it trained on this data?");
  }
  require(!model.validation_indices.empty(), ErrorCode::kState, "checkpoint has no validation windows");
  return reconstruct_mse(gather_windows(train.windows, model.validation_indices), model, options);
}

VaeArchitecture fit_to(VaeArchitecture arch, const WindowSet& set) {
  arch.input_channels = set.channels();
  arch.window_length = set.length();
  arch.sampling_rate = set.sampling_rate;
  arch.validate();
  return arch;
}

}  // namespace

void cmd_preprocess(const RunConfig& config) {
  const fs::path out = prepare(config, "preprocess");
  const std::string format = config.get("data.format");
  const double window = config.get_double("preprocess.window_s");
  const auto filter = filter_spec(config, format);

  if (format == "bonn") {
    require(!config.get("data.normal_dir").empty() && !config.get("data.seizure_dir").empty(), ErrorCode::kConfig,
            "bonn preprocessing needs data.normal_dir and data.seizure_dir");
    std::vector<TimeSeriesRecording> normal;
    for (const auto& r : read_bonn(config.get("data.normal_dir"))) normal.push_back(maybe_filter(r, filter));
    TrainTestSplit split = split_bonn(normal, window, config.get_double("preprocess.test_fraction"));
    std::vector<WindowSet> parts = {split.test};
    for (const auto& r : read_bonn(config.get("data.seizure_dir"))) {
      WindowSet w = segment_windows(maybe_filter(r, filter), window);
      w.labels.assign(static_cast<std::size_t>(w.count()), WindowLabel::kSeizure);
      parts.push_back(std::move(w));
    }
    WindowSet test = concat_windows(parts);
    finish_preprocess(config, out, {&split.train, &test}, filter);
    save_window_set(split.train, (out / "train.svws").string());
    save_window_set(test, (out / "test.svws").string());
    log_info("preprocess: " + std::to_string(split.train.count()) + " training windows, " +
             std::to_string(test.count()) + " test windows");
    return;
  }

  require(format == "edf", ErrorCode::kConfig, "data.format must be bonn or edf, got '" + format + "'");
  const auto files = config.get_list("data.edf");
  require(!files.empty(), ErrorCode::kConfig, "edf preprocessing needs data.edf");
  std::vector<SeizureAnnotation> annotations;
  if (!config.get("data.annotations").empty()) annotations = read_annotations(fs::path(config.get("data.annotations")));
  const PhaseHorizons horizons = config.horizons();
  std::vector<WindowSet> pool;
  std::vector<WindowSet> seizure_tracks;
  for (const auto& f : files) {
    const TimeSeriesRecording rec = maybe_filter(read_edf(f, config.get_list("data.channels")), filter);
    WindowSet w = segment_windows(rec, window);
    const SeizureAnnotation* a = find_track(annotations, rec.source_id);
    const std::vector<SeizureInterval> intervals = a ? a->intervals : std::vector<SeizureInterval>{};
    annotate_windows(w, intervals, horizons);
    (intervals.empty() ? pool : seizure_tracks).push_back(std::move(w));
  }
  for (const auto& a : annotations) {
    const bool used = std::any_of(files.begin(), files.end(), [&](const auto& f) { return fs::path(f).stem() == a.track_id; });
    if (!used) log_warning("annotations for track '" + a.track_id + "' match no input file");
  }
  require(!pool.empty(), ErrorCode::kConfig, "edf preprocessing needs at least one track without seizures");
  TrainTestSplit split =
      sample_test_minutes(concat_windows(pool), config.get_int("preprocess.test_minutes"), derive_seed(config.seed(), 1));
  WindowSet tracks;
  WindowSet test = split.test;
  if (!seizure_tracks.empty()) {
    tracks = concat_windows(seizure_tracks);
    std::vector<Index> ictal;
    for (Index i = 0; i < tracks.count(); ++i) {
      if (tracks.labels[static_cast<std::size_t>(i)] == WindowLabel::kSeizure) ictal.push_back(i);
    }
    test = concat_windows({split.test, select_windows(tracks, ictal)});
  }
  finish_preprocess(config, out, {&split.train, &test, &tracks}, filter);
  save_window_set(split.train, (out / "train.svws").string());
  save_window_set(test, (out / "test.svws").string());
  if (tracks.count() > 0) save_window_set(tracks, (out / "tracks.svws").string());
  log_info("preprocess: " + std::to_string(split.train.count()) + " training windows, " +
           std::to_string(test.count()) + " test windows, " + std::to_string(seizure_tracks.size()) +
           " seizure tracks");
}

void cmd_train(const RunConfig& config) {
  const fs::path out = prepare(config, "train");
  const WindowSet set = load_set(config, "data.train", "train.svws");
  require(std::none_of(set.labels.begin(), set.labels.end(), [](auto l) { return l == WindowLabel::kSeizure; }),
          ErrorCode::kConfig, "training windows must not contain seizure windows");
  const VaeArchitecture arch = fit_to(config.architecture(), set);
  const VaeModel model = train(set.windows, config.train_config(), arch);
  save_checkpoint(model, (out / "model.svae").string());
  {
    auto h = open_out(out / "history.csv");
    write_history_csv(h, model.history);
  }
  const auto& best = model.history.at(static_cast<std::size_t>(model.best_epoch));
  write_json(out / "train.json", {{"variant", to_string(arch.variant)},
                                  {"epochs", model.history.size()},
                                  {"best_epoch", model.best_epoch},
                                  {"best_val_loss", best.val_loss},
                                  {"best_val_recon", best.recon},
                                  {"best_val_kl", best.kl},
                                  {"parameters", model.parameters.scalar_count()},
                                  {"train_windows", set.count() - static_cast<Index>(model.validation_indices.size())},
                                  {"validation_windows", model.validation_indices.size()}});
  log_info("train: " + std::to_string(model.history.size()) + " epochs, best val loss " +
           format_double(best.val_loss) + " at epoch " + std::to_string(model.best_epoch));
}

void cmd_score(const RunConfig& config) {
  const fs::path out = prepare(config, "score");
  const VaeModel model = load_checkpoint(config.path_or("data.checkpoint", "model.svae").string());
  const WindowSet test = load_set(config, "data.test", "test.svws");
  const ScoreOptions opts = score_options(config);
  const Eigen::VectorXd scores = reconstruct_mse(test.windows, model, opts);
  auto csv = open_out(out / "scores.csv");
  csv << "index,track,start_s,label,phase,mse\n";
  for (Index i = 0; i < test.count(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    csv << i << ',' << (test.track_index.empty() ? "" : test.track_names[test.track_index[k]]) << ','
        << format_double(test.start_times[k]) << ',' << (test.labels.empty() ? "" : to_string(test.labels[k])) << ','
        << (test.phases.empty() ? "" : to_string(test.phases[k])) << ',' << format_double(scores[i]) << '\n';
  }
  const fs::path train_path = config.path_or("data.train", "train.svws");
  if (fs::exists(train_path)) {
    const Eigen::VectorXd val = validation_scores(load_window_set(train_path.string()), model, opts);
    auto v = open_out(out / "val_scores.csv");
    v << "index,mse\n";
    for (Index i = 0; i < val.size(); ++i) v << model.validation_indices[static_cast<std::size_t>(i)] << ',' << format_double(val[i]) << '\n';
  }
}

void cmd_eval(const RunConfig& config, std::ostream& console) {
  const fs::path out = prepare(config, "eval");
  const VaeModel model = load_checkpoint(config.path_or("data.checkpoint", "model.svae").string());
  const WindowSet train_set = load_set(config, "data.train", "train.svws");
  const WindowSet test = load_set(config, "data.test", "test.svws");
  require(static_cast<Index>(test.labels.size()) == test.count(), ErrorCode::kConfig,
          "evaluation needs labelled test windows");
  const ScoreOptions opts = score_options(config);
  const ThresholdPolicy policy = config.threshold_policy();
  const Eigen::VectorXd val = validation_scores(train_set, model, opts);
  const DetectionReport report = detect(reconstruct_mse(test.windows, model, opts), test.labels, val, policy);

  json j = report;
  j["threshold_name"] = threshold_name(policy);
  j["variant"] = to_string(model.architecture.variant);
  j["validation_windows"] = val.size();
  write_json(out / "report.json", j);
  {
    auto t = open_out(out / "confusion.txt");
    t << confusion_table(report.metrics);
  }
  console << "threshold " << threshold_name(policy) << " (" << policy.to_string() << ") = "
          << format_double(report.threshold) << '\n'
          << confusion_table(report.metrics);

  if (config.get("data.annotations").empty()) return;
  const fs::path tracks_path = config.path_or("data.tracks", "tracks.svws");
  require(fs::exists(tracks_path), ErrorCode::kIo, "phase analysis needs " + tracks_path.string() + " (set data.tracks)");
  const WindowSet tracks = load_window_set(tracks_path.string());
  require(tracks.count() > 0 && static_cast<Index>(tracks.track_index.size()) == tracks.count(), ErrorCode::kConfig,
          "phase analysis needs windows with track ids");
  const auto annotations = read_annotations(fs::path(config.get("data.annotations")));
  const PhaseHorizons horizons = config.horizons();
  const Eigen::VectorXd scores = reconstruct_mse(tracks.windows, model, opts);
  const auto preds = classify(scores, report.threshold);
  const double span = static_cast<double>(tracks.length()) / tracks.sampling_rate;

  std::vector<TrackPredictions> per_track;
  for (std::uint32_t k = 0; k < tracks.track_names.size(); ++k) {
    const std::string& name = tracks.track_names[k];
    std::vector<Index> idx;
    for (Index i = 0; i < tracks.count(); ++i) {
      if (tracks.track_index[static_cast<std::size_t>(i)] == k) idx.push_back(i);
    }
    if (idx.empty()) continue;
    std::vector<WindowLabel> per_second(idx.size(), WindowLabel::kNonSeizure);
    std::vector<double> seconds;
    bool contiguous = std::abs(span - 1.0) < 1e-9;
    for (std::size_t n = 0; n < idx.size() && contiguous; ++n) {
      const double t = tracks.start_times[static_cast<std::size_t>(idx[n])];
      contiguous = std::abs(t - static_cast<double>(n)) < 1e-6;
      seconds.push_back(t);
      per_second[n] = preds[static_cast<std::size_t>(idx[n])];
    }
    if (!contiguous) {
      log_warning("track '" + name + "' is not a contiguous run of 1 s windows; skipped in phase rates");
      continue;
    }
    const SeizureAnnotation* a = find_track(annotations, name);
    TrackPredictions tp{name, subject_of(name), per_second, a ? a->intervals : std::vector<SeizureInterval>{}};
    Eigen::VectorXd track_scores(static_cast<Index>(idx.size()));
    for (std::size_t n = 0; n < idx.size(); ++n) track_scores[static_cast<Index>(n)] = scores[idx[n]];
    auto trace = open_out(out / ("trace_" + name + ".csv"));
    write_score_trace_csv(trace, seconds, track_scores, per_second,
                          tag_phases(static_cast<Index>(idx.size()), tp.intervals, horizons));
    per_track.push_back(std::move(tp));
  }
  const PhaseRateReport phases = phase_rates(per_track, horizons);
  write_json(out / "phases.json", phases);
  auto csv = open_out(out / "phases.csv");
  csv << "track,subject,phase,seconds,flagged,rate_percent\n";
  for (const auto& t : phases.tracks) {
    for (Phase p : kAllPhases) {
      const auto q = static_cast<std::size_t>(p);
      csv << t.track_id << ',' << t.subject_id << ',' << to_string(p) << ',' << t.counts.seconds[q] << ','
          << t.counts.flagged[q] << ',' << format_double(t.counts.rate(p)) << '\n';
    }
  }
  console << phase_table(phases);
}

void cmd_select(const RunConfig& config, std::ostream& console) {
  const fs::path out = prepare(config, "select");
  std::vector<Configuration> configs;
  std::vector<TrialResult> results;

  if (!config.get("select.results").empty()) {
    std::ifstream in(config.get("select.results"));
    require(in.good(), ErrorCode::kIo, "cannot open " + config.get("select.results"));
    ResultsTable table = read_results_csv(in);
    configs = std::move(table.configs);
    results = std::move(table.results);
  } else {
    const std::string space_name = config.get("select.space");
    SearchSpace space;
    if (space_name == "bonn") {
      space = bonn_search_space();
    } else if (space_name == "chbmit") {
      space = chbmit_search_space();
    } else if (space_name == "custom") {
      space.axes = {{"model.kernel_length", config.get_list("select.kernel_lengths")},
                    {"model.filter_count", config.get_list("select.filter_counts")},
                    {"model.activation", config.get_list("select.activations")},
                    {"model.latent_dim", config.get_list("select.latent_dims")}};
    } else {
      fail(ErrorCode::kConfig, "select.space must be bonn, chbmit or custom, got '" + space_name + "'");
    }
    configs = grid_expand(space);

    const WindowSet set = load_set(config, "data.train", "train.svws");
    std::vector<Split> splits;
    const std::string cv = config.get("select.cv");
    if (cv == "kfold") {
      splits = kfold(set.count(), config.get_int("select.folds"), derive_seed(config.seed(), 7));
    } else if (cv == "loto") {
      std::vector<std::string> tracks;
      for (auto k : set.track_index) tracks.push_back(set.track_names[k]);
      splits = leave_one_track_out(tracks);
    } else {
      fail(ErrorCode::kConfig, "select.cv must be kfold or loto, got '" + cv + "'");
    }
    const TrainConfig base = config.train_config();
    const TrialFn evaluate = [&](const Configuration& c, std::uint64_t seed) {
      RunConfig rc = config;
      for (const auto& [k, v] : c.values) rc.set(k, v);
      const VaeArchitecture arch = fit_to(rc.architecture(), set);
      TrialResult r;
      for (std::size_t f = 0; f < splits.size(); ++f) {
        TrainConfig tc = base;
        tc.seed = derive_seed(seed, f);
        const VaeModel model = train(gather_windows(set.windows, splits[f].train), tc, arch);
        r.fold_mse.push_back(reconstruct_mse(gather_windows(set.windows, splits[f].test), model).mean());
        r.parameter_count = model.parameters.scalar_count();
      }
      return r;
    };
    const long long workers = config.get_int("select.workers");
    require(workers >= 1, ErrorCode::kConfig, "select.workers must be >= 1");
    results = run_grid(configs, evaluate, derive_seed(config.seed(), 8), static_cast<unsigned>(workers));
  }

  const SelectionReport report = select_configuration(
      results, configs, config.get_double("select.alpha"), parse_complexity_order(config.get("select.complexity_order")));
  {
    auto csv = open_out(out / "results.csv");
    write_results_csv(csv, configs, results);
  }
  {
    auto csv = open_out(out / "pvalues.csv");
    write_pvalue_csv(csv, report);
  }
  write_json(out / "selection.json", report);
  const auto chosen = std::find_if(configs.begin(), configs.end(), [&](const auto& c) { return c.id == report.chosen_id; });
  auto conf = open_out(out / "chosen.conf");
  conf << "# configuration " << chosen->id << '\n';
  for (const auto& [k, v] : chosen->values) conf << k << " = " << v << '\n';
  console << "grid " << report.all_ids.size() << " -> one-sigma " << report.one_sigma.size() << " -> "
          << report.omnibus_test << (report.omnibus_significant ? " significant" : " not significant") << " -> pairwise "
          << report.pairwise.size() << " -> chosen " << chosen->id << " (" << chosen->label() << ")\n";
}

void cmd_synth(const RunConfig& config) {
  const fs::path out = prepare(config, "synth");
  const double window = config.get_double("preprocess.window_s");
  SynthSpec base;
  base.channels = config.get_int("synth.channels");
  base.sampling_rate = config.get_double("synth.sampling_rate");

  SynthSpec train_spec = base;
  train_spec.duration_s = config.get_double("synth.train_duration_s");
  train_spec.seed = derive_seed(config.seed(), 0);
  SynthDataset train_data = synth_generate(train_spec);
  train_data.recordings[0].source_id = "synth_train";
  train_data.annotations[0].track_id = "synth_train";

  SynthSpec test_spec = base;
  test_spec.duration_s = config.get_double("synth.test_duration_s");
  test_spec.tracks = config.get_int("synth.test_tracks");
  test_spec.bursts.count = config.get_int("synth.burst_count");
  test_spec.bursts.duration_s = config.get_double("synth.burst_duration_s");
  test_spec.bursts.gain = config.get_double("synth.burst_gain");
  const auto band = config.get("synth.burst_band");
  const auto colon = band.find(':');
  require(colon != std::string::npos && parse_double(band.substr(0, colon), test_spec.bursts.low_hz) &&
              parse_double(band.substr(colon + 1), test_spec.bursts.high_hz),
          ErrorCode::kConfig, "synth.burst_band must be LO:HI, got '" + band + "'");
  test_spec.seed = derive_seed(config.seed(), 1);
  SynthDataset test_data = synth_generate(test_spec);
  for (std::size_t t = 0; t < test_data.recordings.size(); ++t) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_test_%03zu", t);
    test_data.recordings[t].source_id = id;
    test_data.annotations[t].track_id = id;
  }

  WindowSet train_set = segment_windows(train_data.recordings[0], window);
  train_set.labels.assign(static_cast<std::size_t>(train_set.count()), WindowLabel::kNonSeizure);
  std::vector<WindowSet> parts;
  for (std::size_t t = 0; t < test_data.recordings.size(); ++t) {
    WindowSet w = segment_windows(test_data.recordings[t], window);
    annotate_windows(w, test_data.annotations[t].intervals, config.horizons());
    parts.push_back(std::move(w));
  }
  const WindowSet test_set = concat_windows(parts);
  save_window_set(train_set, (out / "train.svws").string());
  save_window_set(test_set, (out / "test.svws").string());
  save_window_set(test_set, (out / "tracks.svws").string());
  {
    auto a = open_out(out / "annotations.csv");
    write_annotations(a, test_data.annotations);
  }
  if (config.get_bool("synth.edf")) {
    write_edf(train_data.recordings[0], out / "synth_train.edf");
    for (const auto& r : test_data.recordings) write_edf(r, out / (r.source_id + ".edf"));
  }
  log_info("synth: " + std::to_string(train_set.count()) + " training windows, " + std::to_string(test_set.count()) +
           " test windows");
}

void cmd_edf_info(const fs::path& path, std::ostream& out) {
  const EdfHeader h = read_edf_header(path);
  out << "file: " << path.string() << '\n'
      << "version: " << h.version << '\n'
      << "patient: " << h.patient_id << '\n'
      << "recording: " << h.recording_id << '\n'
      << "start: " << h.start_date << ' ' << h.start_time << '\n'
      << "header_bytes: " << h.header_bytes << '\n'
      << "reserved: " << h.reserved << '\n'
      << "records: " << h.record_count << " x " << format_double(h.record_duration) << " s\n"
      << "duration_s: " << format_double(static_cast<double>(h.record_count) * h.record_duration) << '\n'
      << "signals: " << h.signals.size() << '\n'
      << "index,label,dimension,physical_min,physical_max,digital_min,digital_max,samples_per_record,rate_hz,"
         "transducer,prefiltering\n";
  for (std::size_t i = 0; i < h.signals.size(); ++i) {
    const auto& s = h.signals[i];
    out << i << ',' << s.label << ',' << s.physical_dimension << ',' << format_double(s.physical_min) << ','
        << format_double(s.physical_max) << ',' << s.digital_min << ',' << s.digital_max << ','
        << s.samples_per_record << ',' << format_double(static_cast<double>(s.samples_per_record) / h.record_duration)
        << ',' << s.transducer << ',' << s.prefiltering << '\n';
  }
}

}  // namespace sincvae
