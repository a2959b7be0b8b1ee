#include "sincvae/signal.hpp"

#include "sincvae/binary_io.hpp"
#include "sincvae/error.hpp"
#include "sincvae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

namespace sincvae {

const char* to_string(WindowLabel label) {
  return label == WindowLabel::kSeizure ? "seizure" : "non-seizure";
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::kInterictal: return "interictal";
    case Phase::kPreictal: return "preictal";
    case Phase::kIctal: return "ictal";
    case Phase::kPostictal: return "postictal";
  }
  return "interictal";
}

void TimeSeriesRecording::validate() const {
  require(sampling_rate > 0.0 && std::isfinite(sampling_rate), ErrorCode::kInvalidArgument,
          "recording '" + source_id + "': sampling rate must be positive");
  require(channel_names.empty() || static_cast<Index>(channel_names.size()) == channel_count(),
          ErrorCode::kShapeMismatch,
          "recording '" + source_id + "': " + std::to_string(channel_names.size()) +
              " channel names for " + std::to_string(channel_count()) + " channels");
  require(samples.allFinite(), ErrorCode::kNonFinite,
          "recording '" + source_id + "' contains non-finite samples");
}

void WindowSet::validate() const {
  require(windows.rank() == 3, ErrorCode::kShapeMismatch,
          "window set must be [count, channels, length], got " + shape_string(windows.shape()));
  const auto n = static_cast<std::size_t>(count());
  require(start_times.size() == n, ErrorCode::kShapeMismatch, "window set: start_times size mismatch");
  require(labels.empty() || labels.size() == n, ErrorCode::kShapeMismatch, "window set: labels size mismatch");
  require(phases.empty() || phases.size() == n, ErrorCode::kShapeMismatch, "window set: phases size mismatch");
  require(track_index.empty() || track_index.size() == n, ErrorCode::kShapeMismatch,
          "window set: track_index size mismatch");
  require(channel_names.empty() || static_cast<Index>(channel_names.size()) == channels(),
          ErrorCode::kShapeMismatch, "window set: channel_names size mismatch");
  std::map<std::uint32_t, double> last;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t t = track_index.empty() ? 0 : track_index[i];
    require(track_index.empty() || t < track_names.size(), ErrorCode::kFormat,
            "window set: track index out of range");
    auto it = last.find(t);
    require(it == last.end() || start_times[i] >= it->second, ErrorCode::kFormat,
            "window set: start times decrease within a track at window " + std::to_string(i));
    last[t] = start_times[i];
  }
}

WindowSet segment_windows_samples(const TimeSeriesRecording& rec, Index window_length, Index stride) {
  rec.validate();
  require(window_length >= 1, ErrorCode::kInvalidArgument, "window length must be >= 1 sample");
  require(stride >= 1, ErrorCode::kInvalidArgument, "window stride must be >= 1 sample");
  const Index c = rec.channel_count();
  const Index total = rec.sample_count();
  const Index count = total >= window_length ? (total - window_length) / stride + 1 : 0;

  WindowSet set;
  set.sampling_rate = rec.sampling_rate;
  set.channel_names = rec.channel_names;
  set.track_names = {rec.source_id};
  set.windows = Tensor({count, c, window_length});
  for (Index w = 0; w < count; ++w) {
    const Index start = w * stride;
    set.windows.matrix(count * c, window_length).middleRows(w * c, c) =
        rec.samples.middleCols(start, window_length);
    set.start_times.push_back(static_cast<double>(start) / rec.sampling_rate);
  }
  set.track_index.assign(static_cast<std::size_t>(count), 0);
  return set;
}

WindowSet segment_windows(const TimeSeriesRecording& rec, double window_seconds,
                          std::optional<double> stride_seconds) {
  require(window_seconds > 0.0, ErrorCode::kInvalidArgument, "window_seconds must be positive");
  const double stride_s = stride_seconds.value_or(window_seconds);
  require(stride_s > 0.0, ErrorCode::kInvalidArgument, "stride_seconds must be positive");
  // The small slack keeps e.g. 0.5 s * 256 Hz from flooring to 127.
  const auto to_samples = [&](double seconds) {
    return static_cast<Index>(std::floor(seconds * rec.sampling_rate + 1e-9));
  };
  const Index len = to_samples(window_seconds);
  require(len >= 1, ErrorCode::kInvalidArgument, "window shorter than one sample");
  const Index stride = stride_seconds ? to_samples(stride_s) : len;
  return segment_windows_samples(rec, len, stride);
}

WindowSet select_windows(const WindowSet& set, const std::vector<Index>& indices) {
  const Index c = set.channels();
  const Index t = set.length();
  const Index k = static_cast<Index>(indices.size());
  WindowSet out;
  out.sampling_rate = set.sampling_rate;
  out.channel_names = set.channel_names;
  out.track_names = set.track_names;
  out.windows = Tensor({k, c, t});
  const auto src = set.windows.matrix(set.count(), c * t);
  auto dst = out.windows.matrix(k, c * t);
  for (Index r = 0; r < k; ++r) {
    const Index i = indices[static_cast<std::size_t>(r)];
    require(i >= 0 && i < set.count(), ErrorCode::kInvalidArgument,
            "window index " + std::to_string(i) + " out of range for " + std::to_string(set.count()));
    const auto u = static_cast<std::size_t>(i);
    dst.row(r) = src.row(i);
    out.start_times.push_back(set.start_times[u]);
    if (!set.labels.empty()) out.labels.push_back(set.labels[u]);
    if (!set.phases.empty()) out.phases.push_back(set.phases[u]);
    if (!set.track_index.empty()) out.track_index.push_back(set.track_index[u]);
  }
  return out;
}

WindowSet concat_windows(const std::vector<WindowSet>& sets) {
  require(!sets.empty(), ErrorCode::kInvalidArgument, "concat_windows: no window sets");
  const WindowSet& first = sets.front();
  Index total = 0;
  const auto all_or_none = [&](auto member, const char* what) {
    std::size_t nonempty = 0;
    std::size_t with = 0;
    for (const auto& s : sets) {
      if (s.count() == 0) continue;
      ++nonempty;
      if (!(s.*member).empty()) ++with;
    }
    require(with == 0 || with == nonempty, ErrorCode::kInvalidArgument,
            std::string("concat_windows: ") + what + " present on only some sets");
    return with > 0;
  };
  for (const auto& s : sets) {
    require(s.channels() == first.channels() && s.length() == first.length(), ErrorCode::kShapeMismatch,
            "concat_windows: window shape " + shape_string(s.windows.shape()) + " vs " +
                shape_string(first.windows.shape()));
    require(s.sampling_rate == first.sampling_rate, ErrorCode::kInvalidArgument,
            "concat_windows: sampling rates differ");
    total += s.count();
  }
  const bool labels = all_or_none(&WindowSet::labels, "labels");
  const bool phases = all_or_none(&WindowSet::phases, "phases");

  const Index row = first.channels() * first.length();
  WindowSet out;
  out.sampling_rate = first.sampling_rate;
  out.channel_names = first.channel_names;
  out.windows = Tensor({total, first.channels(), first.length()});
  Index at = 0;
  for (const auto& s : sets) {
    out.windows.data().segment(at * row, s.count() * row) = s.windows.data();
    at += s.count();
    out.start_times.insert(out.start_times.end(), s.start_times.begin(), s.start_times.end());
    if (labels && s.count() > 0) out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    if (phases && s.count() > 0) out.phases.insert(out.phases.end(), s.phases.begin(), s.phases.end());
    for (Index i = 0; i < s.count(); ++i) {
      const std::string& name =
          s.track_index.empty() ? std::string() : s.track_names[s.track_index[static_cast<std::size_t>(i)]];
      auto pos = std::find(out.track_names.begin(), out.track_names.end(), name);
      if (pos == out.track_names.end()) pos = out.track_names.insert(pos, name);
      out.track_index.push_back(static_cast<std::uint32_t>(pos - out.track_names.begin()));
    }
  }
  return out;
}

namespace {

ChannelStats stats_from_rows(const Eigen::Ref<const RowMajorMatrix>& rows, Index channels) {
  // rows: (k * channels) x t, channel = row % channels
  ChannelStats s;
  s.mean = Eigen::VectorXd::Zero(channels);
  s.std = Eigen::VectorXd::Zero(channels);
  const Index k = channels > 0 ? rows.rows() / channels : 0;
  const double n = static_cast<double>(k * rows.cols());
  if (n == 0.0) return s;
  for (Index c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (Index w = 0; w < k; ++w) sum += rows.row(w * channels + c).sum();
    const double mean = sum / n;
    double ss = 0.0;
    for (Index w = 0; w < k; ++w) ss += (rows.row(w * channels + c).array() - mean).square().sum();
    s.mean[c] = mean;
    s.std[c] = std::sqrt(ss / n);
  }
  return s;
}

void apply_zscore(Eigen::Ref<RowMajorMatrix> rows, Index channels, const ChannelStats& stats) {
  require(stats.mean.size() == channels && stats.std.size() == channels, ErrorCode::kShapeMismatch,
          "zscore: stats for " + std::to_string(stats.mean.size()) + " channels, data has " +
              std::to_string(channels));
  for (Index r = 0; r < rows.rows(); ++r) {
    const Index c = r % channels;
    if (stats.std[c] < 1e-12) {
      rows.row(r).setZero();
    } else {
      rows.row(r) = (rows.row(r).array() - stats.mean[c]) / stats.std[c];
    }
  }
}

}  // namespace

ChannelStats compute_stats(const WindowSet& set) {
  return stats_from_rows(set.windows.matrix(set.count() * set.channels(), set.length()), set.channels());
}

ChannelStats compute_stats(const TimeSeriesRecording& rec) {
  return stats_from_rows(rec.samples, rec.channel_count());
}

WindowSet zscore(const WindowSet& set, const ChannelStats& stats) {
  WindowSet out = set;
  apply_zscore(out.windows.matrix(set.count() * set.channels(), set.length()), set.channels(), stats);
  return out;
}

TimeSeriesRecording zscore(const TimeSeriesRecording& rec, const ChannelStats& stats) {
  TimeSeriesRecording out = rec;
  apply_zscore(out.samples, rec.channel_count(), stats);
  return out;
}

namespace {

Eigen::VectorXd windowed_lowpass(double cutoff_hz, double fs, Index taps) {
  Eigen::VectorXd h(taps);
  const double fc = cutoff_hz / fs;
  const double centre = static_cast<double>(taps - 1) / 2.0;
  for (Index k = 0; k < taps; ++k) {
    const double n = static_cast<double>(k) - centre;
    const double x = 2.0 * std::numbers::pi * fc * n;
    const double sinc = n == 0.0 ? 1.0 : std::sin(x) / x;
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                            static_cast<double>(taps - 1));
    h[k] = 2.0 * fc * sinc * w;
  }
  return h;
}

double gain_at(const Eigen::VectorXd& h, double freq_hz, double fs) {
  const double centre = static_cast<double>(h.size() - 1) / 2.0;
  double g = 0.0;
  for (Index k = 0; k < h.size(); ++k) {
    g += h[k] * std::cos(2.0 * std::numbers::pi * freq_hz / fs * (static_cast<double>(k) - centre));
  }
  return g;
}

}  // namespace

Eigen::VectorXd design_fir(const FilterSpec& spec, double fs) {
  require(fs > 0.0, ErrorCode::kInvalidArgument, "filter: sampling rate must be positive");
  require(spec.taps >= 3 && spec.taps % 2 == 1, ErrorCode::kInvalidArgument,
          "filter: tap count must be odd and >= 3, got " + std::to_string(spec.taps));
  const double nyquist = fs / 2.0;
  require(spec.high_hz > 0.0 && spec.high_hz < nyquist, ErrorCode::kInvalidArgument,
          "filter: cutoff " + std::to_string(spec.high_hz) + " Hz must lie in (0, Nyquist " +
              std::to_string(nyquist) + " Hz)");
  if (spec.kind == FilterKind::kLowpass) {
    Eigen::VectorXd h = windowed_lowpass(spec.high_hz, fs, spec.taps);
    return h / h.sum();
  }
  require(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz, ErrorCode::kInvalidArgument,
          "filter: bandpass needs 0 < low (" + std::to_string(spec.low_hz) + ") < high (" +
              std::to_string(spec.high_hz) + ")");
  Eigen::VectorXd h = windowed_lowpass(spec.high_hz, fs, spec.taps) -
                      windowed_lowpass(spec.low_hz, fs, spec.taps);
  return h / gain_at(h, 0.5 * (spec.low_hz + spec.high_hz), fs);
}

Eigen::VectorXd filtfilt(const Eigen::VectorXd& taps, const Eigen::VectorXd& x) {
  const Index n = x.size();
  const Index m = taps.size();
  if (n == 0) return x;
  // Forward then backward passes of h equal one pass of h convolved with its reverse.
  Eigen::VectorXd h2 = Eigen::VectorXd::Zero(2 * m - 1);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) h2[i + j] += taps[i] * taps[m - 1 - j];
  }
  const Index pad = std::min<Index>(3 * m, n - 1);
  const Index half = m - 1;
  Eigen::VectorXd ext = Eigen::VectorXd::Zero(n + 2 * pad + 2 * half);
  const Index off = half + pad;
  ext.segment(off, n) = x;
  for (Index i = 1; i <= pad; ++i) {
    ext[off - i] = 2.0 * x[0] - x[i];
    ext[off + n - 1 + i] = 2.0 * x[n - 1] - x[n - 1 - i];
  }
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) y[i] = ext.segment(off + i - half, 2 * m - 1).dot(h2);
  return y;
}

TimeSeriesRecording fir_filter(const TimeSeriesRecording& rec, const FilterSpec& spec) {
  rec.validate();
  const Eigen::VectorXd h = design_fir(spec, rec.sampling_rate);
  TimeSeriesRecording out = rec;
  for (Index c = 0; c < rec.channel_count(); ++c) {
    out.samples.row(c) = filtfilt(h, rec.samples.row(c).transpose()).transpose();
  }
  return out;
}

TrainTestSplit split_bonn(const std::vector<TimeSeriesRecording>& segments, double window_seconds,
                          double fraction) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::kInvalidArgument,
          "split fraction must lie in (0, 1), got " + std::to_string(fraction));
  const auto n = static_cast<Index>(segments.size());
  const Index held = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  require(held >= 1 && held < n, ErrorCode::kInvalidArgument,
          "split of " + std::to_string(n) + " segments at fraction " + std::to_string(fraction) +
              " leaves an empty side");
  std::vector<WindowSet> train;
  std::vector<WindowSet> test;
  for (Index i = 0; i < n; ++i) {
    WindowSet w = segment_windows(segments[static_cast<std::size_t>(i)], window_seconds);
    w.labels.assign(static_cast<std::size_t>(w.count()), WindowLabel::kNonSeizure);
    (i < n - held ? train : test).push_back(std::move(w));
  }
  return {concat_windows(train), concat_windows(test)};
}

TrainTestSplit sample_test_minutes(const WindowSet& pool, Index minutes, std::uint64_t seed) {
  require(minutes >= 1, ErrorCode::kInvalidArgument, "minutes must be >= 1");
  const Index need = 60 * minutes;
  require(pool.count() >= need, ErrorCode::kInvalidArgument,
          "need " + std::to_string(need) + " windows for " + std::to_string(minutes) +
              " minutes, pool has " + std::to_string(pool.count()));
  std::vector<Index> order(static_cast<std::size_t>(pool.count()));
  for (Index i = 0; i < pool.count(); ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Index> test(order.begin(), order.begin() + need);
  std::vector<Index> rest(order.begin() + need, order.end());
  std::sort(test.begin(), test.end());
  std::sort(rest.begin(), rest.end());
  return {select_windows(pool, rest), select_windows(pool, test)};
}

namespace {

constexpr char kWindowMagic[5] = "SVWS";
constexpr std::uint32_t kWindowVersion = 1;
constexpr std::uint8_t kHasLabels = 1;
constexpr std::uint8_t kHasPhases = 2;
constexpr std::uint8_t kHasTracks = 4;
constexpr std::uint64_t kMaxName = 1 << 16;

void write_names(std::ostream& out, const std::vector<std::string>& names) {
  binio::write_le<std::uint64_t>(out, names.size());
  for (const auto& s : names) binio::write_string(out, s);
}

std::vector<std::string> read_names(std::istream& in, const char* what) {
  const auto count = binio::read_le<std::uint64_t>(in, what);
  require(count <= (1u << 24), ErrorCode::kFormat, std::string("implausible count for ") + what);
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < count; ++i) names.push_back(binio::read_string(in, what, kMaxName));
  return names;
}

}  // namespace

void save_window_set(const WindowSet& set, std::ostream& out) {
  set.validate();
  binio::write_magic(out, kWindowMagic);
  binio::write_le<std::uint32_t>(out, kWindowVersion);
  binio::write_le<double>(out, set.sampling_rate);
  binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(set.count()));
  binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(set.channels()));
  binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(set.length()));
  std::uint8_t flags = 0;
  if (!set.labels.empty()) flags |= kHasLabels;
  if (!set.phases.empty()) flags |= kHasPhases;
  if (!set.track_index.empty()) flags |= kHasTracks;
  binio::write_le<std::uint8_t>(out, flags);
  write_names(out, set.channel_names);
  binio::write_doubles(out, set.start_times.data(), set.start_times.size());
  binio::write_doubles(out, set.windows.ptr(), static_cast<std::size_t>(set.windows.size()));
  if (flags & kHasLabels) {
    for (auto l : set.labels) binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l));
  }
  if (flags & kHasPhases) {
    for (auto p : set.phases) binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(p));
  }
  if (flags & kHasTracks) {
    write_names(out, set.track_names);
    for (auto t : set.track_index) binio::write_le<std::uint32_t>(out, t);
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing window set");
}

void save_window_set(const WindowSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  save_window_set(set, out);
}

WindowSet load_window_set(std::istream& in) {
  binio::expect_magic(in, kWindowMagic);
  const auto version = binio::read_le<std::uint32_t>(in, "version");
  require(version == kWindowVersion, ErrorCode::kFormat,
          "unsupported SVWS version " + std::to_string(version));
  WindowSet set;
  set.sampling_rate = binio::read_le<double>(in, "sampling rate");
  const auto count = binio::read_le<std::uint64_t>(in, "count");
  const auto channels = binio::read_le<std::uint64_t>(in, "channels");
  const auto length = binio::read_le<std::uint64_t>(in, "length");
  require(count < (1ull << 32) && channels < (1ull << 16) && length < (1ull << 32) &&
              count * channels * length < (1ull << 34),
          ErrorCode::kFormat, "implausible SVWS shape header");
  const auto flags = binio::read_le<std::uint8_t>(in, "flags");
  require((flags & ~(kHasLabels | kHasPhases | kHasTracks)) == 0, ErrorCode::kFormat,
          "unknown SVWS flags");
  set.channel_names = read_names(in, "channel names");
  set.start_times.resize(count);
  binio::read_doubles(in, set.start_times.data(), count, "start times");
  set.windows = Tensor({static_cast<Index>(count), static_cast<Index>(channels), static_cast<Index>(length)});
  binio::read_doubles(in, set.windows.ptr(), static_cast<std::size_t>(set.windows.size()), "window data");
  if (flags & kHasLabels) {
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto v = binio::read_le<std::uint8_t>(in, "labels");
      require(v <= 1, ErrorCode::kFormat, "invalid window label " + std::to_string(v));
      set.labels.push_back(static_cast<WindowLabel>(v));
    }
  }
  if (flags & kHasPhases) {
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto v = binio::read_le<std::uint8_t>(in, "phases");
      require(v <= 3, ErrorCode::kFormat, "invalid phase tag " + std::to_string(v));
      set.phases.push_back(static_cast<Phase>(v));
    }
  }
  if (flags & kHasTracks) {
    set.track_names = read_names(in, "track names");
    for (std::uint64_t i = 0; i < count; ++i) set.track_index.push_back(binio::read_le<std::uint32_t>(in, "tracks"));
  }
  set.validate();
  return set;
}

WindowSet load_window_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open window set '" + path + "'");
  return load_window_set(in);
}

}  // namespace sincvae
