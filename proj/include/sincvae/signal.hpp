#pragma once

#include "sincvae/error.hpp"
#include "sincvae/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sincvae {

struct TimeSeriesRecording {
  RowMajorMatrix samples;  // channels x samples, physical units
  double sampling_rate = 0.0;
  std::vector<std::string> channel_names;
  std::string source_id;

  Index channel_count() const { return samples.rows(); }
  Index sample_count() const { return samples.cols(); }
  double duration_seconds() const { return static_cast<double>(sample_count()) / sampling_rate; }
  void validate() const;
};

enum class WindowLabel : std::uint8_t { kNonSeizure = 0, kSeizure = 1 };
enum class Phase : std::uint8_t { kInterictal = 0, kPreictal = 1, kIctal = 2, kPostictal = 3 };

const char* to_string(WindowLabel label);
const char* to_string(Phase phase);

// Fixed-length windows [count, channels, length] with per-window metadata.
// `labels`, `phases` and `track_index` are either empty or one per window;
// `track_index` points into `track_names`.
struct WindowSet {
  Tensor windows;
  double sampling_rate = 0.0;
  std::vector<double> start_times;
  std::vector<WindowLabel> labels;
  std::vector<Phase> phases;
  std::vector<std::string> channel_names;
  std::vector<std::string> track_names;
  std::vector<std::uint32_t> track_index;

  Index count() const { return windows.rank() == 3 ? windows.dim(0) : 0; }
  Index channels() const { return windows.rank() == 3 ? windows.dim(1) : 0; }
  Index length() const { return windows.rank() == 3 ? windows.dim(2) : 0; }
  void validate() const;
};

// Non-overlapping when `stride_seconds` is empty. Window length is
// floor(window_seconds * fs); a trailing partial window is dropped.
WindowSet segment_windows(const TimeSeriesRecording& rec, double window_seconds,
                          std::optional<double> stride_seconds = std::nullopt);
WindowSet segment_windows_samples(const TimeSeriesRecording& rec, Index window_length, Index stride);

// Rows `indices` of `set`, metadata included.
WindowSet select_windows(const WindowSet& set, const std::vector<Index>& indices);
// Concatenates sets with equal window shape and sampling rate; track tables are merged by name.
WindowSet concat_windows(const std::vector<WindowSet>& sets);

struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population standard deviation
};

ChannelStats compute_stats(const WindowSet& set);
ChannelStats compute_stats(const TimeSeriesRecording& rec);
// (x - mean) / std per channel; channels with std < 1e-12 become zeros.
WindowSet zscore(const WindowSet& set, const ChannelStats& stats);
TimeSeriesRecording zscore(const TimeSeriesRecording& rec, const ChannelStats& stats);

enum class FilterKind { kLowpass, kBandpass };

struct FilterSpec {
  FilterKind kind = FilterKind::kLowpass;
  double low_hz = 0.0;   // bandpass lower edge
  double high_hz = 0.0;  // lowpass cutoff or bandpass upper edge
  Index taps = 255;

  static FilterSpec lowpass(double cutoff_hz, Index taps = 255) {
    return {FilterKind::kLowpass, 0.0, cutoff_hz, taps};
  }
  static FilterSpec bandpass(double low_hz, double high_hz, Index taps = 255) {
    return {FilterKind::kBandpass, low_hz, high_hz, taps};
  }
};

// Hamming-windowed sinc taps; unit gain at DC (lowpass) or at the band centre (bandpass).
Eigen::VectorXd design_fir(const FilterSpec& spec, double sampling_rate);
// Zero-phase forward-backward filtering with odd reflection padding; length preserved.
Eigen::VectorXd filtfilt(const Eigen::VectorXd& taps, const Eigen::VectorXd& x);
TimeSeriesRecording fir_filter(const TimeSeriesRecording& rec, const FilterSpec& spec);

struct TrainTestSplit {
  WindowSet train;
  WindowSet test;
};

// Holds out the final `fraction` of the segments (in order) as non-seizure
// test data; every window is labelled non-seizure.
TrainTestSplit split_bonn(const std::vector<TimeSeriesRecording>& segments, double window_seconds,
                          double fraction = 0.2);

// Draws 60 * minutes windows without replacement as `test`; the rest stay in `train`.
TrainTestSplit sample_test_minutes(const WindowSet& pool, Index minutes, std::uint64_t seed);

// SVWS container: magic, version, shape header, little-endian float64 data,
// optional label / phase / track arrays.
void save_window_set(const WindowSet& set, std::ostream& out);
void save_window_set(const WindowSet& set, const std::string& path);
WindowSet load_window_set(std::istream& in);
WindowSet load_window_set(const std::string& path);

}  // namespace sincvae
