#pragma once

#include "sincvae/detector.hpp"
#include "sincvae/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sincvae {

constexpr double kBonnSamplingRate = 173.61;

// One integer sample per line; blank lines are skipped.
TimeSeriesRecording read_bonn_file(const std::filesystem::path& path);
// Every regular file in `dir`, in file-name order.
std::vector<TimeSeriesRecording> read_bonn(const std::filesystem::path& dir);

struct EdfSignalHeader {
  std::string label;
  std::string transducer;
  std::string physical_dimension;
  double physical_min = -1.0;
  double physical_max = 1.0;
  long long digital_min = -32768;
  long long digital_max = 32767;
  std::string prefiltering;
  long long samples_per_record = 0;
  std::string reserved;

  // Physical units per digital step.
  double lsb() const;
};

struct EdfHeader {
  std::string version = "0";
  std::string patient_id;
  std::string recording_id;
  std::string start_date = "01.01.00";  // dd.mm.yy
  std::string start_time = "00.00.00";  // hh.mm.ss
  long long header_bytes = 0;
  std::string reserved;
  long long record_count = 0;
  double record_duration = 1.0;
  std::vector<EdfSignalHeader> signals;

  long long expected_header_bytes() const { return 256 + 256 * static_cast<long long>(signals.size()); }
  long long record_bytes() const;
};

// Exactly header_bytes bytes, every field left-justified and space-padded.
void write_edf_header(std::ostream& out, const EdfHeader& header);
EdfHeader read_edf_header(std::istream& in);
// Also checks the header against the file size.
EdfHeader read_edf_header(const std::filesystem::path& path);

struct EdfData {
  EdfHeader header;
  TimeSeriesRecording recording;
};

// Decodes the signals named in `channels` (all of them when empty), in that
// order. Selected signals must share one sample rate.
EdfData read_edf_data(const std::filesystem::path& path, const std::vector<std::string>& channels = {});
TimeSeriesRecording read_edf(const std::filesystem::path& path, const std::vector<std::string>& channels = {});

struct EdfWriteOptions {
  double record_duration = 1.0;
  // Symmetric physical range per channel; 0 picks one from the data.
  double physical_limit = 0.0;
  std::string patient_id = "X X X X";
  std::string recording_id = "Startdate X X X X";
  std::string physical_dimension = "uV";
};

// Header that write_edf would emit for `rec`.
EdfHeader make_edf_header(const TimeSeriesRecording& rec, const EdfWriteOptions& options = {});
void write_edf(const TimeSeriesRecording& rec, const EdfHeader& header, std::ostream& out);
void write_edf(const TimeSeriesRecording& rec, const std::filesystem::path& path,
               const EdfWriteOptions& options = {});

struct SeizureAnnotation {
  std::string track_id;
  std::vector<SeizureInterval> intervals;  // sorted, non-overlapping
};

// CSV `track_id,start_s,end_s` with an optional header row. Tracks appear in
// order of first mention.
std::vector<SeizureAnnotation> read_annotations(std::istream& in);
std::vector<SeizureAnnotation> read_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const std::vector<SeizureAnnotation>& annotations);
const SeizureAnnotation* find_track(const std::vector<SeizureAnnotation>& annotations, const std::string& track_id);

// Seizure label iff at least half of the window lies inside an interval.
// Phase is the tag of the second containing the window centre.
void annotate_windows(WindowSet& set, const std::vector<SeizureInterval>& intervals,
                      const PhaseHorizons& horizons = {});

struct NoiseBand {
  double low_hz = 0.0;  // 0 -> lowpass
  double high_hz = 0.0;
  double rms = 1.0;
};

struct Tone {
  double frequency_hz = 0.0;
  double amplitude = 0.0;
  // Phase random walk giving a Lorentzian line of this width; 0 is a pure tone.
  double linewidth_hz = 0.5;
};

struct BurstSpec {
  Index count = 0;
  double duration_s = 5.0;
  double gain = 3.0;  // in-burst RMS over background RMS
  double low_hz = 3.0;
  double high_hz = 8.0;
  // Explicit intervals override count/duration placement.
  std::vector<SeizureInterval> intervals;
};

struct SynthSpec {
  double duration_s = 600.0;
  Index channels = 1;
  Index tracks = 1;
  double sampling_rate = 128.0;
  std::vector<NoiseBand> noise = {{0.5, 30.0, 1.0}};
  std::vector<Tone> tones = {{10.0, 0.5, 0.5}, {2.0, 0.3, 0.5}};
  BurstSpec bursts;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  std::vector<TimeSeriesRecording> recordings;  // source ids "synth_000", ...
  std::vector<SeizureAnnotation> annotations;   // one per track, possibly empty
};

// Background is seeded band noise plus tones with drifting random phases. Inside a
// burst the background is replaced by band noise in [low_hz, high_hz] scaled
// to gain times the background RMS. Bursts start on whole seconds.
SynthDataset synth_generate(const SynthSpec& spec);

}  // namespace sincvae
