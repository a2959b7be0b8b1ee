#include "sincvae/ingest.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

namespace sincvae {

namespace fs = std::filesystem;

TimeSeriesRecording read_bonn_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open Bonn segment " + path.string());
  std::vector<double> values;
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string field = trim(line);
    if (field.empty()) continue;
    long long v = 0;
    require(parse_int64(field, v), ErrorCode::kFormat,
            path.string() + ":" + std::to_string(line_no) + ": not an integer sample: '" + field + "'");
    values.push_back(static_cast<double>(v));
  }
  require(!values.empty(), ErrorCode::kFormat, path.string() + ": empty Bonn segment");
  TimeSeriesRecording rec;
  rec.samples = Eigen::Map<const RowMajorMatrix>(values.data(), 1, static_cast<Index>(values.size()));
  rec.sampling_rate = kBonnSamplingRate;
  rec.channel_names = {"eeg"};
  rec.source_id = path.filename().string();
  return rec;
}

std::vector<TimeSeriesRecording> read_bonn(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  require(!files.empty(), ErrorCode::kIo, "no Bonn segments in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<TimeSeriesRecording> out;
  for (const auto& f : files) out.push_back(read_bonn_file(f));
  return out;
}

// ---- EDF

double EdfSignalHeader::lsb() const {
  return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
}

long long EdfHeader::record_bytes() const {
  long long n = 0;
  for (const auto& s : signals) n += 2 * s.samples_per_record;
  return n;
}

namespace {

void put_field(std::ostream& out, const std::string& value, std::size_t width, const char* name) {
  require(value.size() <= width, ErrorCode::kInvalidArgument,
          std::string("EDF field ") + name + " '" + value + "' exceeds " + std::to_string(width) + " characters");
  for (char ch : value) {
    require(ch >= 32 && ch <= 126, ErrorCode::kInvalidArgument,
            std::string("EDF field ") + name + " must be printable ASCII");
  }
  out << value << std::string(width - value.size(), ' ');
}

// Shortest text of at most `width` characters, preferring round-trip precision.
std::string edf_number(double v, std::size_t width) {
  std::string s = format_double(v);
  for (int precision = 15; s.size() > width && precision >= 1; --precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    s = buf;
  }
  return s;
}

double edf_rounded(double v) {
  double out = 0.0;
  parse_double(edf_number(v, 8), out);
  return out;
}

class FieldReader {
 public:
  explicit FieldReader(std::string block) : block_(std::move(block)) {}

  std::string text(std::size_t width) {
    const std::string raw = block_.substr(pos_, width);
    pos_ += width;
    std::size_t end = raw.find_last_not_of(' ');
    return end == std::string::npos ? std::string() : raw.substr(0, end + 1);
  }

  long long integer(std::size_t width, const char* name) {
    const std::string t = text(width);
    long long v = 0;
    require(parse_int64(trim(t), v), ErrorCode::kEdfHeaderMismatch,
            std::string("EDF header field ") + name + " is not an integer: '" + t + "'");
    return v;
  }

  double number(std::size_t width, const char* name) {
    const std::string t = text(width);
    double v = 0.0;
    require(parse_double(trim(t), v) && std::isfinite(v), ErrorCode::kEdfHeaderMismatch,
            std::string("EDF header field ") + name + " is not a number: '" + t + "'");
    return v;
  }

 private:
  std::string block_;
  std::size_t pos_ = 0;
};

std::string read_block(std::istream& in, std::size_t n, const char* what) {
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  require(in.gcount() == static_cast<std::streamsize>(n), ErrorCode::kEdfTruncated,
          std::string("EDF file truncated in ") + what);
  return buf;
}

void check_signal(const EdfSignalHeader& s, std::size_t index) {
  const std::string where = "EDF signal " + std::to_string(index) + " ('" + s.label + "')";
  require(s.label != "EDF Annotations", ErrorCode::kEdfUnsupported,
          "EDF+ annotation signals are not supported");
  require(s.digital_max > s.digital_min, ErrorCode::kEdfHeaderMismatch, where + ": digital max <= digital min");
  require(s.digital_min >= -32768 && s.digital_max <= 32767, ErrorCode::kEdfHeaderMismatch,
          where + ": digital range exceeds 16 bits");
  require(s.physical_max != s.physical_min, ErrorCode::kEdfHeaderMismatch, where + ": physical max == physical min");
  require(s.samples_per_record > 0, ErrorCode::kEdfHeaderMismatch, where + ": samples per record must be positive");
}

void check_header(const EdfHeader& h) {
  require(h.version == "0", ErrorCode::kEdfUnsupported, "unsupported EDF version '" + h.version + "'");
  require(h.reserved.rfind("EDF+D", 0) != 0, ErrorCode::kEdfUnsupported,
          "discontinuous EDF+D recordings are not supported");
  require(h.record_count != -1, ErrorCode::kEdfUnsupported, "EDF record count -1 (unknown length) is not supported");
  require(h.record_count > 0, ErrorCode::kEdfHeaderMismatch,
          "EDF record count must be positive, got " + std::to_string(h.record_count));
  require(h.record_duration > 0.0, ErrorCode::kEdfHeaderMismatch, "EDF record duration must be positive");
  require(!h.signals.empty(), ErrorCode::kEdfHeaderMismatch, "EDF file declares no signals");
  require(h.header_bytes == h.expected_header_bytes(), ErrorCode::kEdfHeaderMismatch,
          "EDF header byte count " + std::to_string(h.header_bytes) + " != 256 + 256 x " +
              std::to_string(h.signals.size()));
  for (std::size_t i = 0; i < h.signals.size(); ++i) check_signal(h.signals[i], i);
}

}  // namespace

void write_edf_header(std::ostream& out, const EdfHeader& h) {
  check_header(h);
  put_field(out, h.version, 8, "version");
  put_field(out, h.patient_id, 80, "patient id");
  put_field(out, h.recording_id, 80, "recording id");
  put_field(out, h.start_date, 8, "start date");
  put_field(out, h.start_time, 8, "start time");
  put_field(out, std::to_string(h.header_bytes), 8, "header bytes");
  put_field(out, h.reserved, 44, "reserved");
  put_field(out, std::to_string(h.record_count), 8, "record count");
  put_field(out, edf_number(h.record_duration, 8), 8, "record duration");
  put_field(out, std::to_string(h.signals.size()), 4, "signal count");
  const auto each = [&](auto&& field) {
    for (const auto& s : h.signals) field(s);
  };
  each([&](const auto& s) { put_field(out, s.label, 16, "label"); });
  each([&](const auto& s) { put_field(out, s.transducer, 80, "transducer"); });
  each([&](const auto& s) { put_field(out, s.physical_dimension, 8, "physical dimension"); });
  each([&](const auto& s) { put_field(out, edf_number(s.physical_min, 8), 8, "physical min"); });
  each([&](const auto& s) { put_field(out, edf_number(s.physical_max, 8), 8, "physical max"); });
  each([&](const auto& s) { put_field(out, std::to_string(s.digital_min), 8, "digital min"); });
  each([&](const auto& s) { put_field(out, std::to_string(s.digital_max), 8, "digital max"); });
  each([&](const auto& s) { put_field(out, s.prefiltering, 80, "prefiltering"); });
  each([&](const auto& s) { put_field(out, std::to_string(s.samples_per_record), 8, "samples per record"); });
  each([&](const auto& s) { put_field(out, s.reserved, 32, "signal reserved"); });
}

EdfHeader read_edf_header(std::istream& in) {
  FieldReader f(read_block(in, 256, "the fixed header"));
  EdfHeader h;
  h.version = f.text(8);
  h.patient_id = f.text(80);
  h.recording_id = f.text(80);
  h.start_date = f.text(8);
  h.start_time = f.text(8);
  h.header_bytes = f.integer(8, "header bytes");
  h.reserved = f.text(44);
  h.record_count = f.integer(8, "record count");
  h.record_duration = f.number(8, "record duration");
  const long long ns = f.integer(4, "signal count");
  require(ns > 0 && ns <= 9999, ErrorCode::kEdfHeaderMismatch, "EDF signal count out of range");
  h.signals.resize(static_cast<std::size_t>(ns));

  FieldReader g(read_block(in, 256 * static_cast<std::size_t>(ns), "the signal headers"));
  for (auto& s : h.signals) s.label = g.text(16);
  for (auto& s : h.signals) s.transducer = g.text(80);
  for (auto& s : h.signals) s.physical_dimension = g.text(8);
  for (auto& s : h.signals) s.physical_min = g.number(8, "physical min");
  for (auto& s : h.signals) s.physical_max = g.number(8, "physical max");
  for (auto& s : h.signals) s.digital_min = g.integer(8, "digital min");
  for (auto& s : h.signals) s.digital_max = g.integer(8, "digital max");
  for (auto& s : h.signals) s.prefiltering = g.text(80);
  for (auto& s : h.signals) s.samples_per_record = g.integer(8, "samples per record");
  for (auto& s : h.signals) s.reserved = g.text(32);
  check_header(h);
  return h;
}

EdfHeader read_edf_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open EDF file " + path.string());
  EdfHeader h = read_edf_header(in);
  const auto size = static_cast<long long>(fs::file_size(path));
  const long long expected = h.header_bytes + h.record_count * h.record_bytes();
  require(size >= expected, ErrorCode::kEdfTruncated,
          path.string() + ": EDF file truncated (" + std::to_string(size) + " of " + std::to_string(expected) +
              " bytes)");
  require(size == expected, ErrorCode::kEdfHeaderMismatch,
          path.string() + ": file size " + std::to_string(size) + " does not match the header (" +
              std::to_string(expected) + " bytes)");
  return h;
}

EdfData read_edf_data(const fs::path& path, const std::vector<std::string>& channels) {
  EdfData data;
  data.header = read_edf_header(path);
  const EdfHeader& h = data.header;

  std::vector<std::size_t> picked;
  if (channels.empty()) {
    for (std::size_t i = 0; i < h.signals.size(); ++i) picked.push_back(i);
  } else {
    for (const auto& name : channels) {
      const auto it = std::find_if(h.signals.begin(), h.signals.end(),
                                   [&](const auto& s) { return trim(s.label) == trim(name); });
      if (it == h.signals.end()) {
        std::string available;
        for (const auto& s : h.signals) available += (available.empty() ? "" : ", ") + s.label;
        fail(ErrorCode::kConfig, path.string() + ": no EDF signal labelled '" + name + "' (have " + available + ")");
      }
      picked.push_back(static_cast<std::size_t>(it - h.signals.begin()));
    }
  }
  const long long spr = h.signals[picked.front()].samples_per_record;
  for (std::size_t i : picked) {
    require(h.signals[i].samples_per_record == spr, ErrorCode::kEdfUnsupported,
            path.string() + ": selected EDF signals have different sample rates");
  }

  std::vector<long long> offset(h.signals.size(), 0);
  for (std::size_t i = 1; i < h.signals.size(); ++i) {
    offset[i] = offset[i - 1] + 2 * h.signals[i - 1].samples_per_record;
  }

  TimeSeriesRecording& rec = data.recording;
  rec.sampling_rate = static_cast<double>(spr) / h.record_duration;
  rec.source_id = path.stem().string();
  for (std::size_t i : picked) rec.channel_names.push_back(h.signals[i].label);
  rec.samples.resize(static_cast<Index>(picked.size()), static_cast<Index>(h.record_count * spr));

  std::ifstream in(path, std::ios::binary);
  in.seekg(h.header_bytes);
  const auto bytes = static_cast<std::size_t>(h.record_bytes());
  for (long long r = 0; r < h.record_count; ++r) {
    const std::string block = read_block(in, bytes, "the data records");
    for (std::size_t c = 0; c < picked.size(); ++c) {
      const auto& s = h.signals[picked[c]];
      const double scale = (s.physical_max - s.physical_min) / static_cast<double>(s.digital_max - s.digital_min);
      const char* p = block.data() + offset[picked[c]];
      for (long long k = 0; k < spr; ++k) {
        const auto lo = static_cast<std::uint8_t>(p[2 * k]);
        const auto hi = static_cast<std::uint8_t>(p[2 * k + 1]);
        const auto d = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        rec.samples(static_cast<Index>(c), static_cast<Index>(r * spr + k)) =
            static_cast<double>(d - s.digital_min) * scale + s.physical_min;
      }
    }
  }
  return data;
}

TimeSeriesRecording read_edf(const fs::path& path, const std::vector<std::string>& channels) {
  return read_edf_data(path, channels).recording;
}

EdfHeader make_edf_header(const TimeSeriesRecording& rec, const EdfWriteOptions& options) {
  rec.validate();
  require(options.record_duration > 0.0, ErrorCode::kInvalidArgument, "EDF record duration must be positive");
  require(options.physical_limit >= 0.0, ErrorCode::kInvalidArgument, "EDF physical limit must be >= 0");
  EdfHeader h;
  h.patient_id = options.patient_id;
  h.recording_id = options.recording_id;
  h.record_duration = edf_rounded(options.record_duration);
  const double exact = rec.sampling_rate * h.record_duration;
  const long long spr = std::llround(exact);
  require(spr >= 1 && std::abs(exact - static_cast<double>(spr)) < 1e-6, ErrorCode::kInvalidArgument,
          "EDF record of " + format_double(h.record_duration) + " s holds a non-integer number of samples at " +
              format_double(rec.sampling_rate) + " Hz");
  require(rec.sample_count() % spr == 0, ErrorCode::kInvalidArgument,
          "EDF sample count " + std::to_string(rec.sample_count()) + " is not a multiple of the record length " +
              std::to_string(spr));
  h.record_count = rec.sample_count() / spr;
  for (Index c = 0; c < rec.channel_count(); ++c) {
    EdfSignalHeader s;
    s.label = c < static_cast<Index>(rec.channel_names.size()) ? rec.channel_names[static_cast<std::size_t>(c)]
                                                               : "ch" + std::to_string(c);
    s.physical_dimension = options.physical_dimension;
    double limit = options.physical_limit;
    if (limit == 0.0) {
      const double m = rec.samples.row(c).cwiseAbs().maxCoeff();
      // Three significant digits, rounded up.
      const double step = m > 0.0 ? std::pow(10.0, std::floor(std::log10(m)) - 2.0) : 1.0;
      limit = m > 0.0 ? std::ceil(m / step) * step : 1.0;
      if (edf_rounded(limit) < m) limit += step;
    }
    s.physical_max = edf_rounded(limit);
    s.physical_min = -s.physical_max;
    s.samples_per_record = spr;
    h.signals.push_back(s);
  }
  h.header_bytes = h.expected_header_bytes();
  return h;
}

void write_edf(const TimeSeriesRecording& rec, const EdfHeader& h, std::ostream& out) {
  rec.validate();
  require(static_cast<Index>(h.signals.size()) == rec.channel_count(), ErrorCode::kInvalidArgument,
          "EDF header signal count does not match the recording");
  const long long spr = h.signals.front().samples_per_record;
  for (const auto& s : h.signals) {
    require(s.samples_per_record == spr, ErrorCode::kInvalidArgument, "write_edf needs one sample rate");
  }
  require(h.record_count * spr == rec.sample_count(), ErrorCode::kInvalidArgument,
          "EDF header length does not match the recording");
  for (std::size_t c = 0; c < h.signals.size(); ++c) {
    const auto& s = h.signals[c];
    const double lo = std::min(s.physical_min, s.physical_max);
    const double hi = std::max(s.physical_min, s.physical_max);
    const double slack = 1e-9 * (hi - lo);
    const auto row = rec.samples.row(static_cast<Index>(c));
    require(row.minCoeff() >= lo - slack && row.maxCoeff() <= hi + slack, ErrorCode::kInvalidArgument,
            "channel '" + s.label + "' has values outside the physical range [" + format_double(lo) + ", " +
                format_double(hi) + "]");
  }
  write_edf_header(out, h);
  std::string block(static_cast<std::size_t>(h.record_bytes()), '\0');
  for (long long r = 0; r < h.record_count; ++r) {
    std::size_t pos = 0;
    for (std::size_t c = 0; c < h.signals.size(); ++c) {
      const auto& s = h.signals[c];
      const double lsb = s.lsb();
      for (long long k = 0; k < spr; ++k) {
        const double x = rec.samples(static_cast<Index>(c), static_cast<Index>(r * spr + k));
        long long d = std::llround((x - s.physical_min) / lsb) + s.digital_min;
        d = std::clamp(d, s.digital_min, s.digital_max);
        const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(d));
        block[pos++] = static_cast<char>(u & 0xff);
        block[pos++] = static_cast<char>(u >> 8);
      }
    }
    out.write(block.data(), static_cast<std::streamsize>(block.size()));
  }
}

void write_edf(const TimeSeriesRecording& rec, const fs::path& path, const EdfWriteOptions& options) {
  const EdfHeader h = make_edf_header(rec, options);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIo, "cannot write EDF file " + path.string());
  write_edf(rec, h, out);
  require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

// ---- annotations

std::vector<SeizureAnnotation> read_annotations(std::istream& in) {
  struct Row {
    SeizureInterval iv;
    Index row;
  };
  std::vector<std::string> order;
  std::vector<std::vector<Row>> rows;
  std::string line;
  Index row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (row == 1 && !f.empty() && f.front() == "track_id") continue;
    const std::string where = "annotations row " + std::to_string(row);
    require(f.size() == 3, ErrorCode::kFormat, where + ": expected track_id,start_s,end_s");
    require(!f[0].empty(), ErrorCode::kFormat, where + ": empty track id");
    Row r{{}, row};
    require(parse_double(f[1], r.iv.start_s) && parse_double(f[2], r.iv.end_s) && std::isfinite(r.iv.start_s) &&
                std::isfinite(r.iv.end_s),
            ErrorCode::kFormat, where + ": bad interval bounds");
    require(r.iv.start_s >= 0.0, ErrorCode::kFormat, where + ": start must be >= 0");
    require(r.iv.end_s > r.iv.start_s, ErrorCode::kFormat, where + ": end must exceed start");
    auto it = std::find(order.begin(), order.end(), f[0]);
    if (it == order.end()) {
      order.push_back(f[0]);
      rows.emplace_back();
      it = order.end() - 1;
    }
    rows[static_cast<std::size_t>(it - order.begin())].push_back(r);
  }
  std::vector<SeizureAnnotation> out;
  for (std::size_t t = 0; t < order.size(); ++t) {
    auto& rs = rows[t];
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.iv.start_s < b.iv.start_s; });
    SeizureAnnotation a{order[t], {}};
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (i > 0) {
        require(rs[i].iv.start_s >= rs[i - 1].iv.end_s, ErrorCode::kFormat,
                "annotations rows " + std::to_string(rs[i - 1].row) + " and " + std::to_string(rs[i].row) +
                    " overlap on track " + order[t]);
      }
      a.intervals.push_back(rs[i].iv);
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<SeizureAnnotation> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open annotations " + path.string());
  return read_annotations(in);
}

void write_annotations(std::ostream& out, const std::vector<SeizureAnnotation>& annotations) {
  out << "track_id,start_s,end_s\n";
  for (const auto& a : annotations) {
    for (const auto& iv : a.intervals) {
      out << a.track_id << ',' << format_double(iv.start_s) << ',' << format_double(iv.end_s) << '\n';
    }
  }
}

const SeizureAnnotation* find_track(const std::vector<SeizureAnnotation>& annotations, const std::string& track_id) {
  for (const auto& a : annotations) {
    if (a.track_id == track_id) return &a;
  }
  return nullptr;
}

void annotate_windows(WindowSet& set, const std::vector<SeizureInterval>& intervals, const PhaseHorizons& horizons) {
  const Index n = set.count();
  require(static_cast<Index>(set.start_times.size()) == n, ErrorCode::kInvalidArgument,
          "annotate_windows needs start times");
  const double span = static_cast<double>(set.length()) / set.sampling_rate;
  Index seconds = 0;
  for (double t : set.start_times) seconds = std::max(seconds, static_cast<Index>(std::floor(t + span / 2)) + 1);
  const auto tags = tag_phases(seconds, intervals, horizons);
  set.labels.assign(static_cast<std::size_t>(n), WindowLabel::kNonSeizure);
  set.phases.assign(static_cast<std::size_t>(n), Phase::kInterictal);
  for (Index w = 0; w < n; ++w) {
    const double t0 = set.start_times[static_cast<std::size_t>(w)];
    const double t1 = t0 + span;
    double inside = 0.0;
    for (const auto& iv : intervals) inside += std::max(0.0, std::min(t1, iv.end_s) - std::max(t0, iv.start_s));
    if (2.0 * inside >= span) set.labels[static_cast<std::size_t>(w)] = WindowLabel::kSeizure;
    set.phases[static_cast<std::size_t>(w)] = tags[static_cast<std::size_t>(std::floor(t0 + span / 2))];
  }
}

// ---- synthetic data

void SynthSpec::validate() const {
  const double nyquist = sampling_rate / 2.0;
  require(duration_s > 0.0 && std::isfinite(duration_s), ErrorCode::kConfig, "synth duration must be positive");
  require(sampling_rate > 0.0, ErrorCode::kConfig, "synth sampling rate must be positive");
  require(channels >= 1 && tracks >= 1, ErrorCode::kConfig, "synth needs at least one channel and one track");
  for (const auto& b : noise) {
    require(b.low_hz >= 0.0 && b.high_hz > b.low_hz && b.high_hz < nyquist && b.rms >= 0.0, ErrorCode::kConfig,
            "synth noise band must satisfy 0 <= low < high < Nyquist");
  }
  for (const auto& t : tones) {
    require(t.frequency_hz >= 0.0 && t.frequency_hz < nyquist && t.linewidth_hz >= 0.0, ErrorCode::kConfig,
            "synth tone frequency must lie below Nyquist with linewidth >= 0");
  }
  const bool any = bursts.count > 0 || !bursts.intervals.empty();
  if (!any) return;
  require(bursts.gain > 1.0, ErrorCode::kConfig, "synth burst gain must exceed 1");
  require(bursts.low_hz > 0.0 && bursts.high_hz > bursts.low_hz && bursts.high_hz < nyquist, ErrorCode::kConfig,
          "synth burst band must satisfy 0 < low < high < Nyquist");
  if (bursts.intervals.empty()) {
    require(bursts.count >= 0 && bursts.duration_s > 0.0, ErrorCode::kConfig, "synth burst duration must be positive");
    require(static_cast<double>(bursts.count) * (bursts.duration_s + 1.0) <= duration_s, ErrorCode::kConfig,
            "synth bursts do not fit in the recording");
  }
  for (std::size_t i = 0; i < bursts.intervals.size(); ++i) {
    const auto& iv = bursts.intervals[i];
    require(iv.start_s >= 0.0 && iv.end_s > iv.start_s && iv.end_s <= duration_s, ErrorCode::kConfig,
            "synth burst interval outside the recording");
    require(i == 0 || iv.start_s >= bursts.intervals[i - 1].end_s, ErrorCode::kConfig,
            "synth burst intervals must be sorted and disjoint");
  }
}

namespace {

Eigen::VectorXd band_noise(Rng& rng, Index n, double low, double high, double fs) {
  Eigen::VectorXd white(n);
  for (Index i = 0; i < n; ++i) white[i] = rng.normal();
  const FilterSpec spec = low > 0.0 ? FilterSpec::bandpass(low, high) : FilterSpec::lowpass(high);
  Eigen::VectorXd x = filtfilt(design_fir(spec, fs), white);
  const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(n));
  return rms > 0.0 ? Eigen::VectorXd(x / rms) : x;
}

}  // namespace

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  const double fs = spec.sampling_rate;
  const Index n = static_cast<Index>(std::llround(spec.duration_s * fs));
  SynthDataset out;
  for (Index t = 0; t < spec.tracks; ++t) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(t)));
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03lld", static_cast<long long>(t));

    std::vector<SeizureInterval> intervals = spec.bursts.intervals;
    if (intervals.empty() && spec.bursts.count > 0) {
      const double slot = spec.duration_s / static_cast<double>(spec.bursts.count);
      for (Index k = 0; k < spec.bursts.count; ++k) {
        const double lo = static_cast<double>(k) * slot;
        const double start = std::ceil(rng.uniform(lo, lo + slot - spec.bursts.duration_s - 1.0));
        intervals.push_back({start, start + spec.bursts.duration_s});
      }
    }

    TimeSeriesRecording rec;
    rec.sampling_rate = fs;
    rec.source_id = id;
    rec.samples = RowMajorMatrix::Zero(spec.channels, n);
    for (Index c = 0; c < spec.channels; ++c) {
      rec.channel_names.push_back("ch" + std::to_string(c));
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (const auto& b : spec.noise) x += b.rms * band_noise(rng, n, b.low_hz, b.high_hz, fs);
      for (const auto& tone : spec.tones) {
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double step = 2.0 * std::numbers::pi * tone.frequency_hz / fs;
        const double jitter = std::sqrt(2.0 * std::numbers::pi * tone.linewidth_hz / fs);
        for (Index i = 0; i < n; ++i) {
          x[i] += tone.amplitude * std::sin(phase);
          phase += step + (jitter > 0.0 ? jitter * rng.normal() : 0.0);
        }
      }
      const double bg_rms = std::sqrt(x.squaredNorm() / static_cast<double>(n));
      for (const auto& iv : intervals) {
        const Index a = std::min<Index>(n, std::llround(iv.start_s * fs));
        const Index b = std::min<Index>(n, std::llround(iv.end_s * fs));
        if (b <= a) continue;
        x.segment(a, b - a) =
            spec.bursts.gain * bg_rms * band_noise(rng, b - a, spec.bursts.low_hz, spec.bursts.high_hz, fs);
      }
      rec.samples.row(c) = x.transpose();
    }
    out.recordings.push_back(std::move(rec));
    out.annotations.push_back({id, intervals});
  }
  return out;
}

}  // namespace sincvae
