#include "sincvae/ingest.hpp"
#include "sincvae/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace sincvae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sincvae_ingest_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); }

// Hand-built EDF: one signal "EEG", one record of 4 samples.
std::string edf_fixture(const std::string& records = "1", const std::string& pmin = "-100",
                        const std::string& pmax = "100", const std::string& reserved = "") {
  std::string h;
  h += pad("0", 8) + pad("patient", 80) + pad("recording", 80) + pad("01.02.03", 8) + pad("04.05.06", 8);
  h += pad("512", 8) + pad(reserved, 44) + pad(records, 8) + pad("1", 8) + pad("1", 4);
  h += pad("EEG", 16) + pad("", 80) + pad("uV", 8) + pad(pmin, 8) + pad(pmax, 8);
  h += pad("-2048", 8) + pad("2047", 8) + pad("", 80) + pad("4", 8) + pad("", 32);
  for (int d : {-2048, 0, 1, 2047}) {
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(d));
    h += static_cast<char>(u & 0xff);
    h += static_cast<char>(u >> 8);
  }
  return h;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kState;
}

}  // namespace

TEST_CASE("read_bonn") {
  TempDir dir("bonn");
  write_text(dir.path / "Z002.txt", "4\n-5\n6\n");
  write_text(dir.path / "Z001.txt", "1\n2\n3\n");
  const auto recs = read_bonn(dir.path);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].source_id == "Z001.txt");
  CHECK(recs[0].sampling_rate == 173.61);
  CHECK(recs[0].sample_count() == 3);
  CHECK(recs[0].samples(0, 2) == 3.0);
  CHECK(recs[1].samples(0, 1) == -5.0);

  write_text(dir.path / "bad.txt", "1\nx2\n");
  try {
    read_bonn_file(dir.path / "bad.txt");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.txt:2") != std::string::npos);
    CHECK(e.code() == ErrorCode::kFormat);
  }
  write_text(dir.path / "empty.txt", "");
  CHECK_THROWS_AS(read_bonn_file(dir.path / "empty.txt"), Error);
  CHECK(code_of([&] { read_bonn(dir.path / "missing"); }) == ErrorCode::kIo);
}

TEST_CASE("read_edf decodes a hand-built file") {
  TempDir dir("edf_fixture");
  const auto p = dir.path / "x.edf";
  write_text(p, edf_fixture());
  const EdfData d = read_edf_data(p);
  CHECK(d.header.header_bytes == 512);
  CHECK(d.header.start_time == "04.05.06");
  CHECK(d.header.patient_id == "patient");
  CHECK(d.recording.sampling_rate == 4.0);
  CHECK(d.recording.channel_names == std::vector<std::string>{"EEG"});
  REQUIRE(d.recording.sample_count() == 4);
  // (d - dmin) * 200 / 4095 - 100
  const double scale = 200.0 / 4095.0;
  CHECK(d.recording.samples(0, 0) == -100.0);
  CHECK(d.recording.samples(0, 1) == doctest::Approx(2048 * scale - 100.0).epsilon(1e-14));
  CHECK(d.recording.samples(0, 2) == doctest::Approx(2049 * scale - 100.0).epsilon(1e-14));
  CHECK(d.recording.samples(0, 3) == doctest::Approx(100.0).epsilon(1e-14));

  write_text(p, edf_fixture("1", "-2048", "2047"));
  const auto identity = read_edf(p);
  CHECK(identity.samples(0, 0) == -2048.0);
  CHECK(identity.samples(0, 1) == 0.0);
  CHECK(identity.samples(0, 2) == 1.0);
  CHECK(identity.samples(0, 3) == 2047.0);

  std::ostringstream again;
  write_edf_header(again, read_edf_header(p));
  CHECK(again.str() == edf_fixture("1", "-2048", "2047").substr(0, 512));
}

TEST_CASE("read_edf errors are distinct") {
  TempDir dir("edf_errors");
  const auto p = dir.path / "x.edf";
  const auto load = [&](const std::string& bytes) {
    write_text(p, bytes);
    return code_of([&] { read_edf(p); });
  };
  const std::string good = edf_fixture();
  CHECK(load(good.substr(0, 300)) == ErrorCode::kEdfTruncated);
  CHECK(load(good.substr(0, 100)) == ErrorCode::kEdfTruncated);
  CHECK(load(good.substr(0, good.size() - 1)) == ErrorCode::kEdfTruncated);
  CHECK(load(good + "xx") == ErrorCode::kEdfHeaderMismatch);
  CHECK(load(edf_fixture("0")) == ErrorCode::kEdfHeaderMismatch);
  CHECK(load(edf_fixture("-1")) == ErrorCode::kEdfUnsupported);
  CHECK(load(edf_fixture("1", "5", "5")) == ErrorCode::kEdfHeaderMismatch);
  CHECK(load(edf_fixture("1", "-100", "100", "EDF+D")) == ErrorCode::kEdfUnsupported);
  std::string wrong_bytes = good;
  wrong_bytes.replace(184, 8, pad("768", 8));
  CHECK(load(wrong_bytes) == ErrorCode::kEdfHeaderMismatch);
  std::string annotation = good;
  annotation.replace(256, 16, pad("EDF Annotations", 16));
  CHECK(load(annotation) == ErrorCode::kEdfUnsupported);

  write_text(p, good);
  CHECK(code_of([&] { read_edf(p, {"ECG"}); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { read_edf(dir.path / "none.edf"); }) == ErrorCode::kIo);
}

TEST_CASE("EDF round trip") {
  TempDir dir("edf_roundtrip");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    TimeSeriesRecording rec;
    rec.sampling_rate = 256.0;
    rec.source_id = "fixture";
    const Index n = 256 * 3;
    rec.samples.resize(3, n);
    for (Index c = 0; c < 3; ++c) {
      rec.channel_names.push_back("C" + std::to_string(c));
      const double amp = rng.uniform(1.0, 500.0);
      const double f = rng.uniform(1.0, 40.0);
      for (Index i = 0; i < n; ++i) {
        rec.samples(c, i) = amp * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / 256.0) +
                            0.1 * amp * rng.normal();
      }
    }
    const auto p = dir.path / ("r" + std::to_string(seed) + ".edf");
    write_edf(rec, p);
    const EdfData back = read_edf_data(p);
    CHECK(fs::file_size(p) == static_cast<std::uintmax_t>(256 + 256 * 3 + 3 * n * 2));
    CHECK(back.header.header_bytes == 256 + 256 * 3);
    CHECK(back.recording.sampling_rate == 256.0);
    CHECK(back.recording.channel_names == rec.channel_names);
    for (Index c = 0; c < 3; ++c) {
      const double lsb = back.header.signals[static_cast<std::size_t>(c)].lsb();
      const double err = (back.recording.samples.row(c) - rec.samples.row(c)).cwiseAbs().maxCoeff();
      CHECK(err <= 0.5 * lsb * (1 + 1e-9));
      const Eigen::VectorXd a = rec.samples.row(c).transpose().array() - rec.samples.row(c).mean();
      const Eigen::VectorXd b = back.recording.samples.row(c).transpose().array() - back.recording.samples.row(c).mean();
      CHECK(a.dot(b) / (a.norm() * b.norm()) > 0.9999);
    }
    // decode -> encode -> decode is a fixed point, headers byte-identical
    std::ostringstream rewritten;
    write_edf(back.recording, back.header, rewritten);
    CHECK(rewritten.str() == read_bytes(p));

    const auto picked = read_edf(p, {"C2", "C0"});
    CHECK(picked.channel_names == std::vector<std::string>{"C2", "C0"});
    CHECK(picked.samples.row(0) == back.recording.samples.row(2));
  }
}

TEST_CASE("write_edf input checks") {
  TimeSeriesRecording rec;
  rec.sampling_rate = 4.0;
  rec.samples = RowMajorMatrix::Constant(1, 8, 3.0);
  rec.channel_names = {"A"};
  EdfHeader h = make_edf_header(rec);
  CHECK(h.signals[0].physical_max == 3.0);
  CHECK(h.record_count == 2);
  rec.samples(0, 5) = 4.0;
  std::ostringstream out;
  CHECK(code_of([&] { write_edf(rec, h, out); }) == ErrorCode::kInvalidArgument);
  rec.samples = RowMajorMatrix::Constant(1, 7, 3.0);
  CHECK(code_of([&] { make_edf_header(rec); }) == ErrorCode::kInvalidArgument);
  rec.sampling_rate = 173.61;
  CHECK(code_of([&] { make_edf_header(rec); }) == ErrorCode::kInvalidArgument);

  rec.sampling_rate = 1.0;
  rec.samples = RowMajorMatrix::Constant(1, 2, 0.123456789);
  h = make_edf_header(rec);
  CHECK(h.signals[0].physical_max >= 0.123456789);
  CHECK(h.signals[0].physical_max == 0.124);
}

TEST_CASE("read_annotations") {
  std::istringstream one("t19,5299,5361\n");
  const auto a = read_annotations(one);
  REQUIRE(a.size() == 1);
  CHECK(a[0].track_id == "t19");
  REQUIRE(a[0].intervals.size() == 1);
  CHECK(a[0].intervals[0].start_s == 5299.0);
  CHECK(a[0].intervals[0].end_s == 5361.0);

  std::istringstream empty("");
  CHECK(read_annotations(empty).empty());

  std::istringstream unordered("track_id,start_s,end_s\nb,50,60\na,1,2\nb,10,20\n");
  const auto u = read_annotations(unordered);
  REQUIRE(u.size() == 2);
  CHECK(u[0].track_id == "b");
  CHECK(u[0].intervals[0].start_s == 10.0);
  CHECK(u[0].intervals[1].start_s == 50.0);
  CHECK(find_track(u, "a")->intervals.size() == 1);
  CHECK(find_track(u, "c") == nullptr);

  std::ostringstream out;
  write_annotations(out, u);
  std::istringstream back(out.str());
  CHECK(read_annotations(back)[0].intervals[1].end_s == 60.0);

  std::istringstream reversed("a,5,5\n");
  try {
    read_annotations(reversed);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  std::istringstream overlap("a,0,10\na,20,30\na,5,12\n");
  try {
    read_annotations(overlap);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("rows 1 and 3") != std::string::npos);
  }
  std::istringstream short_row("a,1\n");
  CHECK_THROWS_AS(read_annotations(short_row), Error);
}

TEST_CASE("annotate_windows") {
  TimeSeriesRecording rec;
  rec.sampling_rate = 4.0;
  rec.samples = RowMajorMatrix::Zero(1, 40);
  rec.source_id = "t";
  WindowSet set = segment_windows(rec, 1.0);
  annotate_windows(set, {{3.5, 6.0}}, {2.0, 1.0});
  // seconds 0..9; window 3 is half inside
  const std::vector<WindowLabel> want_labels = {
      WindowLabel::kNonSeizure, WindowLabel::kNonSeizure, WindowLabel::kNonSeizure, WindowLabel::kSeizure,
      WindowLabel::kSeizure,    WindowLabel::kSeizure,    WindowLabel::kNonSeizure, WindowLabel::kNonSeizure,
      WindowLabel::kNonSeizure, WindowLabel::kNonSeizure};
  CHECK(set.labels == want_labels);
  CHECK(set.phases[1] == Phase::kInterictal);
  CHECK(set.phases[2] == Phase::kPreictal);
  CHECK(set.phases[4] == Phase::kIctal);
  CHECK(set.phases[6] == Phase::kPostictal);
  CHECK(set.phases[7] == Phase::kInterictal);
}

TEST_CASE("synth_generate") {
  SynthSpec spec;
  spec.duration_s = 300;
  spec.channels = 2;
  spec.tracks = 2;
  spec.bursts.count = 4;
  spec.bursts.duration_s = 6;
  spec.bursts.gain = 3;
  spec.seed = 42;
  const auto a = synth_generate(spec);
  const auto b = synth_generate(spec);
  REQUIRE(a.recordings.size() == 2);
  CHECK(a.recordings[0].samples == b.recordings[0].samples);
  CHECK(a.recordings[1].samples != a.recordings[0].samples);
  CHECK(a.recordings[0].source_id == "synth_000");
  CHECK(a.annotations[1].track_id == "synth_001");

  for (std::size_t t = 0; t < 2; ++t) {
    const auto& rec = a.recordings[t];
    const auto& iv = a.annotations[t].intervals;
    REQUIRE(iv.size() == 4);
    CHECK(rec.sample_count() == 300 * 128);
    CHECK(rec.samples.allFinite());
    for (std::size_t k = 0; k < iv.size(); ++k) {
      CHECK(iv[k].start_s == std::floor(iv[k].start_s));
      CHECK(iv[k].end_s - iv[k].start_s == 6.0);
      CHECK(iv[k].end_s <= 300.0);
      if (k > 0) CHECK(iv[k].start_s >= iv[k - 1].end_s);
    }
    for (Index c = 0; c < rec.channel_count(); ++c) {
      double in_sq = 0, out_sq = 0;
      Index in_n = 0, out_n = 0;
      for (Index i = 0; i < rec.sample_count(); ++i) {
        const double s = static_cast<double>(i) / 128.0;
        const bool inside = std::any_of(iv.begin(), iv.end(), [&](const auto& x) { return s >= x.start_s && s < x.end_s; });
        (inside ? in_sq : out_sq) += rec.samples(c, i) * rec.samples(c, i);
        ++(inside ? in_n : out_n);
      }
      const double ratio = std::sqrt(in_sq / in_n) / std::sqrt(out_sq / out_n);
      CHECK(ratio >= 0.9 * spec.bursts.gain);
    }
  }

  SynthSpec fixed = spec;
  fixed.bursts.intervals = {{10, 20}, {100, 104}};
  CHECK(synth_generate(fixed).annotations[0].intervals.size() == 2);
  CHECK(synth_generate(fixed).annotations[0].intervals[1].end_s == 104.0);

  SynthSpec bad = spec;
  bad.bursts.gain = 1.0;
  CHECK_THROWS_AS(synth_generate(bad), Error);
  bad = spec;
  bad.bursts.count = 60;
  CHECK_THROWS_AS(synth_generate(bad), Error);
  bad = spec;
  bad.noise = {{0, 70, 1}};
  CHECK_THROWS_AS(synth_generate(bad), Error);
}
