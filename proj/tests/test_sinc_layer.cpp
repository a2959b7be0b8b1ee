#include "gradcheck.hpp"
#include "spectral.hpp"
#include "sincvae/sinc_layer.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace sincvae;
using namespace sincvae::testing;

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("effective cutoffs") {
  CHECK(effective_cutoffs(100.0, 200.0) == std::pair{100.0, 200.0});
  CHECK(effective_cutoffs(60.0, 60.0) == std::pair{60.0, 60.0});
  CHECK(effective_cutoffs(-50.0, 30.0) == std::pair{50.0, 130.0});
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto [lo, hi] = effective_cutoffs(rng.uniform(-500, 500), rng.uniform(-500, 500));
    CHECK(lo >= 0.0);
    CHECK(lo <= hi);
  }
}

TEST_CASE("hamming window") {
  const auto w = hamming_window(4);
  CHECK(w[0] == doctest::Approx(0.08));
  CHECK(w[1] == doctest::Approx(0.54));
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(w[3] == doctest::Approx(0.54));
  for (Index len : {1, 2, 7, 41, 256}) {
    const auto v = hamming_window(len);
    CHECK(v[0] == doctest::Approx(0.08));
    CHECK(v.minCoeff() >= 0.08 - 1e-15);
    CHECK(v.maxCoeff() <= 1.0 + 1e-15);
  }
  CHECK_THROWS_AS(hamming_window(0), Error);
}

TEST_CASE("centered window peaks on the centre tap and is symmetric") {
  for (Index len : {3, 7, 41, 101}) {
    const auto w = centered_hamming_window(len);
    CHECK(w[(len - 1) / 2] == doctest::Approx(1.0));
    for (Index i = 0; i < len; ++i) CHECK(w[i] == w[len - 1 - i]);
  }
  const auto wf = centered_hamming_window<float>(41);
  CHECK(wf[20] == doctest::Approx(1.0f));
}

TEST_CASE("sinc kernel contract") {
  SUBCASE("equal cutoffs cancel") {
    CHECK(sinc_kernel(60.0, 60.0, 41, 173.61).isZero());
  }
  SUBCASE("length validation") {
    CHECK(sinc_kernel(5.0, 20.0, 41, 173.61).size() == 41);
    CHECK_THROWS_AS(sinc_kernel(5.0, 20.0, 40, 173.61), Error);
    CHECK_THROWS_AS(sinc_kernel(5.0, 20.0, 1, 173.61), Error);
  }
  SUBCASE("centre tap is 2 (high - low) w[centre]") {
    const auto k = sinc_kernel(5.0, 20.0, 41, 173.61);
    CHECK(k[20] == doctest::Approx(2.0 * 15.0));
  }
  SUBCASE("taps are even in n") {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
      const auto k = sinc_kernel(rng.uniform(-100, 100), rng.uniform(-100, 100), 71, 256.0);
      for (Index j = 0; j < 71; ++j) CHECK(k[j] == k[70 - j]);
    }
  }
  SUBCASE("5-20 Hz band at 173.61 Hz") {
    const double fs = 173.61;
    const std::size_t n = 4096;
    const auto mag = magnitude_response(sinc_kernel(5.0, 20.0, 101, fs), n);
    const double peak_f = static_cast<double>(argmax(mag)) * fs / static_cast<double>(n);
    CHECK(peak_f >= 5.0);
    CHECK(peak_f <= 20.0);
    const double peak = *std::max_element(mag.begin(), mag.end());
    CHECK(db(response_at(mag, 60.0, fs, n) / peak) <= -20.0);
  }
}

TEST_CASE("bandpass kernels reject DC") {
  Rng rng(17);
  const double fs = 256.0;
  for (int i = 0; i < 30; ++i) {
    const double f1 = rng.uniform(20.0, 80.0);
    const double f2 = f1 + rng.uniform(10.0, 40.0);
    const auto k = sinc_kernel(f1, f2, 101, fs);
    const auto mag = magnitude_response(k, 4096);
    const double peak = *std::max_element(mag.begin(), mag.end());
    CAPTURE(f1);
    CAPTURE(f2);
    // Taps sum = response at 0 Hz.
    CHECK(db(std::abs(k.sum()) / peak) <= -40.0);
  }
}

TEST_CASE("raising both cutoffs moves the peak up") {
  Rng rng(23);
  const double fs = 256.0;
  const std::size_t n = 4096;
  for (int bank = 0; bank < 3; ++bank) {
    for (int f = 0; f < 4; ++f) {
      // Narrow bands have a single response peak; wide ones ripple.
      const double lo = rng.uniform(10.0, 80.0);
      const double hi = lo + rng.uniform(2.0, 6.0);
      const auto before = magnitude_response(sinc_kernel(lo, hi, 101, fs), n);
      const auto after = magnitude_response(sinc_kernel(lo + 5.0, hi + 5.0, 101, fs), n);
      CHECK(argmax(after) > argmax(before));
    }
  }
}

TEST_CASE("init_cutoffs") {
  const auto a = init_cutoffs(64, 256.0, 42);
  const auto b = init_cutoffs(64, 256.0, 42);
  CHECK(a == b);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 128.0);
  CHECK((a.col(0).array() <= a.col(1).array()).all());
  CHECK(init_cutoffs(64, 256.0, 43) != a);
  const auto bonn = init_cutoffs(16, 173.61, 1);
  CHECK(bonn.maxCoeff() <= 173.61 / 2.0);
}

TEST_CASE("sinc_forward") {
  SUBCASE("degenerate band gives zero output") {
    ad::Graph g;
    Rng rng(1);
    auto x = g.constant(random_tensor({2, 1, 64}, rng));
    auto c = g.parameter(Tensor({1, 2}, {30.0, 30.0}));
    auto y = sinc_forward(x, c, 7, 128.0);
    CHECK(y.shape() == Shape{2, 1, 64});
    CHECK(y.value().data().isZero());
  }
  SUBCASE("depthwise layout") {
    ad::Graph g;
    Rng rng(2);
    auto x = g.constant(random_tensor({3, 2, 32}, rng));
    auto c = g.parameter(Tensor({4, 2}, {1, 10, 5, 20, 10, 30, 2, 50}));
    auto y = sinc_forward(x, c, 9, 128.0);
    CHECK(y.shape() == Shape{3, 8, 32});
  }
  SUBCASE("window shorter than kernel rejected") {
    ad::Graph g;
    auto x = g.constant(Tensor::zeros({1, 1, 20}));
    auto c = g.parameter(Tensor({1, 2}, {5, 20}));
    CHECK_THROWS_AS(sinc_forward(x, c, 41, 173.61), Error);
  }
  SUBCASE("white noise through a 5-20 Hz filter") {
    const double fs = 173.61;
    const Index len = 8192;
    Rng rng(99);
    Tensor noise({1, 1, len});
    for (Index i = 0; i < len; ++i) noise[i] = rng.normal();
    ad::Graph g;
    auto y = sinc_forward(g.constant(noise), g.parameter(Tensor({1, 2}, {5.0, 20.0})), 101, fs);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(len));
    for (Index i = 0; i < len; ++i) buf[static_cast<std::size_t>(i)] = y.value()[i];
    const auto spec = fft(std::move(buf));
    const double guard = 2.0 * fs / 101.0;
    double in_band = 0.0, stop_band = 0.0;
    for (Index k = 0; k <= len / 2; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(len);
      const double p = std::norm(spec[static_cast<std::size_t>(k)]);
      if (f >= 5.0 && f <= 20.0) in_band += p;
      else if (f < 5.0 - guard || f > 20.0 + guard) stop_band += p;
    }
    CHECK(10.0 * std::log10(stop_band / in_band) <= -20.0);
  }
  SUBCASE("gradient with respect to raw cutoffs") {
    Rng rng(31);
    const Tensor x = random_tensor({2, 2, 48}, rng);
    for (int trial = 0; trial < 5; ++trial) {
      // Cutoffs away from 0 and from each other by at least 0.5 Hz.
      Tensor c({3, 2});
      for (Index f = 0; f < 3; ++f) {
        const double lo = rng.uniform(0.5, 40.0);
        c[2 * f] = rng.uniform(0.0, 1.0) < 0.5 ? lo : -lo;
        c[2 * f + 1] = lo + rng.uniform(0.5, 40.0);
      }
      GraphBuilder build = [&](ad::Graph& g, const std::vector<ad::Var>& v) {
        return weighted_sum(g, sinc_forward(g.constant(x), v[0], 11, 128.0), 77);
      };
      const auto res = gradient_check(build, {c});
      CHECK(res.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("kernel bank and CSV export") {
  SincFilterbankParams params;
  params.raw_cutoffs.resize(2, 2);
  params.raw_cutoffs << -50.0, 30.0, 5.0, 20.0;
  params.kernel_length = 41;
  params.sampling_rate = 173.61;
  const auto bank = synthesize_bank(params);
  CHECK(bank.kernels.rows() == 2);
  CHECK(bank.kernels.cols() == 41);
  CHECK(bank.effective_cutoffs(0, 1) == 130.0);
  std::ostringstream out;
  write_cutoffs_csv(out, params);
  CHECK(out.str() == "filter_index,f1_abs_hz,f2_abs_hz\n0,50,130\n1,5,20\n");
  params.kernel_length = 40;
  CHECK_THROWS_AS(synthesize_bank(params), Error);
}
