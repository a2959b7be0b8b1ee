#pragma once

#include "sincvae/autodiff.hpp"
#include "sincvae/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <utility>

namespace sincvae {

using CutoffMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Learnable band edges of a sinc filterbank. Raw cutoffs are unconstrained
// reals in Hz, one (f1, f2) row per filter.
struct SincFilterbankParams {
  CutoffMatrix raw_cutoffs;
  Index kernel_length = 0;
  double sampling_rate = 0.0;

  Index filter_count() const { return raw_cutoffs.rows(); }
  void validate() const;
};

// Maps raw cutoffs onto ordered, non-negative band edges:
// low = |f1|, high = |f1| + |f2 - f1|.
template <typename Scalar>
std::pair<Scalar, Scalar> effective_cutoffs(Scalar f1, Scalar f2) {
  using std::abs;
  const Scalar low = abs(f1);
  return {low, low + abs(f2 - f1)};
}

// 0.54 - 0.46 cos(2 pi n / L) at the integer points n = 0..L-1.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hamming_window(Index length) {
  require(length >= 1, ErrorCode::kInvalidArgument, "hamming_window: length must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(length);
  for (Index n = 0; n < length; ++n) {
    w[n] = Scalar(0.54) - Scalar(0.46) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> *
                                                  Scalar(n) / Scalar(length));
  }
  return w;
}

// The same taper sampled at n + 1/2, so that for odd L the peak (1.0) lands
// on the centre tap and w[i] == w[L-1-i] exactly.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> centered_hamming_window(Index length) {
  require(length >= 1, ErrorCode::kInvalidArgument,
          "centered_hamming_window: length must be >= 1");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(length);
  for (Index n = 0; n < length; ++n) {
    w[n] = Scalar(0.54) - Scalar(0.46) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> *
                                                  (Scalar(n) + Scalar(0.5)) / Scalar(length));
  }
  // Exact mirror; cos(2 pi - x) and cos(x) can differ in the last bit.
  for (Index n = 0; n < length / 2; ++n) w[length - 1 - n] = w[n];
  return w;
}

// Unwindowed lowpass term 2 f sinc(2 pi f t) = sin(2 pi f t) / (pi t), with
// the t = 0 limit 2 f.
template <typename Scalar>
Scalar lowpass_term(Scalar f, Scalar t) {
  if (t == Scalar(0)) return Scalar(2) * f;
  return std::sin(Scalar(2) * std::numbers::pi_v<Scalar> * f * t) /
         (std::numbers::pi_v<Scalar> * t);
}

// Windowed band-pass kernel for raw cutoffs (f1, f2) in Hz. L must be odd and
// >= 3; tap i sits at time (i - (L-1)/2) / fs.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sinc_kernel(Scalar f1, Scalar f2, Index length,
                                                     Scalar sampling_rate) {
  require(length >= 3 && length % 2 == 1, ErrorCode::kInvalidArgument,
          "sinc_kernel: kernel length must be odd and >= 3, got " + std::to_string(length));
  require(sampling_rate > Scalar(0), ErrorCode::kInvalidArgument,
          "sinc_kernel: sampling rate must be positive");
  const auto [low, high] = effective_cutoffs(f1, f2);
  const auto window = centered_hamming_window<Scalar>(length);
  const Index half = (length - 1) / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps(length);
  for (Index i = 0; i < length; ++i) {
    const Scalar t = Scalar(i - half) / sampling_rate;
    taps[i] = (lowpass_term(high, t) - lowpass_term(low, t)) * window[i];
  }
  for (Index i = 0; i < half; ++i) taps[length - 1 - i] = taps[i];
  return taps;
}

struct SincKernelBank {
  Eigen::MatrixXd kernels;        // filter_count x L
  CutoffMatrix effective_cutoffs; // per filter (low, high) in Hz
};

SincKernelBank synthesize_bank(const SincFilterbankParams& params);

// Uniform draws from [0, fs/2], each pair stored in ascending order.
CutoffMatrix init_cutoffs(Index filter_count, double sampling_rate, std::uint64_t seed);

namespace ad {

// Differentiable kernel synthesis: raw cutoffs [F, 2] -> kernels [F, L].
Var sinc_kernels(Var raw_cutoffs, Index kernel_length, double sampling_rate);

}  // namespace ad

// Filterbank over a batch x [n, c, t]: every kernel on every channel with
// `same` padding, giving [n, c * F, t].
ad::Var sinc_forward(ad::Var x, ad::Var raw_cutoffs, Index kernel_length, double sampling_rate);

// `filter_index,f1_abs_hz,f2_abs_hz` with a header row.
void write_cutoffs_csv(std::ostream& out, const SincFilterbankParams& params);

}  // namespace sincvae
