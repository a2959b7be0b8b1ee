#pragma once

// Test-only spectral oracle: radix-2 FFT and helpers, independent of the
// library's filtering code.

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace sincvae::testing {

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  return a;
}

// Magnitude response at bins 0..n/2 of `taps` zero-padded to n (power of 2).
inline std::vector<double> magnitude_response(const Eigen::VectorXd& taps, std::size_t n) {
  std::vector<std::complex<double>> buf(n, 0.0);
  for (Eigen::Index i = 0; i < taps.size(); ++i) buf[static_cast<std::size_t>(i)] = taps[i];
  const auto spec = fft(std::move(buf));
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

// Linear interpolation of a one-sided response at frequency f.
inline double response_at(const std::vector<double>& mag, double f, double fs, std::size_t n) {
  const double pos = f * static_cast<double>(n) / fs;
  const std::size_t k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= mag.size()) return mag.back();
  const double frac = pos - static_cast<double>(k);
  return mag[k] * (1.0 - frac) + mag[k + 1] * frac;
}

// Amplitude of a tone at frequency f (Hz) estimated by correlation with
// quadrature references over the whole signal.
inline double tone_amplitude(const Eigen::VectorXd& x, double f, double fs) {
  double c = 0.0, s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(i) / fs;
    c += x[i] * std::cos(ph);
    s += x[i] * std::sin(ph);
  }
  return 2.0 * std::hypot(c, s) / static_cast<double>(x.size());
}

inline double db(double ratio) { return 20.0 * std::log10(ratio); }

}  // namespace sincvae::testing
