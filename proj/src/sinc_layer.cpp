#include "sincvae/sinc_layer.hpp"

#include "sincvae/csv.hpp"
#include "sincvae/rng.hpp"

#include <ostream>

namespace sincvae {

void SincFilterbankParams::validate() const {
  require(raw_cutoffs.rows() >= 1, ErrorCode::kInvalidArgument,
          "sinc filterbank needs at least one filter");
  require(kernel_length >= 3 && kernel_length % 2 == 1, ErrorCode::kInvalidArgument,
          "sinc kernel length must be odd and >= 3, got " + std::to_string(kernel_length));
  require(sampling_rate > 0.0, ErrorCode::kInvalidArgument,
          "sinc filterbank sampling rate must be positive");
  require(raw_cutoffs.allFinite(), ErrorCode::kNonFinite, "non-finite sinc cutoff");
}

SincKernelBank synthesize_bank(const SincFilterbankParams& params) {
  params.validate();
  SincKernelBank bank;
  bank.kernels.resize(params.filter_count(), params.kernel_length);
  bank.effective_cutoffs.resize(params.filter_count(), 2);
  for (Index f = 0; f < params.filter_count(); ++f) {
    const double f1 = params.raw_cutoffs(f, 0), f2 = params.raw_cutoffs(f, 1);
    bank.kernels.row(f) =
        sinc_kernel(f1, f2, params.kernel_length, params.sampling_rate).transpose();
    const auto [low, high] = effective_cutoffs(f1, f2);
    bank.effective_cutoffs(f, 0) = low;
    bank.effective_cutoffs(f, 1) = high;
  }
  return bank;
}

CutoffMatrix init_cutoffs(Index filter_count, double sampling_rate, std::uint64_t seed) {
  require(filter_count >= 1, ErrorCode::kInvalidArgument, "filter count must be >= 1");
  require(sampling_rate > 0.0, ErrorCode::kInvalidArgument, "sampling rate must be positive");
  Rng rng(seed);
  CutoffMatrix cutoffs(filter_count, 2);
  const double nyquist = sampling_rate / 2.0;
  for (Index f = 0; f < filter_count; ++f) {
    const double a = rng.uniform(0.0, nyquist);
    const double b = rng.uniform(0.0, nyquist);
    cutoffs(f, 0) = std::min(a, b);
    cutoffs(f, 1) = std::max(a, b);
  }
  return cutoffs;
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

namespace ad {

Var sinc_kernels(Var raw_cutoffs, Index kernel_length, double sampling_rate) {
  require(raw_cutoffs.graph != nullptr, ErrorCode::kState, "sinc_kernels on an unbound Var");
  const Tensor& raw = raw_cutoffs.value();
  if (raw.rank() != 2 || raw.dim(1) != 2) {
    fail(ErrorCode::kShapeMismatch,
         "sinc_kernels: cutoffs must have shape [F,2], got " + shape_string(raw.shape()));
  }
  require(kernel_length >= 3 && kernel_length % 2 == 1, ErrorCode::kInvalidArgument,
          "sinc kernel length must be odd and >= 3, got " + std::to_string(kernel_length));
  require(sampling_rate > 0.0, ErrorCode::kInvalidArgument, "sampling rate must be positive");
  const Index filters = raw.dim(0);
  Tensor kernels({filters, kernel_length});
  auto km = kernels.matrix(filters, kernel_length);
  for (Index f = 0; f < filters; ++f) {
    km.row(f) = sinc_kernel(raw[2 * f], raw[2 * f + 1], kernel_length, sampling_rate).transpose();
  }
  const int ic = raw_cutoffs.id;
  return raw_cutoffs.graph->record(
      "sinc_kernels", std::move(kernels), {raw_cutoffs},
      [ic, filters, kernel_length, sampling_rate](Graph& g, int self) {
        // d/df [2 f sinc(2 pi f t)] = 2 cos(2 pi f t), including t = 0.
        const auto gk = g.upstream(self).matrix(filters, kernel_length);
        const Tensor& raw = g.value(ic);
        Tensor& graw = g.grad_buffer(ic);
        const auto window = centered_hamming_window<double>(kernel_length);
        const Index half = (kernel_length - 1) / 2;
        for (Index f = 0; f < filters; ++f) {
          const double f1 = raw[2 * f], f2 = raw[2 * f + 1];
          const auto [low, high] = effective_cutoffs(f1, f2);
          double d_low = 0.0, d_high = 0.0;
          for (Index i = 0; i < kernel_length; ++i) {
            const double t = static_cast<double>(i - half) / sampling_rate;
            const double gw = gk(f, i) * window[i];
            d_high += gw * 2.0 * std::cos(2.0 * std::numbers::pi * high * t);
            d_low -= gw * 2.0 * std::cos(2.0 * std::numbers::pi * low * t);
          }
          const double s1 = sign(f1), s21 = sign(f2 - f1);
          graw[2 * f] += d_low * s1 + d_high * (s1 - s21);
          graw[2 * f + 1] += d_high * s21;
        }
      });
}

}  // namespace ad

ad::Var sinc_forward(ad::Var x, ad::Var raw_cutoffs, Index kernel_length, double sampling_rate) {
  require(x.value().rank() == 3, ErrorCode::kShapeMismatch,
          "sinc_forward: input must be [n,c,t], got " + shape_string(x.shape()));
  require(x.value().dim(2) >= kernel_length, ErrorCode::kShapeMismatch,
          "sinc_forward: window length " + std::to_string(x.value().dim(2)) +
              " shorter than kernel length " + std::to_string(kernel_length));
  const ad::Var kernels = ad::sinc_kernels(raw_cutoffs, kernel_length, sampling_rate);
  return ad::depthwise_conv1d(x, kernels, ad::Padding::kSame);
}

void write_cutoffs_csv(std::ostream& out, const SincFilterbankParams& params) {
  out << "filter_index,f1_abs_hz,f2_abs_hz\n";
  for (Index f = 0; f < params.filter_count(); ++f) {
    const auto [low, high] = effective_cutoffs(params.raw_cutoffs(f, 0), params.raw_cutoffs(f, 1));
    out << f << ',' << format_double(low) << ',' << format_double(high) << '\n';
  }
}

}  // namespace sincvae
