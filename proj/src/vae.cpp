#include "sincvae/vae.hpp"

#include "sincvae/binary_io.hpp"
#include "sincvae/csv.hpp"
#include "sincvae/log.hpp"
#include "sincvae/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sincvae {

using json = nlohmann::json;

const char* to_string(Variant v) { return v == Variant::kPlain ? "plain" : "sinc"; }

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

const char* to_string(NormAxis a) { return a == NormAxis::kTime ? "time" : "channel_time"; }

Variant parse_variant(const std::string& s) {
  if (s == "plain") return Variant::kPlain;
  if (s == "sinc") return Variant::kSinc;
  fail(ErrorCode::kConfig, "unknown model variant '" + s + "' (expected plain|sinc)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  fail(ErrorCode::kConfig, "unknown activation '" + s + "' (expected relu|tanh|identity)");
}

NormAxis parse_norm_axis(const std::string& s) {
  if (s == "time") return NormAxis::kTime;
  if (s == "channel_time") return NormAxis::kChannelTime;
  fail(ErrorCode::kConfig, "unknown norm axis '" + s + "' (expected time|channel_time)");
}

void VaeArchitecture::validate() const {
  require(input_channels >= 1, ErrorCode::kConfig, "input_channels must be >= 1");
  require(window_length >= 1, ErrorCode::kConfig, "window_length must be >= 1");
  require(latent_dim >= 1, ErrorCode::kConfig, "latent_dim must be >= 1");
  require(conv_block_count >= 0, ErrorCode::kConfig, "conv_block_count must be >= 0");
  require(channels_per_block >= 1, ErrorCode::kConfig, "channels_per_block must be >= 1");
  require(norm_epsilon > 0.0, ErrorCode::kConfig, "norm_epsilon must be positive");
  if (variant == Variant::kSinc) {
    require(filter_count >= 1, ErrorCode::kConfig, "filter_count must be >= 1");
    require(kernel_length >= 3 && kernel_length % 2 == 1, ErrorCode::kConfig,
            "kernel_length must be odd and >= 3, got " + std::to_string(kernel_length));
    require(kernel_length <= window_length, ErrorCode::kConfig,
            "kernel_length " + std::to_string(kernel_length) + " exceeds window_length " +
                std::to_string(window_length));
    require(sampling_rate > 0.0, ErrorCode::kConfig, "sampling_rate must be positive");
  }
}

std::vector<Index> VaeArchitecture::block_lengths() const {
  std::vector<Index> lengths{window_length};
  for (Index b = 0; b < conv_block_count; ++b) lengths.push_back((lengths.back() + 1) / 2);
  return lengths;
}

Index VaeArchitecture::flat_features() const {
  return channels_per_block * block_lengths().back();
}

SincFilterbankParams VaeModel::filterbank() const {
  SincFilterbankParams fb;
  fb.kernel_length = architecture.kernel_length;
  fb.sampling_rate = architecture.sampling_rate;
  if (architecture.variant == Variant::kSinc) {
    const Tensor& c = parameters.at("sinc.cutoffs");
    fb.raw_cutoffs = c.matrix(c.dim(0), 2);
  }
  return fb;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Index encoder_input_channels(const VaeArchitecture& arch) {
  return arch.variant == Variant::kSinc ? arch.input_channels * arch.filter_count
                                        : arch.input_channels;
}

}  // namespace

VaeModel init_model(const VaeArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  VaeModel model;
  model.architecture = arch;
  model.seed = seed;
  Rng rng(seed);
  ParameterSet& p = model.parameters;
  const Index ch = arch.channels_per_block;
  constexpr Index kConvKernel = 3;

  if (arch.variant == Variant::kSinc) {
    const CutoffMatrix c = init_cutoffs(arch.filter_count, arch.sampling_rate, derive_seed(seed, 100));
    Tensor t({arch.filter_count, 2});
    t.matrix(arch.filter_count, 2) = c;
    p.add("sinc.cutoffs", std::move(t));
  }
  Index in_ch = encoder_input_channels(arch);
  for (Index b = 0; b < arch.conv_block_count; ++b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kConvKernel));
    p.add("enc.conv" + std::to_string(b) + ".weight", uniform_tensor({ch, in_ch, kConvKernel}, bound, rng));
    p.add("enc.conv" + std::to_string(b) + ".bias", Tensor::zeros({ch}));
    in_ch = ch;
  }
  const Index flat = arch.conv_block_count > 0 ? arch.flat_features()
                                               : encoder_input_channels(arch) * arch.window_length;
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(flat));
  p.add("enc.mu.weight", uniform_tensor({arch.latent_dim, flat}, head_bound, rng));
  p.add("enc.mu.bias", Tensor::zeros({arch.latent_dim}));
  p.add("enc.logvar.weight", uniform_tensor({arch.latent_dim, flat}, head_bound, rng));
  p.add("enc.logvar.bias", Tensor::zeros({arch.latent_dim}));

  const Index dec_flat = ch * arch.block_lengths().back();
  const double dense_bound = 1.0 / std::sqrt(static_cast<double>(arch.latent_dim));
  p.add("dec.dense.weight", uniform_tensor({dec_flat, arch.latent_dim}, dense_bound, rng));
  p.add("dec.dense.bias", Tensor::zeros({dec_flat}));
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(ch * kConvKernel));
  for (Index b = 0; b < arch.conv_block_count; ++b) {
    p.add("dec.conv" + std::to_string(b) + ".weight", uniform_tensor({ch, ch, kConvKernel}, conv_bound, rng));
    p.add("dec.conv" + std::to_string(b) + ".bias", Tensor::zeros({ch}));
  }
  p.add("dec.out.weight", uniform_tensor({arch.input_channels, ch, kConvKernel}, conv_bound, rng));
  p.add("dec.out.bias", Tensor::zeros({arch.input_channels}));
  return model;
}

BoundParameters::BoundParameters(ad::Graph& g, const ParameterSet& params, bool trainable)
    : params_(&params) {
  vars_.reserve(params.size());
  for (const auto& p : params) vars_.push_back(trainable ? g.parameter(p.value) : g.constant(p.value));
}

BoundParameters::BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars)
    : params_(&params), vars_(std::move(vars)) {
  require(vars_.size() == params.size(), ErrorCode::kShapeMismatch,
          "BoundParameters: " + std::to_string(vars_.size()) + " vars for " +
              std::to_string(params.size()) + " parameters");
}

ad::Var BoundParameters::operator()(const std::string& name) const {
  for (std::size_t i = 0; i < params_->size(); ++i) {
    if ((*params_)[i].name == name) return vars_[i];
  }
  fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

ad::Var ad::apply_activation(ad::Var x, Activation a) {
  switch (a) {
    case Activation::kRelu: return ad::relu(x);
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

Posterior encode(const BoundParameters& p, ad::Var x, const VaeArchitecture& arch) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != arch.input_channels || s[2] != arch.window_length) {
    fail(ErrorCode::kShapeMismatch, "encode: input " + shape_string(s) + " does not match " +
                                        shape_string(arch.input_shape(s.empty() ? 0 : s[0])));
  }
  const Index n = s[0];
  ad::Var h = x;
  if (arch.variant == Variant::kSinc) {
    h = sinc_forward(h, p("sinc.cutoffs"), arch.kernel_length, arch.sampling_rate);
    if (arch.norm_axis == NormAxis::kTime) {
      h = ad::layer_norm(h, arch.norm_epsilon);
    } else {
      const Shape hs = h.shape();
      h = ad::reshape(ad::layer_norm(ad::reshape(h, {n, hs[1] * hs[2]}), arch.norm_epsilon), hs);
    }
    h = ad::apply_activation(h, arch.activation);
  }
  for (Index b = 0; b < arch.conv_block_count; ++b) {
    const std::string name = "enc.conv" + std::to_string(b);
    h = ad::conv1d(h, p(name + ".weight"), p(name + ".bias"), {2, ad::Padding::kSame});
    h = ad::apply_activation(h, arch.block_activation);
  }
  const Shape hs = h.shape();
  h = ad::reshape(h, {n, hs[1] * hs[2]});
  return {ad::affine(h, p("enc.mu.weight"), p("enc.mu.bias")),
          ad::affine(h, p("enc.logvar.weight"), p("enc.logvar.bias"))};
}

ad::Var reparametrize(ad::Var mu, ad::Var logvar, ad::Var eps) {
  return ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), eps));
}

ad::Var decode(const BoundParameters& p, ad::Var z, const VaeArchitecture& arch) {
  const Shape& s = z.shape();
  if (s.size() != 2 || s[1] != arch.latent_dim) {
    fail(ErrorCode::kShapeMismatch, "decode: latent " + shape_string(s) + " does not match [n," +
                                        std::to_string(arch.latent_dim) + "]");
  }
  const Index n = s[0];
  const auto lengths = arch.block_lengths();
  const Index ch = arch.channels_per_block;
  ad::Var h = ad::affine(z, p("dec.dense.weight"), p("dec.dense.bias"));
  h = ad::apply_activation(h, arch.block_activation);
  h = ad::reshape(h, {n, ch, lengths.back()});
  for (Index b = arch.conv_block_count - 1; b >= 0; --b) {
    const std::string name = "dec.conv" + std::to_string(b);
    h = ad::upsample_nearest(h, 2);
    const Index target = lengths[static_cast<std::size_t>(b)];
    if (h.shape()[2] != target) h = ad::slice(h, 2, 0, target);
    h = ad::conv1d(h, p(name + ".weight"), p(name + ".bias"), {1, ad::Padding::kSame});
    h = ad::apply_activation(h, arch.block_activation);
  }
  return ad::conv1d(h, p("dec.out.weight"), p("dec.out.bias"), {1, ad::Padding::kSame});
}

ElboTerms elbo_loss(ad::Var x, ad::Var x_hat, ad::Var mu, ad::Var logvar) {
  if (x.shape() != x_hat.shape() || mu.shape() != logvar.shape() || mu.shape().size() != 2 ||
      mu.shape()[0] != x.shape().at(0)) {
    fail(ErrorCode::kShapeMismatch, "elbo_loss: inconsistent shapes x " + shape_string(x.shape()) +
                                        " x_hat " + shape_string(x_hat.shape()) + " mu " +
                                        shape_string(mu.shape()) + " logvar " +
                                        shape_string(logvar.shape()));
  }
  const double batch = static_cast<double>(mu.shape()[0]);
  ad::Var recon = ad::mean(ad::square(ad::sub(x, x_hat)));
  ad::Var per_dim = ad::add_scalar(ad::sub(ad::add(ad::square(mu), ad::exp(logvar)), logvar), -1.0);
  ad::Var kl = ad::scale(ad::sum(per_dim), 0.5 / batch);
  return {ad::add(recon, kl), recon, kl};
}

ForwardResult forward(const BoundParameters& p, ad::Var x, const VaeArchitecture& arch,
                      std::optional<ad::Var> eps) {
  ForwardResult r;
  r.posterior = encode(p, x, arch);
  r.z = eps ? reparametrize(r.posterior.mu, r.posterior.logvar, *eps) : r.posterior.mu;
  r.reconstruction = decode(p, r.z, arch);
  r.loss = elbo_loss(x, r.reconstruction, r.posterior.mu, r.posterior.logvar);
  return r;
}

std::pair<Tensor, Tensor> encode(const Tensor& x, const VaeModel& model) {
  ad::Graph g;
  BoundParameters p(g, model.parameters, false);
  const Posterior post = encode(p, g.constant(x), model.architecture);
  return {post.mu.value(), post.logvar.value()};
}

Tensor reparametrize(const Tensor& mu, const Tensor& logvar, const Tensor& eps) {
  ad::Graph g;
  return reparametrize(g.constant(mu), g.constant(logvar), g.constant(eps)).value();
}

Tensor decode(const Tensor& z, const VaeModel& model) {
  ad::Graph g;
  BoundParameters p(g, model.parameters, false);
  return decode(p, g.constant(z), model.architecture).value();
}

ElboValues elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar) {
  ad::Graph g;
  const ElboTerms t = elbo_loss(g.constant(x), g.constant(x_hat), g.constant(mu), g.constant(logvar));
  return {t.total.value().item(), t.recon.value().item(), t.kl.value().item()};
}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  improved_ = best_epoch_ < 0 || loss < best_loss_;
  if (improved_) {
    best_loss_ = loss;
    best_epoch_ = epoch_;
  }
  return epoch_ - best_epoch_ >= patience_;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorCode::kConfig, "learning_rate must be positive");
  require(batch_size >= 1, ErrorCode::kConfig, "batch_size must be >= 1");
  require(max_epochs >= 1, ErrorCode::kConfig, "max_epochs must be >= 1");
  require(patience >= 1, ErrorCode::kConfig, "patience must be >= 1");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorCode::kConfig,
          "validation_fraction must lie in (0,1)");
}

Tensor gather_windows(const Tensor& windows, const std::vector<Index>& indices) {
  require(windows.rank() == 3, ErrorCode::kShapeMismatch,
          "windows must be [count,channels,length], got " + shape_string(windows.shape()));
  const Index per = windows.dim(1) * windows.dim(2);
  Tensor out({static_cast<Index>(indices.size()), windows.dim(1), windows.dim(2)});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index src = indices[i];
    require(src >= 0 && src < windows.dim(0), ErrorCode::kInvalidArgument,
            "window index " + std::to_string(src) + " out of range");
    out.data().segment(static_cast<Index>(i) * per, per) = windows.data().segment(src * per, per);
  }
  return out;
}

namespace {

Tensor batch_slice(const Tensor& windows, Index start, Index count) {
  const Index per = windows.dim(1) * windows.dim(2);
  return Tensor({count, windows.dim(1), windows.dim(2)}, windows.data().segment(start * per, count * per));
}

ElboValues evaluate_params(const Tensor& windows, const VaeArchitecture& arch,
                           const ParameterSet& params, Index batch_size) {
  ElboValues acc;
  const Index n = windows.dim(0);
  for (Index start = 0; start < n; start += batch_size) {
    const Index count = std::min(batch_size, n - start);
    ad::Graph g;
    BoundParameters p(g, params, false);
    const ForwardResult r = forward(p, g.constant(batch_slice(windows, start, count)), arch, std::nullopt);
    const double w = static_cast<double>(count);
    acc.total += w * r.loss.total.value().item();
    acc.recon += w * r.loss.recon.value().item();
    acc.kl += w * r.loss.kl.value().item();
  }
  const double nd = static_cast<double>(n);
  return {acc.total / nd, acc.recon / nd, acc.kl / nd};
}

void require_window_shape(const Tensor& windows, const VaeArchitecture& arch, const char* who) {
  if (windows.rank() != 3 || windows.dim(1) != arch.input_channels ||
      windows.dim(2) != arch.window_length) {
    fail(ErrorCode::kShapeMismatch,
         std::string(who) + ": windows " + shape_string(windows.shape()) +
             " do not match architecture input [n," + std::to_string(arch.input_channels) + "," +
             std::to_string(arch.window_length) + "]");
  }
}

}  // namespace

ElboValues evaluate_loss(const Tensor& windows, const VaeModel& model, Index batch_size) {
  require_window_shape(windows, model.architecture, "evaluate_loss");
  require(windows.dim(0) > 0, ErrorCode::kInvalidArgument, "evaluate_loss: no windows");
  return evaluate_params(windows, model.architecture, model.parameters, batch_size);
}

VaeModel train(const Tensor& windows, const TrainConfig& config, const VaeArchitecture& arch) {
  config.validate();
  arch.validate();
  require_window_shape(windows, arch, "train");
  const Index n = windows.dim(0);
  require(n >= 2, ErrorCode::kInvalidArgument, "train: need at least 2 windows, got " + std::to_string(n));

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng split_rng(derive_seed(config.seed, 1));
  split_rng.shuffle(order);
  const Index n_val = std::clamp<Index>(
      static_cast<Index>(std::llround(config.validation_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<Index> val_idx(order.begin(), order.begin() + n_val);
  std::vector<Index> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const Tensor val_windows = gather_windows(windows, val_idx);

  VaeModel model = init_model(arch, derive_seed(config.seed, 0));
  model.seed = config.seed;
  model.validation_indices = val_idx;
  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  AdamState adam = AdamState::for_parameters(model.parameters, adam_config);
  Rng shuffle_rng(derive_seed(config.seed, 2));
  Rng eps_rng(derive_seed(config.seed, 3));
  EarlyStopping stopper(config.patience);
  ParameterSet best = model.parameters;

  for (Index epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    double loss_sum = 0.0;
    Index batch_no = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_no) {
      const std::size_t stop = std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<Index> batch_idx(train_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         train_idx.begin() + static_cast<std::ptrdiff_t>(stop));
      const Index count = static_cast<Index>(batch_idx.size());
      Tensor eps({count, arch.latent_dim});
      for (Index i = 0; i < eps.size(); ++i) eps[i] = eps_rng.normal();
      try {
        ad::Graph g;
        BoundParameters p(g, model.parameters, true);
        const ForwardResult r =
            forward(p, g.constant(gather_windows(windows, batch_idx)), arch, g.constant(std::move(eps)));
        const double loss = r.loss.total.value().item();
        require(std::isfinite(loss), ErrorCode::kNonFinite, "non-finite loss");
        g.backward(r.loss.total);
        std::vector<Tensor> grads;
        grads.reserve(p.vars().size());
        for (const auto& v : p.vars()) grads.push_back(g.grad(v));
        adam_step(model.parameters, grads, adam);
        loss_sum += loss * static_cast<double>(count);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNonFinite) throw;
        fail(ErrorCode::kNonFinite, "training diverged at epoch " + std::to_string(epoch) +
                                        " batch " + std::to_string(batch_no) + ": " + e.what());
      }
    }
    ElboValues val;
    try {
      val = evaluate_params(val_windows, arch, model.parameters, 256);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      fail(ErrorCode::kNonFinite, "validation diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    model.history.push_back({epoch, loss_sum / static_cast<double>(train_idx.size()), val.total,
                             val.recon, val.kl});
    const bool stop = stopper.update(val.total);
    if (stopper.improved()) best = model.parameters;
    if (stop) break;
  }
  model.parameters = std::move(best);
  model.best_epoch = stopper.best_epoch();

  if (arch.variant == Variant::kSinc) {
    const auto fb = model.filterbank();
    for (Index f = 0; f < fb.filter_count(); ++f) {
      const auto [lo, hi] = effective_cutoffs(fb.raw_cutoffs(f, 0), fb.raw_cutoffs(f, 1));
      if (hi > arch.sampling_rate / 2.0) {
        log_warning("sinc filter " + std::to_string(f) + " upper cutoff " + format_double(hi) +
                    " Hz exceeds Nyquist " + format_double(arch.sampling_rate / 2.0) + " Hz");
      }
    }
  }
  return model;
}

Eigen::VectorXd reconstruct_mse(const Tensor& windows, const VaeModel& model, const ScoreOptions& options) {
  const VaeArchitecture& arch = model.architecture;
  require_window_shape(windows, arch, "reconstruct_mse");
  const Index n = windows.dim(0);
  const Index per = arch.input_channels * arch.window_length;
  Eigen::VectorXd scores(n);
  Rng rng(options.seed);
  for (Index start = 0; start < n; start += options.batch_size) {
    const Index count = std::min(options.batch_size, n - start);
    ad::Graph g;
    BoundParameters p(g, model.parameters, false);
    const Tensor batch = batch_slice(windows, start, count);
    const Posterior post = encode(p, g.constant(batch), arch);
    ad::Var z = post.mu;
    if (options.stochastic) {
      Tensor eps({count, arch.latent_dim});
      for (Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
      z = reparametrize(post.mu, post.logvar, g.constant(std::move(eps)));
    }
    const Tensor& x_hat = decode(p, z, arch).value();
    const auto diff = (batch.matrix(count, per) - x_hat.matrix(count, per)).array().square();
    scores.segment(start, count) = diff.rowwise().mean();
  }
  return scores;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

json architecture_json(const VaeArchitecture& a) {
  return {{"variant", to_string(a.variant)},
          {"input_channels", a.input_channels},
          {"window_length", a.window_length},
          {"sampling_rate", a.sampling_rate},
          {"filter_count", a.filter_count},
          {"kernel_length", a.kernel_length},
          {"activation", to_string(a.activation)},
          {"block_activation", to_string(a.block_activation)},
          {"norm_axis", to_string(a.norm_axis)},
          {"norm_epsilon", a.norm_epsilon},
          {"latent_dim", a.latent_dim},
          {"conv_block_count", a.conv_block_count},
          {"channels_per_block", a.channels_per_block}};
}

VaeArchitecture architecture_from_json(const json& j) {
  VaeArchitecture a;
  a.variant = parse_variant(j.at("variant").get<std::string>());
  a.input_channels = j.at("input_channels").get<Index>();
  a.window_length = j.at("window_length").get<Index>();
  a.sampling_rate = j.at("sampling_rate").get<double>();
  a.filter_count = j.at("filter_count").get<Index>();
  a.kernel_length = j.at("kernel_length").get<Index>();
  a.activation = parse_activation(j.at("activation").get<std::string>());
  a.block_activation = parse_activation(j.at("block_activation").get<std::string>());
  a.norm_axis = parse_norm_axis(j.at("norm_axis").get<std::string>());
  a.norm_epsilon = j.at("norm_epsilon").get<double>();
  a.latent_dim = j.at("latent_dim").get<Index>();
  a.conv_block_count = j.at("conv_block_count").get<Index>();
  a.channels_per_block = j.at("channels_per_block").get<Index>();
  return a;
}

}  // namespace

void save_checkpoint(const VaeModel& model, std::ostream& out) {
  json meta;
  meta["architecture"] = architecture_json(model.architecture);
  meta["seed"] = model.seed;
  meta["best_epoch"] = model.best_epoch;
  meta["validation_indices"] = model.validation_indices;
  json history = json::array();
  for (const auto& h : model.history) {
    history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"val_loss", h.val_loss},
                       {"recon", h.recon}, {"kl", h.kl}});
  }
  meta["history"] = std::move(history);

  binio::write_magic(out, "SVAE");
  binio::write_le<std::uint32_t>(out, kCheckpointVersion);
  binio::write_string(out, meta.dump());
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters.size()));
  for (const auto& p : model.parameters) {
    binio::write_string(out, p.name);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (Index d : p.value.shape()) binio::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    binio::write_doubles(out, p.value.ptr(), static_cast<std::size_t>(p.value.size()));
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "failed to write checkpoint");
}

void save_checkpoint(const VaeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  save_checkpoint(model, out);
}

VaeModel load_checkpoint(std::istream& in) {
  binio::expect_magic(in, "SVAE");
  const auto version = binio::read_le<std::uint32_t>(in, "version");
  require(version == kCheckpointVersion, ErrorCode::kFormat,
          "unsupported SVAE version " + std::to_string(version));
  const std::string text = binio::read_string(in, "descriptor", 1ULL << 32);
  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed SVAE descriptor: ") + e.what());
  }
  VaeModel model;
  try {
    model.architecture = architecture_from_json(meta.at("architecture"));
    model.seed = meta.at("seed").get<std::uint64_t>();
    model.best_epoch = meta.at("best_epoch").get<Index>();
    model.validation_indices = meta.at("validation_indices").get<std::vector<Index>>();
    for (const auto& h : meta.at("history")) {
      model.history.push_back({h.at("epoch").get<Index>(), h.at("train_loss").get<double>(),
                               h.at("val_loss").get<double>(), h.at("recon").get<double>(),
                               h.at("kl").get<double>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("incomplete SVAE descriptor: ") + e.what());
  }
  model.architecture.validate();
  const auto sections = binio::read_le<std::uint32_t>(in, "section count");
  for (std::uint32_t s = 0; s < sections; ++s) {
    std::string name = binio::read_string(in, "section name", 4096);
    const auto rank = binio::read_le<std::uint32_t>(in, "section rank");
    require(rank <= 8, ErrorCode::kFormat, "implausible rank for section '" + name + "'");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<Index>(binio::read_le<std::uint64_t>(in, "section dims")));
    }
    Tensor t(shape);
    binio::read_doubles(in, t.ptr(), static_cast<std::size_t>(t.size()), "section data");
    model.parameters.add(std::move(name), std::move(t));
  }
  // Section names and shapes must match what the architecture builds.
  const VaeModel reference = init_model(model.architecture, 0);
  require(reference.parameters.size() == model.parameters.size(), ErrorCode::kFormat,
          "checkpoint parameter count does not match its architecture");
  for (std::size_t i = 0; i < reference.parameters.size(); ++i) {
    require(reference.parameters[i].name == model.parameters[i].name &&
                reference.parameters[i].value.shape() == model.parameters[i].value.shape(),
            ErrorCode::kFormat,
            "checkpoint section '" + model.parameters[i].name + "' does not match architecture");
  }
  return model;
}

VaeModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,recon,kl\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.val_loss) << ','
        << format_double(h.recon) << ',' << format_double(h.kl) << '\n';
  }
}

}  // namespace sincvae
