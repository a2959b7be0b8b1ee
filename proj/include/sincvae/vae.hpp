#pragma once

#include "sincvae/adam.hpp"
#include "sincvae/autodiff.hpp"
#include "sincvae/sinc_layer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sincvae {

enum class Variant { kPlain, kSinc };
enum class Activation { kRelu, kTanh, kIdentity };
// Axes normalized by the layer norm that follows the sinc layer.
enum class NormAxis { kTime, kChannelTime };

const char* to_string(Variant v);
const char* to_string(Activation a);
const char* to_string(NormAxis a);
Variant parse_variant(const std::string& s);
Activation parse_activation(const std::string& s);
NormAxis parse_norm_axis(const std::string& s);

// Encoder: [sinc -> layer norm -> activation] -> blocks of (conv k=3,
// stride 2, block activation) -> flatten -> dense mu / logvar heads.
// Decoder: dense -> reshape -> blocks of (upsample x2, crop, conv k=3, block
// activation) -> linear conv to the input channels.
struct VaeArchitecture {
  Variant variant = Variant::kSinc;
  Index input_channels = 1;
  Index window_length = 128;
  double sampling_rate = 128.0;
  Index filter_count = 8;
  Index kernel_length = 31;
  Activation activation = Activation::kIdentity;
  Activation block_activation = Activation::kRelu;
  NormAxis norm_axis = NormAxis::kTime;
  double norm_epsilon = 1e-5;
  Index latent_dim = 8;
  Index conv_block_count = 2;
  Index channels_per_block = 16;

  void validate() const;
  // Time lengths after each encoder block: [window, ceil(window/2), ...].
  std::vector<Index> block_lengths() const;
  Index flat_features() const;
  Shape input_shape(Index batch) const { return {batch, input_channels, window_length}; }
};

struct TrainConfig {
  double learning_rate = 0.0005;
  Index batch_size = 128;
  Index max_epochs = 1000;
  Index patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double recon = 0.0;  // validation reconstruction term
  double kl = 0.0;     // validation KL term
};

struct VaeModel {
  VaeArchitecture architecture;
  ParameterSet parameters;
  std::vector<EpochRecord> history;
  std::vector<Index> validation_indices;
  Index best_epoch = -1;
  std::uint64_t seed = 0;

  SincFilterbankParams filterbank() const;
};

VaeModel init_model(const VaeArchitecture& arch, std::uint64_t seed);

// Parameters of a model bound into one graph, by name.
class BoundParameters {
 public:
  BoundParameters(ad::Graph& g, const ParameterSet& params, bool trainable);
  // Uses existing graph nodes; vars[i] stands for params[i].
  BoundParameters(const ParameterSet& params, std::vector<ad::Var> vars);
  ad::Var operator()(const std::string& name) const;
  const std::vector<ad::Var>& vars() const { return vars_; }

 private:
  const ParameterSet* params_;
  std::vector<ad::Var> vars_;
};

struct Posterior {
  ad::Var mu;
  ad::Var logvar;
};

struct ElboTerms {
  ad::Var total;
  ad::Var recon;
  ad::Var kl;
};

namespace ad {
Var apply_activation(Var x, Activation a);
}

Posterior encode(const BoundParameters& p, ad::Var x, const VaeArchitecture& arch);
// z = mu + exp(logvar / 2) * eps
ad::Var reparametrize(ad::Var mu, ad::Var logvar, ad::Var eps);
ad::Var decode(const BoundParameters& p, ad::Var z, const VaeArchitecture& arch);
// recon = mean squared error; kl = batch mean of
// 1/2 sum_i (mu_i^2 + exp(logvar_i) - 1 - logvar_i); total = recon + kl.
ElboTerms elbo_loss(ad::Var x, ad::Var x_hat, ad::Var mu, ad::Var logvar);

// Full forward pass; `eps` of shape [n, latent] or nullopt for eps = 0.
struct ForwardResult {
  Posterior posterior;
  ad::Var z;
  ad::Var reconstruction;
  ElboTerms loss;
};
ForwardResult forward(const BoundParameters& p, ad::Var x, const VaeArchitecture& arch,
                      std::optional<ad::Var> eps);

// Tensor-level conveniences (no gradients).
std::pair<Tensor, Tensor> encode(const Tensor& x, const VaeModel& model);
Tensor reparametrize(const Tensor& mu, const Tensor& logvar, const Tensor& eps);
Tensor decode(const Tensor& z, const VaeModel& model);
struct ElboValues {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};
ElboValues elbo_loss(const Tensor& x, const Tensor& x_hat, const Tensor& mu, const Tensor& logvar);

// Stops once `patience` consecutive epochs fail to improve on the best loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(Index patience) : patience_(patience) {}
  // Records one epoch's validation loss; returns true when training should stop.
  bool update(double loss);
  bool improved() const { return improved_; }
  Index best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  Index patience_;
  Index epoch_ = -1;
  Index best_epoch_ = -1;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

// Trains on `windows` [count, channels, length] (normal data only). Restores
// the best-validation parameters before returning.
VaeModel train(const Tensor& windows, const TrainConfig& config, const VaeArchitecture& arch);

struct ScoreOptions {
  bool stochastic = false;  // sample eps instead of using the posterior mean
  std::uint64_t seed = 0;
  Index batch_size = 256;
};

// Per-window reconstruction MSE.
Eigen::VectorXd reconstruct_mse(const Tensor& windows, const VaeModel& model,
                                const ScoreOptions& options = {});

// Mean ELBO terms over a window set with eps = 0.
ElboValues evaluate_loss(const Tensor& windows, const VaeModel& model, Index batch_size = 256);

// Copies windows[indices] into a new [k, c, t] tensor.
Tensor gather_windows(const Tensor& windows, const std::vector<Index>& indices);

// Checkpoint container: "SVAE", version, JSON descriptor, named float64 blobs.
void save_checkpoint(const VaeModel& model, std::ostream& out);
void save_checkpoint(const VaeModel& model, const std::string& path);
VaeModel load_checkpoint(std::istream& in);
VaeModel load_checkpoint(const std::string& path);

// `epoch,train_loss,val_loss,recon,kl`
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace sincvae
