#pragma once

#include "sincvae/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sincvae {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Ordered collection of named parameter tensors. Order is insertion order and
// defines the layout of gradients and optimizer state.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor value);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  NamedTensor& operator[](std::size_t i) { return entries_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Number of scalar parameters.
  Index scalar_count() const;

 private:
  std::vector<NamedTensor> entries_;
};

struct AdamConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
  std::int64_t step = 0;

  static AdamState for_parameters(const ParameterSet& params, const AdamConfig& config = {});
};

// One Adam update with bias correction. `grads[i]` pairs with `params[i]`.
// All gradients are validated before any parameter changes.
void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace sincvae
