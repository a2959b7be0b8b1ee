#include "sincvae/adam.hpp"

#include "sincvae/error.hpp"

#include <cmath>

namespace sincvae {

Tensor& ParameterSet::add(std::string name, Tensor value) {
  require(!contains(name), ErrorCode::kInvalidArgument, "duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

Tensor& ParameterSet::at(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  fail(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

Index ParameterSet::scalar_count() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

AdamState AdamState::for_parameters(const ParameterSet& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.first_moment.push_back(Eigen::VectorXd::Zero(p.value.size()));
    state.second_moment.push_back(Eigen::VectorXd::Zero(p.value.size()));
  }
  return state;
}

void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state) {
  require(grads.size() == params.size() && state.first_moment.size() == params.size() &&
              state.second_moment.size() == params.size(),
          ErrorCode::kShapeMismatch,
          "adam_step: " + std::to_string(params.size()) + " parameters, " +
              std::to_string(grads.size()) + " gradients, " +
              std::to_string(state.first_moment.size()) + " state slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape() ||
        state.first_moment[i].size() != params[i].value.size() ||
        state.second_moment[i].size() != params[i].value.size()) {
      fail(ErrorCode::kShapeMismatch, "adam_step: shape mismatch for '" + params[i].name +
                                          "': parameter " + shape_string(params[i].value.shape()) +
                                          " gradient " + shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      fail(ErrorCode::kNonFinite, "adam_step: non-finite gradient for '" + params[i].name + "'");
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::VectorXd& g = grads[i].data();
    Eigen::VectorXd& m = state.first_moment[i];
    Eigen::VectorXd& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    params[i].value.data().array() -=
        c.learning_rate * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

}  // namespace sincvae
