#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace szc {

enum class OutputActivation {
  kLinear,      // Q-networks, critic
  kTanhScaled,  // actor: scale * tanh(z), saturating at +-scale
};

// Dense feed-forward network with rectified-linear hidden units.  Weights are
// fan_out x fan_in; double precision throughout.
struct DenseNet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  OutputActivation output_activation = OutputActivation::kLinear;
  double output_scale = 1.0;

  // Uniform +-sqrt(6/(fan_in+fan_out)) weight init, zero biases.
  static DenseNet make(std::span<const int> architecture, std::mt19937_64& rng,
                       OutputActivation output = OutputActivation::kLinear,
                       double output_scale = 1.0);

  int input_size() const { return static_cast<int>(weights.front().cols()); }
  int output_size() const { return static_cast<int>(weights.back().rows()); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::vector<int> architecture() const;
  bool same_architecture(const DenseNet& other) const;
  bool all_finite() const;
};

struct ForwardCache {
  std::vector<Eigen::VectorXd> inputs;  // inputs[l] feeds layer l; inputs[0] is the net input
  std::vector<Eigen::VectorXd> pre;     // pre-activation of layer l
};

// Returns the network output; fills cache for backward when given.
Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input,
                        ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input;  // dL/d(input), for chained networks

  static Gradients zeros_like(const DenseNet& net);
  void scale(double factor);
  bool all_finite() const;
};

// Exact reverse-mode gradients of a scalar loss given dL/d(output).
Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::VectorXd& output_gradient);

// Same, accumulating into an existing gradient buffer (batch loops).
void backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::VectorXd& output_gradient, Gradients& into);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState like(const DenseNet& net);
};

// One bias-corrected Adam update.  Non-finite gradients reject the update and
// throw; the parameters and moments are left untouched.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& adam);

// target <- (1 - tau) * target + tau * online, element-wise.
void soft_update(DenseNet& target, const DenseNet& online, double tau);

// Mean squared error and its gradient 2 (p - t) / len with respect to p.
std::pair<double, Eigen::VectorXd> mse_loss(const Eigen::VectorXd& predicted,
                                            const Eigen::VectorXd& target);

}  // namespace szc
