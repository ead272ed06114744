#include "szc/neural.hpp"

#include <cmath>
#include <stdexcept>

#include "szc/errors.hpp"

namespace szc {

DenseNet DenseNet::make(std::span<const int> architecture, std::mt19937_64& rng,
                        OutputActivation output, double output_scale) {
  if (architecture.size() < 2)
    throw std::domain_error("DenseNet: architecture needs at least input and output sizes");
  DenseNet net;
  net.output_activation = output;
  net.output_scale = output_scale;
  for (std::size_t l = 0; l + 1 < architecture.size(); ++l) {
    const int fan_in = architecture[l];
    const int fan_out = architecture[l + 1];
    if (fan_in < 1 || fan_out < 1) throw std::domain_error("DenseNet: layer sizes must be >= 1");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = uni(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

std::vector<int> DenseNet::architecture() const {
  std::vector<int> arch;
  arch.push_back(input_size());
  for (const auto& w : weights) arch.push_back(static_cast<int>(w.rows()));
  return arch;
}

bool DenseNet::same_architecture(const DenseNet& other) const {
  return architecture() == other.architecture();
}

bool DenseNet::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input, ForwardCache* cache) {
  if (input.size() != net.input_size())
    throw std::domain_error("forward: input length does not match the first layer");
  if (cache) {
    cache->inputs.assign(1, input);
    cache->pre.clear();
  }
  Eigen::VectorXd x = input;
  const int layers = net.layer_count();
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = net.weights[l] * x + net.biases[l];
    if (cache) cache->pre.push_back(z);
    if (l + 1 < layers) {
      x = z.cwiseMax(0.0);  // rectified linear
      if (cache) cache->inputs.push_back(x);
    } else {
      switch (net.output_activation) {
        case OutputActivation::kLinear: x = std::move(z); break;
        case OutputActivation::kTanhScaled: x = net.output_scale * z.array().tanh(); break;
      }
    }
  }
  return x;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (const auto& w : net.weights) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  g.input = Eigen::VectorXd::Zero(net.input_size());
  return g;
}

void Gradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
  input *= factor;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return input.size() == 0 || input.allFinite();
}

void backward_accumulate(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::VectorXd& output_gradient, Gradients& into) {
  const int layers = net.layer_count();
  if (static_cast<int>(cache.pre.size()) != layers ||
      static_cast<int>(cache.inputs.size()) != layers)
    throw std::domain_error("backward: cache does not match this network");
  if (output_gradient.size() != net.output_size())
    throw std::domain_error("backward: output gradient length mismatch");

  Eigen::VectorXd delta;
  switch (net.output_activation) {
    case OutputActivation::kLinear: delta = output_gradient; break;
    case OutputActivation::kTanhScaled: {
      const Eigen::ArrayXd th = cache.pre.back().array().tanh();
      delta = output_gradient.array() * net.output_scale * (1.0 - th * th);
      break;
    }
  }
  for (int l = layers - 1; l >= 0; --l) {
    into.weights[l].noalias() += delta * cache.inputs[l].transpose();
    into.biases[l] += delta;
    const Eigen::VectorXd upstream = net.weights[l].transpose() * delta;
    if (l > 0) {
      const Eigen::VectorXd gate = (cache.pre[l - 1].array() > 0.0).cast<double>();
      delta = upstream.cwiseProduct(gate);
    } else {
      into.input += upstream;
    }
  }
}

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::VectorXd& output_gradient) {
  Gradients g = Gradients::zeros_like(net);
  backward_accumulate(net, cache, output_gradient, g);
  return g;
}

AdamState AdamState::like(const DenseNet& net) {
  AdamState a;
  for (const auto& w : net.weights) {
    a.m_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    a.v_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    a.m_b.push_back(Eigen::VectorXd::Zero(b.size()));
    a.v_b.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  return a;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& adam) {
  if (grads.weights.size() != net.weights.size())
    throw std::domain_error("adam_step: gradient shape mismatch");
  if (!grads.all_finite())
    throw ConvergenceError("adam_step: non-finite gradient, update rejected");

  adam.step += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  const double lr = adam.learning_rate;

  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam.m_w[l] = adam.beta1 * adam.m_w[l] + (1.0 - adam.beta1) * grads.weights[l];
    adam.v_w[l] =
        adam.beta2 * adam.v_w[l].array() + (1.0 - adam.beta2) * grads.weights[l].array().square();
    net.weights[l].array() -= lr * (adam.m_w[l].array() / bc1) /
                              ((adam.v_w[l].array() / bc2).sqrt() + adam.epsilon);

    adam.m_b[l] = adam.beta1 * adam.m_b[l] + (1.0 - adam.beta1) * grads.biases[l];
    adam.v_b[l] =
        adam.beta2 * adam.v_b[l].array() + (1.0 - adam.beta2) * grads.biases[l].array().square();
    net.biases[l].array() -= lr * (adam.m_b[l].array() / bc1) /
                             ((adam.v_b[l].array() / bc2).sqrt() + adam.epsilon);
  }
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
  if (!target.same_architecture(online))
    throw std::domain_error("soft_update: architecture mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::domain_error("soft_update: tau must be in [0, 1]");
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = (1.0 - tau) * target.weights[l] + tau * online.weights[l];
    target.biases[l] = (1.0 - tau) * target.biases[l] + tau * online.biases[l];
  }
}

std::pair<double, Eigen::VectorXd> mse_loss(const Eigen::VectorXd& predicted,
                                            const Eigen::VectorXd& target) {
  if (predicted.size() != target.size()) throw std::domain_error("mse_loss: length mismatch");
  const Eigen::VectorXd diff = predicted - target;
  const double n = static_cast<double>(predicted.size());
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

}  // namespace szc
