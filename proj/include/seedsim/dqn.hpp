#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedsim/common.hpp"

namespace seedsim {

struct DqnParams {
  std::vector<int> hidden{500, 250, 120};
  double learning_rate = 0.01;
  double rmsprop_decay = 0.9;
  double rmsprop_eps = 1e-8;
  double gamma = 0.5;
  int batch_size = 2000;
  int replay_capacity = 20000;
  int target_update_steps = 100;
  double epsilon_start = 1.0;
  double epsilon_end = 0.02;
  double epsilon_decay_fraction = 0.8;
  // Observations are multiplied by this before entering the networks.
  double input_scale = 1.0;

  void validate() const {
    if (hidden.empty()) throw Fault("dqn: need at least one hidden layer");
    for (int h : hidden)
      if (h <= 0) throw Fault("dqn: hidden widths must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Fault("dqn: gamma must lie in [0, 1]");
    if (batch_size <= 0) throw Fault("dqn: batch size must be positive");
    if (replay_capacity < batch_size) throw Fault("dqn: replay capacity below batch size");
    if (target_update_steps <= 0) throw Fault("dqn: target update period must be positive");
    if (!(learning_rate > 0.0)) throw Fault("dqn: learning rate must be positive");
    if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0))
      throw Fault("dqn: RMSProp decay must lie in [0, 1)");
  }
};

// Linear schedule from start to end over the first `fraction` of total steps.
inline double epsilon_at(std::int64_t step, std::int64_t total_steps, const DqnParams& p) {
  const double horizon = p.epsilon_decay_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0 || static_cast<double>(step) >= horizon) return p.epsilon_end;
  const double f = static_cast<double>(step) / horizon;
  return p.epsilon_start + (p.epsilon_end - p.epsilon_start) * f;
}

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Per-parameter tensors shaped like the network's layers; used for gradients
// and for the RMSProp accumulators.
using LayerTensors = std::vector<DenseLayer>;

// Fully connected network: ReLU on hidden layers, linear output.
class QNetwork {
 public:
  QNetwork() = default;

  // dims = {input, hidden..., output}
  explicit QNetwork(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw Fault("QNetwork: need input and output dimensions");
    for (int d : dims_)
      if (d <= 0) throw Fault("QNetwork: layer widths must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      layers_.push_back({Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]),
                         Eigen::VectorXd::Zero(dims_[l + 1])});
    }
    accum_ = zeros_like();
  }

  static QNetwork with_hidden(int input, const std::vector<int>& hidden, int output) {
    std::vector<int> dims{input};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(output);
    return QNetwork(std::move(dims));
  }

  // Glorot-uniform weights, zero biases.
  void initialize(Rng& rng) {
    for (auto& L : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(L.weight.rows() + L.weight.cols()));
      for (Eigen::Index j = 0; j < L.weight.cols(); ++j)
        for (Eigen::Index i = 0; i < L.weight.rows(); ++i)
          L.weight(i, j) = rng.uniform(-limit, limit);
      L.bias.setZero();
    }
    accum_ = zeros_like();
  }

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  LayerTensors& rmsprop_accumulators() { return accum_; }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& L : layers_) n += L.weight.size() + L.bias.size();
    return n;
  }

  LayerTensors zeros_like() const {
    LayerTensors t;
    for (const auto& L : layers_)
      t.push_back({Eigen::MatrixXd::Zero(L.weight.rows(), L.weight.cols()),
                   Eigen::VectorXd::Zero(L.bias.size())});
    return t;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& state) const {
    if (state.size() != input_dim()) throw Fault("QNetwork::forward: state dimension mismatch");
    Eigen::VectorXd x = state;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].weight * x + layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
      x = std::move(z);
    }
    return x;
  }

  // Column-per-sample forward pass. When `acts` is given it receives the input
  // and every layer's post-activation output (acts[0] = input).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& states,
                                std::vector<Eigen::MatrixXd>* acts = nullptr) const {
    if (states.rows() != input_dim())
      throw Fault("QNetwork::forward_batch: state dimension mismatch");
    if (acts) {
      acts->clear();
      acts->push_back(states);
    }
    Eigen::MatrixXd x = states;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = layers_[l].weight * x;
      z.colwise() += layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
      x = std::move(z);
      if (acts) acts->push_back(x);
    }
    return x;
  }

  // Copies weights and biases (not optimizer state).
  void copy_parameters_from(const QNetwork& other) {
    if (other.dims_ != dims_) throw Fault("QNetwork: cannot copy between different shapes");
    layers_ = other.layers_;
  }

  bool same_parameters(const QNetwork& other) const {
    if (other.dims_ != dims_) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      if (layers_[l].weight != other.layers_[l].weight ||
          layers_[l].bias != other.layers_[l].bias)
        return false;
    return true;
  }

  // Checkpoint format (little-endian):
  //   8 bytes  magic "SEEDQNN1"
  //   uint32   number of dims D, then D x uint32 dims
  //   for each layer: weight (out x in, row-major float64), bias (float64)
  void save(const std::string& path) const {
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint writer assumes a little-endian host");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Fault("QNetwork::save: cannot open " + path);
    os.write(kMagic, 8);
    write_u32(os, static_cast<std::uint32_t>(dims_.size()));
    for (int d : dims_) write_u32(os, static_cast<std::uint32_t>(d));
    for (const auto& L : layers_) {
      for (Eigen::Index i = 0; i < L.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < L.weight.cols(); ++j) write_f64(os, L.weight(i, j));
      for (Eigen::Index i = 0; i < L.bias.size(); ++i) write_f64(os, L.bias(i));
    }
    if (!os) throw Fault("QNetwork::save: write failed for " + path);
  }

  static QNetwork load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Fault("QNetwork::load: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
      throw Fault("QNetwork::load: bad magic in " + path);
    const std::uint32_t n = read_u32(is);
    if (n < 2 || n > 64) throw Fault("QNetwork::load: implausible layer count");
    std::vector<int> dims;
    for (std::uint32_t k = 0; k < n; ++k) dims.push_back(static_cast<int>(read_u32(is)));
    QNetwork net(dims);
    for (auto& L : net.layers_) {
      for (Eigen::Index i = 0; i < L.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < L.weight.cols(); ++j) L.weight(i, j) = read_f64(is);
      for (Eigen::Index i = 0; i < L.bias.size(); ++i) L.bias(i) = read_f64(is);
    }
    if (!is) throw Fault("QNetwork::load: truncated file " + path);
    return net;
  }

 private:
  static constexpr char kMagic[9] = "SEEDQNN1";

  static void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static double read_f64(std::istream& is) {
    double v = 0.0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }

  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
  LayerTensors accum_;
};

struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_state;
};

// Index of the largest allowed entry; lowest index wins ties. An empty mask
// allows everything.
inline int masked_argmax(const Eigen::VectorXd& q, std::span<const char> allowed = {}) {
  int best = -1;
  double best_q = -std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (!allowed.empty() && !allowed[static_cast<std::size_t>(a)]) continue;
    if (best < 0 || q(a) > best_q) {
      best = static_cast<int>(a);
      best_q = q(a);
    }
  }
  if (best < 0) throw Fault("masked_argmax: no allowed action");
  return best;
}

struct LossAndGradients {
  double loss = 0.0;
  LayerTensors gradients;
};

// Mean squared TD error over the batch. The bootstrap target comes from
// `target` and is held constant; `allowed` restricts the max over next actions.
inline LossAndGradients loss_and_gradients(const QNetwork& net, const QNetwork& target,
                                           std::span<const Transition* const> batch,
                                           double gamma,
                                           std::span<const char> allowed = {}) {
  if (batch.empty()) throw Fault("loss_and_gradients: empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const int in = net.input_dim();
  Eigen::MatrixXd s(in, B), s_next(in, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    s.col(i) = batch[i]->state;
    s_next.col(i) = batch[i]->next_state;
  }
  const Eigen::MatrixXd q_next = target.forward_batch(s_next);
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd q = net.forward_batch(s, &acts);

  LossAndGradients out;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), B);
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const int a = batch[i]->action;
    if (a < 0 || a >= q.rows()) throw Fault("loss_and_gradients: action out of range");
    const double y = batch[i]->reward + gamma * q_next(masked_argmax(q_next.col(i), allowed), i);
    const double td = q(a, i) - y;
    sum_sq += td * td;
    delta(a, i) = 2.0 * td / static_cast<double>(B);
  }
  out.loss = sum_sq / static_cast<double>(B);

  const auto& layers = net.layers();
  out.gradients = net.zeros_like();
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.gradients[l].weight.noalias() = delta * acts[l].transpose();
    out.gradients[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

inline void rmsprop_step(QNetwork& net, const LayerTensors& grads, double lr, double decay,
                         double eps) {
  auto& layers = net.layers();
  auto& acc = net.rmsprop_accumulators();
  if (grads.size() != layers.size() || acc.size() != layers.size())
    throw Fault("rmsprop_step: gradient shape mismatch");
  auto update = [&](auto& param, auto& a, const auto& g) {
    if (param.size() != g.size() || a.size() != g.size())
      throw Fault("rmsprop_step: gradient shape mismatch");
    a.array() = decay * a.array() + (1.0 - decay) * g.array().square();
    param.array() -= lr * g.array() / (a.array().sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, acc[l].weight, grads[l].weight);
    update(layers[l].bias, acc[l].bias, grads[l].bias);
  }
}

// Epsilon-greedy over the allowed actions. Exactly one uniform draw decides
// explore vs exploit; exploration makes one more draw for the action.
inline int select_action(const QNetwork& net, const Eigen::VectorXd& state, double epsilon,
                         std::span<const char> allowed, Rng& rng) {
  std::vector<int> legal;
  for (std::size_t a = 0; a < allowed.size(); ++a)
    if (allowed[a]) legal.push_back(static_cast<int>(a));
  if (legal.empty()) throw Fault("select_action: empty action mask");
  if (rng.uniform() < epsilon) return legal[rng.below(legal.size())];
  return masked_argmax(net.forward(state), allowed);
}

// Copies main into target when step is a multiple of period. Returns whether a
// copy happened.
inline bool sync_target(const QNetwork& net, QNetwork& target, std::int64_t step,
                        std::int64_t period) {
  if (period <= 0 || step % period != 0) return false;
  target.copy_parameters_from(net);
  return true;
}

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Fault("ReplayBuffer: capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  // `count` distinct transitions chosen uniformly (Floyd's algorithm).
  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
    if (count > data_.size()) throw Fault("ReplayBuffer::sample: not enough transitions");
    const std::size_t n = data_.size();
    std::vector<char> taken(n, 0);
    std::vector<const Transition*> out;
    out.reserve(count);
    for (std::size_t j = n - count; j < n; ++j) {
      std::size_t t = rng.below(j + 1);
      if (taken[t]) t = j;
      taken[t] = 1;
      out.push_back(&data_[t]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

// One agent's learning state: main and target networks plus its replay memory.
class DqnLearner {
 public:
  DqnLearner(int state_dim, int num_actions, const DqnParams& p, Rng rng,
             std::vector<char> allowed = {})
      : params_(p),
        net_(QNetwork::with_hidden(state_dim, p.hidden, num_actions)),
        target_(net_),
        replay_(static_cast<std::size_t>(p.replay_capacity)),
        allowed_(std::move(allowed)),
        rng_(rng) {
    if (allowed_.empty()) allowed_.assign(static_cast<std::size_t>(num_actions), 1);
    if (allowed_.size() != static_cast<std::size_t>(num_actions))
      throw Fault("DqnLearner: mask size differs from action count");
    net_.initialize(rng_);
    target_.copy_parameters_from(net_);
  }

  int act(const Eigen::VectorXd& state, double epsilon) {
    return select_action(net_, params_.input_scale * state, epsilon, allowed_, rng_);
  }

  int greedy(const Eigen::VectorXd& state) const {
    return masked_argmax(net_.forward(params_.input_scale * state), allowed_);
  }

  void remember(Transition t) {
    if (params_.input_scale != 1.0) {
      t.state *= params_.input_scale;
      t.next_state *= params_.input_scale;
    }
    replay_.push(std::move(t));
  }

  // One gradient step when the replay memory holds a full batch.
  std::optional<double> train() {
    if (replay_.size() < static_cast<std::size_t>(params_.batch_size)) return std::nullopt;
    const auto batch = replay_.sample(static_cast<std::size_t>(params_.batch_size), rng_);
    auto lg = loss_and_gradients(net_, target_, batch, params_.gamma, allowed_);
    rmsprop_step(net_, lg.gradients, params_.learning_rate, params_.rmsprop_decay,
                 params_.rmsprop_eps);
    ++steps_;
    sync_target(net_, target_, steps_, params_.target_update_steps);
    return lg.loss;
  }

  const QNetwork& network() const { return net_; }
  QNetwork& network() { return net_; }
  const QNetwork& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  const std::vector<char>& allowed() const { return allowed_; }
  std::int64_t gradient_steps() const { return steps_; }

 private:
  DqnParams params_;
  QNetwork net_;
  QNetwork target_;
  ReplayBuffer replay_;
  std::vector<char> allowed_;
  Rng rng_;
  std::int64_t steps_ = 0;
};

}  // namespace seedsim
