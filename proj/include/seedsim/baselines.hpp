#pragma once

#include <vector>

#include "seedsim/env.hpp"

namespace seedsim {

// Independent uniform draw from each agent's allowed action set.
inline std::vector<int> random_policy(const std::vector<std::vector<char>>& masks, Rng& rng) {
  std::vector<int> actions;
  actions.reserve(masks.size());
  for (const auto& mask : masks) {
    std::vector<int> legal;
    for (std::size_t a = 0; a < mask.size(); ++a)
      if (mask[a]) legal.push_back(static_cast<int>(a));
    if (legal.empty()) throw Fault("random_policy: empty action mask");
    actions.push_back(legal[rng.below(legal.size())]);
  }
  return actions;
}

class RandomController : public Controller {
 public:
  RandomController(const Topology& topo, const CommParams& comm, Rng rng)
      : codec_(ActionCodec::Kind::SubchannelAndPower, comm), rng_(rng) {
    for (std::size_t m = 0; m < topo.num_v2v(); ++m) {
      roles_.push_back(topo.link_role(m));
      masks_.push_back(codec_.mask(roles_.back()));
    }
  }

  JointAction act(const std::vector<Eigen::VectorXd>&, double) override {
    const auto idx = random_policy(masks_, rng_);
    JointAction joint;
    for (std::size_t m = 0; m < idx.size(); ++m) joint.push_back(codec_.decode(idx[m], roles_[m]));
    return joint;
  }

  std::vector<double> learn(const std::vector<Eigen::VectorXd>&, const JointAction&, double,
                            const std::vector<Eigen::VectorXd>&) override {
    return {};
  }
  bool learns() const override { return false; }

 private:
  ActionCodec codec_;
  std::vector<Role> roles_;
  std::vector<std::vector<char>> masks_;
  Rng rng_;
};

// DQN without power allocation: the networks pick only a subchannel and the
// transmit power is the role's maximum level.
inline DqnController make_wopa_controller(const Topology& topo, const CommParams& comm,
                                          const DqnParams& p, Rng& rng) {
  return DqnController(topo, ActionCodec(ActionCodec::Kind::SubchannelOnly, comm),
                       state_dim(comm.num_subchannels), p, rng);
}

inline DqnController make_seed_controller(const Topology& topo, const CommParams& comm,
                                          const DqnParams& p, Rng& rng) {
  return DqnController(topo, ActionCodec(ActionCodec::Kind::SubchannelAndPower, comm),
                       state_dim(comm.num_subchannels), p, rng);
}

// Greedy wopa joint action for the given states (epsilon-greedy when
// epsilon > 0, drawing from each learner's own stream).
inline JointAction dqn_wopa_policy(DqnController& wopa, const std::vector<Eigen::VectorXd>& states,
                                   double epsilon = 0.0) {
  if (wopa.codec().kind() != ActionCodec::Kind::SubchannelOnly)
    throw Fault("dqn_wopa_policy: controller is not subchannel-only");
  return epsilon > 0.0 ? wopa.act(states, epsilon) : wopa.greedy(states);
}

}  // namespace seedsim
