#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "seedsim/channel.hpp"
#include "seedsim/comm.hpp"
#include "seedsim/common.hpp"
#include "seedsim/dqn.hpp"
#include "seedsim/topology.hpp"

namespace seedsim {

struct EnvParams {
  int subframes_per_episode = 1000;
  int refresh_subframes = 100;  // mobility / channel update period
  double subframe_s = 1e-3;
};

inline double log_entry(double linear) { return std::log10(std::max(linear, 1e-30)); }

// State layout (dimension 4N + 2):
//   [0]                 log10 own V2V gain
//   [1, N]              log10 V2I-to-BS gains
//   [N+1]               log10 own-to-eavesdropper gain
//   [N+2, 2N+1]         log10 V2I-to-eavesdropper gains
//   [2N+2, 3N+1]        log10 interference per subchannel last subframe (0 before any)
//   [3N+2, 4N+1]        platoon neighbours on each subchannel last subframe
inline int state_dim(int num_subchannels) { return 4 * num_subchannels + 2; }

struct AgentAction {
  int subchannel = 0;
  int level = 0;  // index into the V2V power level table
};

using JointAction = std::vector<AgentAction>;

// Maps a network output index to (subchannel, power level).
class ActionCodec {
 public:
  enum class Kind {
    SubchannelAndPower,  // N x L outputs, index = subchannel * L + level
    SubchannelOnly,      // N outputs, power fixed at the role maximum
  };

  ActionCodec(Kind kind, const CommParams& p) : kind_(kind), comm_(p) {}

  Kind kind() const { return kind_; }
  int num_actions() const {
    return kind_ == Kind::SubchannelAndPower
               ? comm_.num_subchannels * comm_.num_power_levels()
               : comm_.num_subchannels;
  }

  int first_level(Role r) const {
    return r == Role::PlatoonMember ? comm_.member_first_level : 0;
  }

  AgentAction decode(int action, Role role) const {
    if (action < 0 || action >= num_actions()) throw Fault("ActionCodec: action out of range");
    if (kind_ == Kind::SubchannelOnly) return {action, first_level(role)};
    const int L = comm_.num_power_levels();
    return {action / L, action % L};
  }

  int encode(const AgentAction& a) const {
    if (kind_ == Kind::SubchannelOnly) return a.subchannel;
    return a.subchannel * comm_.num_power_levels() + a.level;
  }

  // Members may only use the lower power levels; everyone may use any subchannel.
  std::vector<char> mask(Role role) const {
    std::vector<char> m(static_cast<std::size_t>(num_actions()), 0);
    for (int a = 0; a < num_actions(); ++a) {
      const AgentAction d = decode(a, role);
      m[static_cast<std::size_t>(a)] = d.level >= first_level(role);
    }
    return m;
  }

 private:
  Kind kind_;
  CommParams comm_;
};

inline std::vector<char> action_mask(std::size_t m, const Topology& t, const CommParams& p) {
  return ActionCodec(ActionCodec::Kind::SubchannelAndPower, p).mask(t.link_role(m));
}

struct StepResult {
  Allocation allocation;
  Evaluation evaluation;
};

// The multi-agent vehicular environment: owns the moving topology, the shadow
// state and the per-agent history that feeds observations.
class Environment {
 public:
  Environment(Topology topo, const ChannelParams& ch, const CommParams& comm,
              const EnvParams& env, Rng rng)
      : topo_(std::move(topo)), channel_(ch), comm_(comm), env_(env), rng_(rng) {
    channel_.validate();
    comm_.validate();
    if (static_cast<int>(topo_.num_v2i()) != comm_.num_subchannels)
      throw Fault("Environment: V2I link count must equal the subchannel count");
    if (topo_.num_v2v() == 0) throw Fault("Environment: no V2V links");
    noise_mw_ = channel_.noise_mw();
    gains_ = compute_gains(topo_, shadow_, channel_, rng_);
    reset_history();
  }

  std::size_t num_agents() const { return topo_.num_v2v(); }
  int num_subchannels() const { return comm_.num_subchannels; }
  int state_dim() const { return seedsim::state_dim(comm_.num_subchannels); }
  const Topology& topology() const { return topo_; }
  const ChannelGains& gains() const { return gains_; }
  const CommParams& comm() const { return comm_; }
  double noise_mw() const { return noise_mw_; }
  std::int64_t subframe() const { return subframe_; }

  // Overrides the channel, e.g. for fixed-gain experiments.
  void set_gains(ChannelGains g) {
    if (g.num_v2v() != num_agents() || static_cast<int>(g.num_v2i()) != num_subchannels())
      throw Fault("Environment::set_gains: dimension mismatch");
    gains_ = std::move(g);
    frozen_ = true;
  }

  // Forget interference and occupancy history (start of an episode).
  void reset_history() {
    const auto M = static_cast<Eigen::Index>(num_agents());
    interference_ = Eigen::MatrixXd::Zero(M, comm_.num_subchannels);
    occupancy_ = Eigen::MatrixXd::Zero(M, comm_.num_subchannels);
    has_history_ = false;
  }

  Eigen::VectorXd observe(std::size_t m) const {
    if (m >= num_agents()) throw Fault("Environment::observe: agent index out of range");
    const int N = comm_.num_subchannels;
    Eigen::VectorXd s(state_dim());
    s(0) = log_entry(gains_.h_m(m));
    for (int n = 0; n < N; ++n) s(1 + n) = log_entry(gains_.h_n_b(n));
    s(N + 1) = log_entry(gains_.h_m_e(m));
    for (int n = 0; n < N; ++n) s(N + 2 + n) = log_entry(gains_.h_n_e(n));
    for (int n = 0; n < N; ++n)
      s(2 * N + 2 + n) = has_history_ ? log_entry(interference_(m, n)) : 0.0;
    for (int n = 0; n < N; ++n) s(3 * N + 2 + n) = occupancy_(m, n);
    return s;
  }

  std::vector<Eigen::VectorXd> observe_all() const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(num_agents());
    for (std::size_t m = 0; m < num_agents(); ++m) out.push_back(observe(m));
    return out;
  }

  Allocation build_allocation(const JointAction& joint) const {
    if (joint.size() != num_agents()) throw Fault("Environment: one action per agent required");
    std::vector<int> sub, lvl;
    for (const auto& a : joint) {
      sub.push_back(a.subchannel);
      lvl.push_back(a.level);
    }
    return Allocation::from_choices(sub, lvl, comm_);
  }

  // Evaluate the joint action on the current channel, record history, then
  // advance time (moving vehicles every refresh_subframes).
  StepResult step(const JointAction& joint) {
    StepResult res;
    res.allocation = build_allocation(joint);
    res.evaluation = evaluate(res.allocation, gains_, noise_mw_, comm_);
    record_history(res.allocation, joint);
    ++subframe_;
    if (!frozen_ && env_.refresh_subframes > 0 && subframe_ % env_.refresh_subframes == 0)
      refresh();
    return res;
  }

 private:
  void record_history(const Allocation& al, const JointAction& joint) {
    const std::size_t M = num_agents();
    const int N = comm_.num_subchannels;
    // Received power per subchannel from every V2V transmitter, per receiver.
    for (std::size_t m = 0; m < M; ++m) {
      for (int n = 0; n < N; ++n)
        interference_(m, n) = al.p_v2i_mw * gains_.h_n_m(n, m);
      for (std::size_t j = 0; j < M; ++j)
        if (j != m) interference_(m, joint[j].subchannel) += al.p_v2v_mw[j] * gains_.h_m_j(m, j);
    }
    occupancy_.setZero();
    for (std::size_t m = 0; m < M; ++m) {
      const auto& pid = topo_.vehicles[topo_.v2v_links[m].tx].platoon_id;
      if (!pid) continue;
      for (std::size_t j = 0; j < M; ++j) {
        if (j == m) continue;
        if (topo_.vehicles[topo_.v2v_links[j].tx].platoon_id == pid)
          occupancy_(m, joint[j].subchannel) += 1.0;
      }
    }
    has_history_ = true;
  }

  void refresh() {
    topo_ = advance(std::move(topo_), env_.refresh_subframes * env_.subframe_s);
    refresh_shadowing(topo_, shadow_, channel_, rng_);
    gains_ = compute_gains(topo_, shadow_, channel_, rng_);
  }

  Topology topo_;
  ChannelParams channel_;
  CommParams comm_;
  EnvParams env_;
  Rng rng_;
  ShadowState shadow_;
  ChannelGains gains_;
  double noise_mw_ = 0.0;
  Eigen::MatrixXd interference_;
  Eigen::MatrixXd occupancy_;
  bool has_history_ = false;
  bool frozen_ = false;
  std::int64_t subframe_ = 0;
};

// Per-subframe record kept for post-hoc verification of the reward rule.
struct SubframeRecord {
  std::int64_t episode = 0;
  std::int64_t subframe = 0;
  double reward = 0.0;
  double objective = 0.0;
  double zeta_v2v = 0.0;
  double zeta_v2i = 0.0;
  double min_secrecy = 0.0;
  double mean_secrecy = 0.0;
};

// Chooses joint actions and learns from outcomes. Implemented by the SEED
// learners here and by the baselines.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual JointAction act(const std::vector<Eigen::VectorXd>& states, double epsilon) = 0;
  // Stores the transition and trains; returns the per-agent losses of this
  // gradient step (empty when nothing was trained).
  virtual std::vector<double> learn(const std::vector<Eigen::VectorXd>& states,
                                    const JointAction& joint, double reward,
                                    const std::vector<Eigen::VectorXd>& next_states) = 0;
  virtual bool learns() const { return true; }
};

// One independent DQN per V2V link, all fed the shared reward.
class DqnController : public Controller {
 public:
  DqnController(const Topology& topo, ActionCodec codec, int state_dim, const DqnParams& p,
                Rng& rng)
      : codec_(std::move(codec)) {
    for (std::size_t m = 0; m < topo.num_v2v(); ++m) {
      roles_.push_back(topo.link_role(m));
      learners_.emplace_back(state_dim, codec_.num_actions(), p, rng.fork(m),
                             codec_.mask(roles_.back()));
    }
  }

  JointAction act(const std::vector<Eigen::VectorXd>& states, double epsilon) override {
    JointAction joint;
    for (std::size_t m = 0; m < learners_.size(); ++m)
      joint.push_back(codec_.decode(learners_[m].act(states[m], epsilon), roles_[m]));
    return joint;
  }

  std::vector<double> learn(const std::vector<Eigen::VectorXd>& states, const JointAction& joint,
                            double reward, const std::vector<Eigen::VectorXd>& next) override {
    std::vector<double> losses;
    for (std::size_t m = 0; m < learners_.size(); ++m) {
      learners_[m].remember({states[m], codec_.encode(joint[m]), reward, next[m]});
      if (auto loss = learners_[m].train()) losses.push_back(*loss);
    }
    return losses;
  }

  // Greedy joint action (epsilon = 0) without consuming exploration draws.
  JointAction greedy(const std::vector<Eigen::VectorXd>& states) const {
    JointAction joint;
    for (std::size_t m = 0; m < learners_.size(); ++m) {
      joint.push_back(codec_.decode(learners_[m].greedy(states[m]), roles_[m]));
    }
    return joint;
  }

  std::vector<DqnLearner>& learners() { return learners_; }
  const ActionCodec& codec() const { return codec_; }

 private:
  ActionCodec codec_;
  std::vector<Role> roles_;
  std::vector<DqnLearner> learners_;
};

struct EpisodeMetrics {
  int subframes = 0;
  double mean_reward = 0.0;
  double zeta_v2v = 0.0;
  double zeta_v2i = 0.0;
  double network_efficiency = 0.0;
  double mean_secrecy_rate = 0.0;
  double mean_loss = 0.0;  // 0 when no gradient step happened
  std::int64_t gradient_steps = 0;
  std::vector<double> step_losses;  // agent-averaged loss of each gradient step
};

// Epsilon as a function of the global subframe counter.
using EpsilonSchedule = std::function<double(std::int64_t)>;

// Runs one episode: observe -> act -> step -> store/train, with the shared
// reward broadcast to every agent.
inline EpisodeMetrics run_episode(Environment& env, Controller& ctl, int subframes,
                                  const EpsilonSchedule& epsilon, std::int64_t& global_step,
                                  std::int64_t episode_index = 0,
                                  std::vector<SubframeRecord>* log = nullptr) {
  EpisodeMetrics em;
  if (subframes <= 0) return em;
  env.reset_history();
  std::vector<double> agent_loss_sum(env.num_agents(), 0.0);
  std::vector<std::int64_t> agent_loss_n(env.num_agents(), 0);
  auto states = env.observe_all();
  for (int t = 0; t < subframes; ++t) {
    const JointAction joint = ctl.act(states, epsilon(global_step));
    const StepResult res = env.step(joint);
    auto next = env.observe_all();
    const auto& ev = res.evaluation;
    const std::vector<double> losses = ctl.learn(states, joint, ev.reward, next);
    if (!losses.empty()) {
      double s = 0.0;
      for (std::size_t m = 0; m < losses.size(); ++m) {
        s += losses[m];
        agent_loss_sum[m] += losses[m];
        ++agent_loss_n[m];
      }
      em.step_losses.push_back(s / static_cast<double>(losses.size()));
      ++em.gradient_steps;
    }
    em.mean_reward += ev.reward;
    em.zeta_v2v += ev.efficiency.zeta_v2v;
    em.zeta_v2i += ev.efficiency.zeta_v2i;
    em.network_efficiency += ev.efficiency.objective;
    const double sec = ev.rates.mean_secrecy();
    em.mean_secrecy_rate += sec;
    if (log) {
      const auto& r = ev.rates.r_m_sec;
      log->push_back({episode_index, t, ev.reward, ev.efficiency.objective,
                      ev.efficiency.zeta_v2v, ev.efficiency.zeta_v2i,
                      r.empty() ? 0.0 : *std::min_element(r.begin(), r.end()), sec});
    }
    states = std::move(next);
    ++global_step;
  }
  const double T = subframes;
  em.subframes = subframes;
  em.mean_reward /= T;
  em.zeta_v2v /= T;
  em.zeta_v2i /= T;
  em.network_efficiency /= T;
  em.mean_secrecy_rate /= T;
  double loss = 0.0;
  int agents_with_loss = 0;
  for (std::size_t m = 0; m < agent_loss_sum.size(); ++m) {
    if (agent_loss_n[m] == 0) continue;
    loss += agent_loss_sum[m] / static_cast<double>(agent_loss_n[m]);
    ++agents_with_loss;
  }
  em.mean_loss = agents_with_loss ? loss / agents_with_loss : 0.0;
  return em;
}

}  // namespace seedsim
