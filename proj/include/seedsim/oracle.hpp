#pragma once

#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "seedsim/comm.hpp"
#include "seedsim/env.hpp"

namespace seedsim {

inline constexpr std::uint64_t kOracleMaxJointActions = 1'000'000;

struct OracleResult {
  JointAction best;
  double best_reward = -std::numeric_limits<double>::infinity();
  std::uint64_t evaluated = 0;
};

// Enumerates every joint action (agent 0 most significant, actions in
// increasing index order) and keeps the first one achieving the maximum reward.
inline OracleResult exhaustive_best(const ChannelGains& gains, const std::vector<Role>& roles,
                                    const CommParams& comm, double noise_mw,
                                    ActionCodec::Kind kind = ActionCodec::Kind::SubchannelAndPower) {
  const ActionCodec codec(kind, comm);
  if (roles.size() != gains.num_v2v()) throw Fault("exhaustive_best: role count mismatch");
  std::vector<std::vector<int>> legal(roles.size());
  std::uint64_t total = 1;
  for (std::size_t m = 0; m < roles.size(); ++m) {
    const auto mask = codec.mask(roles[m]);
    for (std::size_t a = 0; a < mask.size(); ++a)
      if (mask[a]) legal[m].push_back(static_cast<int>(a));
    if (legal[m].empty()) throw Fault("exhaustive_best: empty action mask");
    if (total > kOracleMaxJointActions / legal[m].size()) {
      std::ostringstream os;
      os << "exhaustive_best: joint action space too large (more than "
         << kOracleMaxJointActions << " joint actions for " << roles.size() << " agents)";
      throw Fault(os.str());
    }
    total *= legal[m].size();
  }

  OracleResult res;
  std::vector<std::size_t> idx(roles.size(), 0);
  JointAction joint(roles.size());
  std::vector<int> sub(roles.size()), lvl(roles.size());
  for (std::uint64_t k = 0; k < total; ++k) {
    for (std::size_t m = 0; m < roles.size(); ++m) {
      joint[m] = codec.decode(legal[m][idx[m]], roles[m]);
      sub[m] = joint[m].subchannel;
      lvl[m] = joint[m].level;
    }
    const double r = evaluate(Allocation::from_choices(sub, lvl, comm), gains, noise_mw, comm).reward;
    ++res.evaluated;
    if (r > res.best_reward) {
      res.best_reward = r;
      res.best = joint;
    }
    // odometer increment, last agent fastest
    for (std::size_t m = roles.size(); m-- > 0;) {
      if (++idx[m] < legal[m].size()) break;
      idx[m] = 0;
    }
  }
  return res;
}

inline OracleResult exhaustive_best(const ChannelGains& gains, const Topology& topo,
                                    const CommParams& comm, double noise_mw,
                                    ActionCodec::Kind kind = ActionCodec::Kind::SubchannelAndPower) {
  std::vector<Role> roles;
  for (std::size_t m = 0; m < topo.num_v2v(); ++m) roles.push_back(topo.link_role(m));
  return exhaustive_best(gains, roles, comm, noise_mw, kind);
}

}  // namespace seedsim
