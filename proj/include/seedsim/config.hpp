#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seedsim/channel.hpp"
#include "seedsim/comm.hpp"
#include "seedsim/common.hpp"
#include "seedsim/dqn.hpp"
#include "seedsim/env.hpp"
#include "seedsim/topology.hpp"

namespace seedsim {

enum class Policy { Seed, DqnWopa, Random };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::Seed: return "seed";
    case Policy::DqnWopa: return "dqn-wopa";
    case Policy::Random: return "random";
  }
  return "?";
}

inline Policy parse_policy(std::string_view s) {
  if (s == "seed") return Policy::Seed;
  if (s == "dqn-wopa" || s == "wopa") return Policy::DqnWopa;
  if (s == "random") return Policy::Random;
  throw Fault("unknown policy '" + std::string(s) + "' (expected seed, dqn-wopa or random)");
}

struct ExperimentConfig {
  ChannelParams channel;
  ScenarioParams scenario;
  CommParams comm;
  DqnParams dqn;
  EnvParams env;

  std::vector<int> vehicle_counts{20, 40, 60, 80, 100};
  std::vector<std::uint64_t> seeds{0};
  std::vector<Policy> policies{Policy::Seed, Policy::DqnWopa, Policy::Random};
  int episodes = 300;
  double final_window_fraction = 0.1;
  std::string output_dir = "out";
  bool log_subframes = false;
  bool save_checkpoints = false;
  int threads = 1;
  // Set when a config file names lambda_beta explicitly; checked in validate().
  double declared_lambda_beta = std::numeric_limits<double>::quiet_NaN();

  void validate() const {
    if (!std::isnan(declared_lambda_beta) &&
        std::abs(comm.lambda_alpha + declared_lambda_beta - 1.0) > 1e-12)
      throw Fault("lambda_alpha + lambda_beta must equal 1");
    channel.validate();
    comm.validate();
    dqn.validate();
    if (episodes < 0) throw Fault("episodes must be non-negative");
    if (env.subframes_per_episode < 0) throw Fault("subframes_per_episode must be non-negative");
    if (env.refresh_subframes < 0) throw Fault("refresh_subframes must be non-negative");
    if (!(env.subframe_s > 0.0)) throw Fault("subframe duration must be positive");
    if (vehicle_counts.empty()) throw Fault("vehicle_counts is empty");
    for (int v : vehicle_counts)
      if (v <= 0) throw Fault("vehicle counts must be positive");
    if (seeds.empty()) throw Fault("seeds is empty");
    if (policies.empty()) throw Fault("policies is empty");
    if (!(final_window_fraction > 0.0 && final_window_fraction <= 1.0))
      throw Fault("final_window_fraction must lie in (0, 1]");
    if (scenario.platoon_size < 2) throw Fault("platoon_size must be at least 2");
    if (scenario.lanes_per_direction <= 0) throw Fault("lanes_per_direction must be positive");
    if (threads < 1) throw Fault("threads must be at least 1");
  }
};

namespace cfg {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto part = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!part.empty()) out.push_back(part);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt_precision(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline double parse_double(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw Fault("config: key '" + key + "' expects a number, got '" + t + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  Int v = 0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw Fault("config: key '" + key + "' expects an integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(const std::string& key, std::string_view s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw Fault("config: key '" + key + "' expects true/false, got '" + t + "'");
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

struct Key {
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

inline Key real_key(std::string name, std::string help,
                    std::function<double&(ExperimentConfig&)> ref) {
  auto get = [ref](const ExperimentConfig& c) {
    return fmt_double(ref(const_cast<ExperimentConfig&>(c)));
  };
  auto set = [ref, name](ExperimentConfig& c, std::string_view v) { ref(c) = parse_double(name, v); };
  return {std::move(name), std::move(help), get, set};
}

inline Key int_key(std::string name, std::string help, std::function<int&(ExperimentConfig&)> ref) {
  auto get = [ref](const ExperimentConfig& c) {
    return std::to_string(ref(const_cast<ExperimentConfig&>(c)));
  };
  auto set = [ref, name](ExperimentConfig& c, std::string_view v) { ref(c) = parse_int<int>(name, v); };
  return {std::move(name), std::move(help), get, set};
}

inline Key bool_key(std::string name, std::string help, std::function<bool&(ExperimentConfig&)> ref) {
  auto get = [ref](const ExperimentConfig& c) {
    return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
  };
  auto set = [ref, name](ExperimentConfig& c, std::string_view v) { ref(c) = parse_bool(name, v); };
  return {std::move(name), std::move(help), get, set};
}

// Accepted only with a single value; documents a fixed modelling choice.
inline Key fixed_key(std::string name, std::string help, std::string value) {
  auto get = [value](const ExperimentConfig&) { return value; };
  auto set = [value, name](ExperimentConfig&, std::string_view v) {
    if (trim(v) != value)
      throw Fault("config: key '" + name + "' only supports '" + value + "'");
  };
  return {std::move(name), std::move(help), get, set};
}

inline const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    // Communication parameters
    k.push_back(real_key("carrier_frequency_hz", "carrier frequency",
                         [](C& c) -> double& { return c.channel.carrier_frequency_hz; }));
    k.push_back(real_key("total_bandwidth_hz", "total bandwidth",
                         [](C& c) -> double& { return c.comm.total_bandwidth_hz; }));
    k.push_back(int_key("num_subchannels", "number of subchannels (= V2I links)",
                        [](C& c) -> int& { return c.comm.num_subchannels; }));
    k.push_back(real_key("v2i_power_dbm", "V2I transmit power",
                         [](C& c) -> double& { return c.comm.p_v2i_dbm; }));
    k.push_back({"v2v_power_levels_dbm", "V2V power level table, highest first",
                 [](const C& c) { return join(c.comm.v2v_power_levels_dbm, fmt_double); },
                 [](C& c, std::string_view v) {
                   std::vector<double> levels;
                   for (const auto& s : split_list(v))
                     levels.push_back(parse_double("v2v_power_levels_dbm", s));
                   c.comm.v2v_power_levels_dbm = levels;
                 }});
    k.push_back(real_key("circuit_power_dbm", "circuit power",
                         [](C& c) -> double& { return c.comm.p_circuit_dbm; }));
    k.push_back(real_key("bs_antenna_gain_dbi", "BS antenna gain",
                         [](C& c) -> double& { return c.channel.bs_antenna_gain_dbi; }));
    k.push_back(real_key("eavesdropper_antenna_gain_dbi", "eavesdropper antenna gain",
                         [](C& c) -> double& { return c.channel.eavesdropper_antenna_gain_dbi; }));
    k.push_back(real_key("vehicle_antenna_gain_dbi", "vehicle antenna gain",
                         [](C& c) -> double& { return c.channel.vehicle_antenna_gain_dbi; }));
    k.push_back(real_key("noise_power_dbm", "noise power",
                         [](C& c) -> double& { return c.channel.noise_power_dbm; }));
    k.push_back(real_key("decorrelation_distance_m", "shadowing decorrelation distance",
                         [](C& c) -> double& { return c.channel.decorrelation_distance_m; }));
    k.push_back(fixed_key("path_loss", "path loss model (LOS/NLOS urban)", "los_nlos"));
    k.push_back(fixed_key("shadow_fading", "shadow fading distribution", "lognormal"));
    // Traffic and DQN parameters
    k.push_back({"vehicle_counts", "vehicle counts swept",
                 [](const C& c) { return join(c.vehicle_counts, [](int v) { return std::to_string(v); }); },
                 [](C& c, std::string_view v) {
                   c.vehicle_counts.clear();
                   for (const auto& s : split_list(v))
                     c.vehicle_counts.push_back(parse_int<int>("vehicle_counts", s));
                 }});
    k.push_back(int_key("platoon_size", "vehicles per platoon (1 leader + members)",
                        [](C& c) -> int& { return c.scenario.platoon_size; }));
    k.push_back(real_key("platoon_speed_kmh", "vehicle speed",
                         [](C& c) -> double& { return c.scenario.speed_kmh; }));
    k.push_back(real_key("lane_width_m", "lane width",
                         [](C& c) -> double& { return c.scenario.lane_width_m; }));
    k.push_back(int_key("lanes_per_direction", "lanes in each direction",
                        [](C& c) -> int& { return c.scenario.lanes_per_direction; }));
    k.push_back(int_key("num_directions", "driving directions",
                        [](C& c) -> int& { return c.scenario.num_directions; }));
    k.push_back({"hidden_layers", "hidden layer widths (count = number of hidden layers)",
                 [](const C& c) { return join(c.dqn.hidden, [](int v) { return std::to_string(v); }); },
                 [](C& c, std::string_view v) {
                   c.dqn.hidden.clear();
                   for (const auto& s : split_list(v))
                     c.dqn.hidden.push_back(parse_int<int>("hidden_layers", s));
                 }});
    k.push_back(fixed_key("optimizer", "optimizer", "rmsprop"));
    k.push_back(fixed_key("activation", "hidden activation", "relu"));
    k.push_back(int_key("batch_size", "minibatch size",
                        [](C& c) -> int& { return c.dqn.batch_size; }));
    k.push_back(real_key("learning_rate", "RMSProp learning rate",
                         [](C& c) -> double& { return c.dqn.learning_rate; }));
    k.push_back(real_key("discount", "discount factor gamma",
                         [](C& c) -> double& { return c.dqn.gamma; }));
    k.push_back(int_key("target_update_steps", "gradient steps between target syncs",
                        [](C& c) -> int& { return c.dqn.target_update_steps; }));
    // Modelling choices not fixed by the parameter table
    k.push_back(real_key("lambda_alpha", "weight of V2V efficiency",
                         [](C& c) -> double& { return c.comm.lambda_alpha; }));
    k.push_back({"lambda_beta", "weight of V2I efficiency (must equal 1 - lambda_alpha)",
                 [](const C& c) {
                   // derived, so print at 12 digits to hide the subtraction residue
                   return fmt_double(std::stod(fmt_precision(c.comm.lambda_beta(), 12)));
                 },
                 [](C& c, std::string_view v) {
                   c.declared_lambda_beta = parse_double("lambda_beta", v);
                 }});
    k.push_back(real_key("r_threshold", "secrecy rate threshold (bps/Hz)",
                         [](C& c) -> double& { return c.comm.r_threshold; }));
    k.push_back(int_key("member_first_level", "first power level index platoon members may use",
                        [](C& c) -> int& { return c.comm.member_first_level; }));
    k.push_back(real_key("max_v2i_power_dbm", "V2I power bound",
                         [](C& c) -> double& { return c.comm.p_max_v2i_dbm; }));
    k.push_back(real_key("max_v2v_power_dbm", "V2V power bound",
                         [](C& c) -> double& { return c.comm.p_max_v2v_dbm; }));
    k.push_back(real_key("shadow_std_los_db", "shadowing std, LOS",
                         [](C& c) -> double& { return c.channel.shadow_std_los_db; }));
    k.push_back(real_key("shadow_std_nlos_db", "shadowing std, NLOS",
                         [](C& c) -> double& { return c.channel.shadow_std_nlos_db; }));
    k.push_back(real_key("v2v_los_intercept_db", "V2V LOS loss intercept",
                         [](C& c) -> double& { return c.channel.v2v_los_intercept_db; }));
    k.push_back(real_key("v2v_los_slope_db", "V2V LOS loss distance coefficient",
                         [](C& c) -> double& { return c.channel.v2v_los_slope_db; }));
    k.push_back(real_key("v2v_freq_coeff_db", "V2V loss frequency coefficient",
                         [](C& c) -> double& { return c.channel.v2v_freq_coeff_db; }));
    k.push_back(real_key("nlos_penalty_db", "extra loss for NLOS V2V links",
                         [](C& c) -> double& { return c.channel.nlos_penalty_db; }));
    k.push_back(real_key("bs_intercept_db", "vehicle-to-BS loss intercept",
                         [](C& c) -> double& { return c.channel.bs_intercept_db; }));
    k.push_back(real_key("bs_slope_db", "vehicle-to-BS loss distance coefficient",
                         [](C& c) -> double& { return c.channel.bs_slope_db; }));
    k.push_back(real_key("min_distance_m", "distance clamp for path loss",
                         [](C& c) -> double& { return c.channel.min_distance_m; }));
    k.push_back(real_key("scenario_width_m", "scenario length",
                         [](C& c) -> double& { return c.scenario.width_m; }));
    k.push_back(real_key("scenario_height_m", "scenario width",
                         [](C& c) -> double& { return c.scenario.height_m; }));
    k.push_back(real_key("platoon_gap_m", "bumper gap between consecutive vehicles",
                         [](C& c) -> double& { return c.scenario.platoon_gap_m; }));
    k.push_back(real_key("vehicle_length_m", "vehicle length",
                         [](C& c) -> double& { return c.scenario.vehicle_length_m; }));
    k.push_back(real_key("placement_radius_m", "placement window around the central intersection",
                         [](C& c) -> double& { return c.scenario.placement_radius_m; }));
    k.push_back(real_key("bs_x_m", "BS x", [](C& c) -> double& { return c.scenario.bs_pos.x; }));
    k.push_back(real_key("bs_y_m", "BS y", [](C& c) -> double& { return c.scenario.bs_pos.y; }));
    k.push_back(real_key("eavesdropper_x_m", "eavesdropper x",
                         [](C& c) -> double& { return c.scenario.eavesdropper_pos.x; }));
    k.push_back(real_key("eavesdropper_y_m", "eavesdropper y",
                         [](C& c) -> double& { return c.scenario.eavesdropper_pos.y; }));
    k.push_back(real_key("rmsprop_decay", "RMSProp decay",
                         [](C& c) -> double& { return c.dqn.rmsprop_decay; }));
    k.push_back(real_key("rmsprop_eps", "RMSProp epsilon",
                         [](C& c) -> double& { return c.dqn.rmsprop_eps; }));
    k.push_back(int_key("replay_capacity", "replay memory capacity",
                        [](C& c) -> int& { return c.dqn.replay_capacity; }));
    k.push_back(real_key("epsilon_start", "initial exploration rate",
                         [](C& c) -> double& { return c.dqn.epsilon_start; }));
    k.push_back(real_key("epsilon_end", "final exploration rate",
                         [](C& c) -> double& { return c.dqn.epsilon_end; }));
    k.push_back(real_key("epsilon_decay_fraction", "fraction of training over which epsilon decays",
                         [](C& c) -> double& { return c.dqn.epsilon_decay_fraction; }));
    k.push_back(real_key("input_scale", "factor applied to observations before the networks",
                         [](C& c) -> double& { return c.dqn.input_scale; }));
    k.push_back(int_key("subframes_per_episode", "subframes per episode",
                        [](C& c) -> int& { return c.env.subframes_per_episode; }));
    k.push_back(int_key("refresh_subframes", "subframes between mobility/channel updates",
                        [](C& c) -> int& { return c.env.refresh_subframes; }));
    k.push_back(real_key("subframe_s", "subframe duration (s)",
                         [](C& c) -> double& { return c.env.subframe_s; }));
    k.push_back(int_key("episodes", "training episodes per sweep cell",
                        [](C& c) -> int& { return c.episodes; }));
    k.push_back(real_key("final_window_fraction", "trailing fraction of episodes summarised",
                         [](C& c) -> double& { return c.final_window_fraction; }));
    k.push_back({"seeds", "random seeds",
                 [](const C& c) { return join(c.seeds, [](std::uint64_t v) { return std::to_string(v); }); },
                 [](C& c, std::string_view v) {
                   c.seeds.clear();
                   for (const auto& s : split_list(v)) c.seeds.push_back(parse_int<std::uint64_t>("seeds", s));
                 }});
    k.push_back({"policies", "policies to run (seed, dqn-wopa, random)",
                 [](const C& c) { return join(c.policies, [](Policy p) { return std::string(policy_name(p)); }); },
                 [](C& c, std::string_view v) {
                   c.policies.clear();
                   for (const auto& s : split_list(v)) c.policies.push_back(parse_policy(s));
                 }});
    k.push_back({"output_dir", "output directory",
                 [](const C& c) { return c.output_dir; },
                 [](C& c, std::string_view v) { c.output_dir = trim(v); }});
    k.push_back(bool_key("log_subframes", "also write subframes.csv",
                         [](C& c) -> bool& { return c.log_subframes; }));
    k.push_back(bool_key("save_checkpoints", "write final network checkpoints",
                         [](C& c) -> bool& { return c.save_checkpoints; }));
    k.push_back(int_key("threads", "worker threads for sweep cells",
                        [](C& c) -> int& { return c.threads; }));
    return k;
  }();
  return table;
}

inline const Key* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace cfg

inline void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
  const cfg::Key* k = cfg::find_key(key);
  if (!k) throw Fault("config: unknown key '" + std::string(key) + "'");
  k->set(c, value);
}

// `key = value` lines; '#' starts a comment; lists are comma separated.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = cfg::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Fault("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(base, cfg::trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const Fault& e) {
      throw Fault("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Fault("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

inline std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream os;
  for (const auto& k : cfg::keys()) os << k.name << " = " << k.get(c) << "\n";
  return os.str();
}

}  // namespace seedsim
