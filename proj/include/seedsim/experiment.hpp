#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "seedsim/baselines.hpp"
#include "seedsim/config.hpp"
#include "seedsim/env.hpp"
#include "seedsim/oracle.hpp"

namespace seedsim {

inline constexpr const char* kSchemaLine = "# schema=1";
inline constexpr const char* kMetricsHeader =
    "policy,vehicle_count,seed,episode,mean_reward,zeta_v2v,zeta_v2i,network_efficiency,"
    "mean_secrecy_rate,mean_loss";
inline constexpr const char* kSummaryHeader =
    "policy,vehicle_count,seed,window_episodes,mean_reward,zeta_v2v,zeta_v2i,"
    "network_efficiency,mean_secrecy_rate,mean_loss";
inline constexpr const char* kSubframeHeader =
    "policy,vehicle_count,seed,episode,subframe,reward,objective,zeta_v2v,zeta_v2i,"
    "min_secrecy,mean_secrecy";

struct MetricsRow {
  Policy policy = Policy::Seed;
  int vehicle_count = 0;
  std::uint64_t seed = 0;
  int episode = 0;  // in summaries: number of episodes in the final window
  double mean_reward = 0.0;
  double zeta_v2v = 0.0;
  double zeta_v2i = 0.0;
  double network_efficiency = 0.0;
  double mean_secrecy_rate = 0.0;
  double mean_loss = 0.0;
};

// Metrics text uses 9 significant digits; subframe logs keep 17 so the reward
// rule can be re-checked exactly.
inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_row(const MetricsRow& r) {
  std::ostringstream os;
  os << policy_name(r.policy) << ',' << r.vehicle_count << ',' << r.seed << ',' << r.episode << ','
     << fmt9(r.mean_reward) << ',' << fmt9(r.zeta_v2v) << ',' << fmt9(r.zeta_v2i) << ','
     << fmt9(r.network_efficiency) << ',' << fmt9(r.mean_secrecy_rate) << ','
     << fmt9(r.mean_loss);
  return os.str();
}

struct CellResult {
  Policy policy = Policy::Seed;
  int vehicle_count = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::vector<double> step_losses;  // every gradient step in order
  std::vector<SubframeRecord> subframes;
  std::size_t num_agents = 0;
};

// Streams are keyed on (seed, vehicle count) so that every policy sees the same
// topology and channel realisation.
inline Rng cell_rng(std::uint64_t seed, int vehicle_count, std::uint64_t stream) {
  std::uint64_t s = Rng::splitmix(seed);
  s = Rng::splitmix(s ^ static_cast<std::uint64_t>(vehicle_count));
  s = Rng::splitmix(s ^ (stream * 0x632be59bd9b4e019ULL));
  return Rng(s);
}

inline Environment make_environment(const ExperimentConfig& c, int vehicle_count,
                                    std::uint64_t seed) {
  Rng topo_rng = cell_rng(seed, vehicle_count, 1);
  Topology topo = generate_topology(vehicle_count, topo_rng, c.scenario);
  topo = derive_links(std::move(topo), c.comm.num_subchannels);
  return Environment(std::move(topo), c.channel, c.comm, c.env, cell_rng(seed, vehicle_count, 2));
}

inline std::unique_ptr<Controller> make_controller(Policy p, const ExperimentConfig& c,
                                                   const Topology& topo, std::uint64_t seed,
                                                   int vehicle_count) {
  Rng rng = cell_rng(seed, vehicle_count, 10 + static_cast<std::uint64_t>(p));
  switch (p) {
    case Policy::Seed:
      return std::make_unique<DqnController>(make_seed_controller(topo, c.comm, c.dqn, rng));
    case Policy::DqnWopa:
      return std::make_unique<DqnController>(make_wopa_controller(topo, c.comm, c.dqn, rng));
    case Policy::Random:
      return std::make_unique<RandomController>(topo, c.comm, rng);
  }
  throw Fault("make_controller: unknown policy");
}

inline std::string checkpoint_path(const std::string& dir, Policy p, int count, std::uint64_t seed,
                                   std::size_t agent) {
  std::ostringstream os;
  os << dir << "/checkpoints/" << policy_name(p) << "_v" << count << "_s" << seed << "_agent"
     << agent << ".bin";
  return os.str();
}

// Fresh topology and agents, then `episodes` training episodes.
inline CellResult run_cell(const ExperimentConfig& c, Policy policy, int vehicle_count,
                           std::uint64_t seed, bool keep_subframes = false) {
  CellResult res;
  res.policy = policy;
  res.vehicle_count = vehicle_count;
  res.seed = seed;
  Environment env = make_environment(c, vehicle_count, seed);
  res.num_agents = env.num_agents();
  auto ctl = make_controller(policy, c, env.topology(), seed, vehicle_count);
  const std::int64_t total_steps =
      static_cast<std::int64_t>(c.episodes) * c.env.subframes_per_episode;
  const DqnParams dqn = c.dqn;
  const EpsilonSchedule eps = [&](std::int64_t step) { return epsilon_at(step, total_steps, dqn); };
  std::int64_t global_step = 0;
  for (int e = 0; e < c.episodes; ++e) {
    const EpisodeMetrics em = run_episode(env, *ctl, c.env.subframes_per_episode, eps, global_step,
                                          e, keep_subframes ? &res.subframes : nullptr);
    res.rows.push_back({policy, vehicle_count, seed, e, em.mean_reward, em.zeta_v2v, em.zeta_v2i,
                        em.network_efficiency, em.mean_secrecy_rate, em.mean_loss});
    res.step_losses.insert(res.step_losses.end(), em.step_losses.begin(), em.step_losses.end());
  }
  if (c.save_checkpoints) {
    if (auto* dqn_ctl = dynamic_cast<DqnController*>(ctl.get())) {
      std::filesystem::create_directories(c.output_dir + "/checkpoints");
      for (std::size_t m = 0; m < dqn_ctl->learners().size(); ++m)
        dqn_ctl->learners()[m].network().save(
            checkpoint_path(c.output_dir, policy, vehicle_count, seed, m));
    }
  }
  return res;
}

// Mean of the trailing `fraction` of rows (at least one).
inline MetricsRow final_window(const std::vector<MetricsRow>& rows, double fraction) {
  if (rows.empty()) throw Fault("final_window: no rows");
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size()))));
  MetricsRow out = rows.front();
  out.episode = static_cast<int>(n);
  out.mean_reward = out.zeta_v2v = out.zeta_v2i = out.network_efficiency = 0.0;
  out.mean_secrecy_rate = out.mean_loss = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) {
    out.mean_reward += rows[i].mean_reward;
    out.zeta_v2v += rows[i].zeta_v2v;
    out.zeta_v2i += rows[i].zeta_v2i;
    out.network_efficiency += rows[i].network_efficiency;
    out.mean_secrecy_rate += rows[i].mean_secrecy_rate;
    out.mean_loss += rows[i].mean_loss;
  }
  const double d = static_cast<double>(n);
  out.mean_reward /= d;
  out.zeta_v2v /= d;
  out.zeta_v2i /= d;
  out.network_efficiency /= d;
  out.mean_secrecy_rate /= d;
  out.mean_loss /= d;
  return out;
}

// Writes via a temporary file and a rename so readers never see partial CSVs.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Fault("cannot write " + tmp.string());
    os << content;
    if (!os) throw Fault("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Fault("output directory '" + dir + "' cannot be created: " + ec.message());
  const std::filesystem::path probe = std::filesystem::path(dir) / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw Fault("output directory '" + dir + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

struct SweepResult {
  std::vector<CellResult> cells;  // ordered policy x count x seed as configured
  std::vector<MetricsRow> summary;
};

using ProgressFn = std::function<void(const CellResult&)>;

inline SweepResult run_sweep_cells(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  c.validate();
  struct Job {
    Policy policy;
    int count;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Policy p : c.policies)
    for (int v : c.vehicle_counts)
      for (std::uint64_t s : c.seeds) jobs.push_back({p, v, s});

  SweepResult out;
  out.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      out.cells[i] = run_cell(c, jobs[i].policy, jobs[i].count, jobs[i].seed, c.log_subframes);
  };
  if (c.threads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      out.cells[i] = run_cell(c, jobs[i].policy, jobs[i].count, jobs[i].seed, c.log_subframes);
      if (progress) progress(out.cells[i]);
    }
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < c.threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (progress)
      for (const auto& cell : out.cells) progress(cell);
  }
  for (const auto& cell : out.cells)
    if (!cell.rows.empty()) out.summary.push_back(final_window(cell.rows, c.final_window_fraction));
  return out;
}

inline std::string metrics_csv(const SweepResult& r) {
  std::string s = std::string(kSchemaLine) + "\n" + kMetricsHeader + "\n";
  for (const auto& cell : r.cells)
    for (const auto& row : cell.rows) s += format_row(row) + "\n";
  return s;
}

inline std::string summary_csv(const SweepResult& r) {
  std::string s = std::string(kSchemaLine) + "\n" + kSummaryHeader + "\n";
  for (const auto& row : r.summary) s += format_row(row) + "\n";
  return s;
}

inline std::string subframes_csv(const SweepResult& r) {
  std::string s = std::string(kSchemaLine) + "\n" + kSubframeHeader + "\n";
  for (const auto& cell : r.cells) {
    for (const auto& f : cell.subframes) {
      s += std::string(policy_name(cell.policy)) + ',' + std::to_string(cell.vehicle_count) + ',' +
           std::to_string(cell.seed) + ',' + std::to_string(f.episode) + ',' +
           std::to_string(f.subframe) + ',' + fmt17(f.reward) + ',' + fmt17(f.objective) + ',' +
           fmt17(f.zeta_v2v) + ',' + fmt17(f.zeta_v2i) + ',' + fmt17(f.min_secrecy) + ',' +
           fmt17(f.mean_secrecy) + '\n';
    }
  }
  return s;
}

// Checks the output directory first, runs every cell, then writes
// metrics.csv, summary.csv and (optionally) subframes.csv.
inline SweepResult run_sweep(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  c.validate();
  ensure_writable_dir(c.output_dir);
  SweepResult r = run_sweep_cells(c, progress);
  const std::filesystem::path dir(c.output_dir);
  write_atomically(dir / "metrics.csv", metrics_csv(r));
  write_atomically(dir / "summary.csv", summary_csv(r));
  if (c.log_subframes) write_atomically(dir / "subframes.csv", subframes_csv(r));
  return r;
}

struct LogCheck {
  std::size_t rows = 0;
  std::size_t penalised = 0;   // rows with reward -1
  std::size_t violations = 0;  // rows breaking the reward rule
  std::string first_violation;
};

// Replays the reward rule over a subframes.csv: -1 exactly when the smallest
// secrecy rate is below the threshold, the weighted objective otherwise.
inline LogCheck verify_subframe_log(std::istream& in, double lambda_alpha, double r_threshold) {
  LogCheck chk;
  std::string line;
  if (!std::getline(in, line) || line != kSchemaLine)
    throw Fault("subframe log: missing '# schema=1' line");
  if (!std::getline(in, line) || line != kSubframeHeader)
    throw Fault("subframe log: unexpected header '" + line + "'");
  const double lambda_beta = 1.0 - lambda_alpha;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = cfg::split_list(line);
    if (f.size() != 11) throw Fault("subframe log: malformed row '" + line + "'");
    const double reward = std::stod(f[5]);
    const double zv = std::stod(f[7]), zi = std::stod(f[8]);
    const double min_sec = std::stod(f[9]);
    ++chk.rows;
    bool ok;
    if (min_sec < r_threshold) {
      ok = reward == -1.0;
      ++chk.penalised;
    } else {
      ok = reward == lambda_alpha * zv + lambda_beta * zi;
    }
    if (!ok) {
      if (chk.violations == 0) chk.first_violation = line;
      ++chk.violations;
    }
  }
  return chk;
}

// A small fixed-gain instance: one platoon of `num_v2v` vehicles (leader plus
// members, chain links) and `num_subchannels` separate V2I vehicles, with the
// first `levels` entries of the power table available to every agent.
struct TinyInstance {
  Topology topology;
  ChannelGains gains;
  CommParams comm;
  std::vector<Role> roles;
  double noise_mw = 0.0;
};

inline TinyInstance make_tiny_instance(const ExperimentConfig& c, int num_v2v, int num_subchannels,
                                       int levels, std::uint64_t seed) {
  if (num_v2v < 1 || num_subchannels < 1 || levels < 1)
    throw Fault("tiny instance: sizes must be positive");
  if (levels > c.comm.num_power_levels()) throw Fault("tiny instance: too many power levels");
  TinyInstance ti;
  ti.comm = c.comm;
  ti.comm.num_subchannels = num_subchannels;
  ti.comm.v2v_power_levels_dbm.resize(static_cast<std::size_t>(levels));
  ti.comm.member_first_level = 0;
  ti.comm.total_bandwidth_hz =
      c.comm.bandwidth_per_subchannel_hz() * static_cast<double>(num_subchannels);

  Rng rng(Rng::splitmix(seed ^ 0x74696e79ULL));
  ScenarioParams sp = c.scenario;
  sp.platoon_size = std::max(2, num_v2v);
  Topology t = generate_groups(1, num_subchannels, rng, sp);
  t.v2v_links.clear();
  t.v2i_links.clear();
  const auto& platoon = t.platoons.at(0);
  for (int k = 0; k < num_v2v; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    const int rx = i + 1 < platoon.size() ? platoon[i + 1] : platoon[i - 1];
    t.v2v_links.push_back({platoon[i], rx});
  }
  for (const Vehicle& v : t.vehicles)
    if (!v.platoon_id && static_cast<int>(t.v2i_links.size()) < num_subchannels)
      t.v2i_links.push_back(v.id);
  if (static_cast<int>(t.v2i_links.size()) != num_subchannels)
    throw Fault("tiny instance: could not place V2I vehicles");
  ShadowState shadow;
  ti.gains = compute_gains(t, shadow, c.channel, rng);
  for (std::size_t m = 0; m < t.num_v2v(); ++m) ti.roles.push_back(t.link_role(m));
  ti.noise_mw = c.channel.noise_mw();
  ti.topology = std::move(t);
  return ti;
}

}  // namespace seedsim
