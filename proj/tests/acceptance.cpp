// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Optional arguments select criteria by name (e.g. `seedsim_acceptance tiny loss`).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "checks.hpp"
#include "seedsim/config.hpp"
#include "seedsim/experiment.hpp"
#include "seedsim/oracle.hpp"

#ifndef SEEDSIM_DESK_CONFIG
#define SEEDSIM_DESK_CONFIG "configs/desk.cfg"
#endif

using namespace seedsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig desk_config() {
  ExperimentConfig c = load_config(SEEDSIM_DESK_CONFIG);
  c.threads = std::max(1u, std::thread::hardware_concurrency());
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------

void formula_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = checks::formula_check(1000, 20240601);
  const double secs = seconds_since(t0);
  report("formula_oracle", r.instances == 1000 && r.worst_rel <= 1e-12 && secs < 10.0,
         std::to_string(r.instances) + " instances, worst relative error " + fmt(r.worst_rel) +
             ", " + fmt(secs, 3) + " s");
}

void gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> dims{3, 4, 3, 2};
  const auto r = checks::gradient_check(dims, 25, 99);
  const double secs = seconds_since(t0);
  report("gradient_check", r.parameters <= 50 && r.states >= 20 && r.worst_rel < 1e-4 && secs < 30.0,
         std::to_string(r.parameters) + " parameters, " + std::to_string(r.states) +
             " states, worst relative error " + fmt(r.worst_rel) + ", " + fmt(secs, 3) + " s");
}

// SEED agents on a frozen 2-link, 2-subchannel, 2-level instance versus the
// exhaustive optimum.
void tiny_instance() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = desk_config();
  const int episodes = 50, subframes = 100;  // 5000 steps
  int good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TinyInstance ti = make_tiny_instance(c, 2, 2, 2, seed);
    const OracleResult best = exhaustive_best(ti.gains, ti.roles, ti.comm, ti.noise_mw);
    Environment env(ti.topology, c.channel, ti.comm, c.env, Rng(seed));
    env.set_gains(ti.gains);
    Rng rng(Rng::splitmix(seed + 77));
    DqnController ctl(ti.topology, ActionCodec(ActionCodec::Kind::SubchannelAndPower, ti.comm),
                      state_dim(ti.comm.num_subchannels), c.dqn, rng);
    const std::int64_t total = static_cast<std::int64_t>(episodes) * subframes;
    const DqnParams dqn = c.dqn;
    std::int64_t step = 0;
    for (int e = 0; e < episodes; ++e)
      run_episode(env, ctl, subframes, [&](std::int64_t s) { return epsilon_at(s, total, dqn); },
                  step);
    const JointAction greedy = ctl.greedy(env.observe_all());
    const double got =
        evaluate(env.build_allocation(greedy), ti.gains, ti.noise_mw, ti.comm).reward;
    const bool ok = best.best_reward > 0.0 ? got >= 0.9 * best.best_reward : got >= best.best_reward;
    good += ok;
    per_seed += (seed ? " " : "") + fmt(best.best_reward > 0.0 ? got / best.best_reward : got, 3);
  }
  const double secs = seconds_since(t0);
  report("tiny_instance_near_optimality", good >= 8 && secs < 300.0,
         std::to_string(good) + "/10 seeds at >= 90% of the optimum (ratios " + per_seed + "), " +
             fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------------------
// Desk-scale sweeps shared by the trend criteria.

struct Sweeps {
  ExperimentConfig config;
  std::vector<int> counts;
  // policy -> count -> per-seed summary rows
  std::map<Policy, std::map<int, std::vector<MetricsRow>>> summary;
  std::map<int, double> seconds_per_count;
  std::vector<std::vector<double>> seed_step_losses;  // SEED at 20 vehicles, per seed
};

double mean_of(const std::vector<MetricsRow>& rows, double MetricsRow::*field) {
  double s = 0.0;
  for (const auto& r : rows) s += r.*field;
  return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

void run_into(Sweeps& sw, ExperimentConfig c, const std::string& tag) {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult r = run_sweep_cells(c, [&](const CellResult& cell) {
    std::fprintf(stderr, "  [%s] %s vehicles=%d seed=%llu done\n", tag.c_str(),
                 policy_name(cell.policy), cell.vehicle_count,
                 static_cast<unsigned long long>(cell.seed));
  });
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& cell = r.cells[i];
    sw.summary[cell.policy][cell.vehicle_count].push_back(r.summary[i]);
    if (cell.policy == Policy::Seed && cell.vehicle_count == 20)
      sw.seed_step_losses.push_back(cell.step_losses);
  }
  const double secs = seconds_since(t0);
  for (int v : c.vehicle_counts) sw.seconds_per_count[v] += secs / c.vehicle_counts.size();
}

Sweeps& sweeps(bool need_degradation, bool need_loss) {
  static Sweeps sw;
  static bool main_done = false, degr_done = false, loss_done = false;
  if (!main_done) {
    sw.config = desk_config();
    ExperimentConfig c = sw.config;  // all three policies at the configured counts, seeds 0-4
    run_into(sw, c, "ordering");
    main_done = true;
  }
  if (need_degradation && !degr_done) {
    ExperimentConfig c = sw.config;
    c.policies = {Policy::Seed};
    c.vehicle_counts = {60, 100};
    run_into(sw, c, "degradation");
    degr_done = true;
  }
  if (need_loss && !loss_done) {
    ExperimentConfig c = sw.config;
    c.policies = {Policy::Seed};
    c.vehicle_counts = {20};
    c.seeds = {5, 6, 7, 8, 9};
    run_into(sw, c, "loss");
    loss_done = true;
  }
  return sw;
}

void policy_ordering() {
  Sweeps& sw = sweeps(false, false);
  bool all = true;
  std::string detail;
  for (int v : sw.config.vehicle_counts) {
    const double s = mean_of(sw.summary[Policy::Seed][v], &MetricsRow::network_efficiency);
    const double w = mean_of(sw.summary[Policy::DqnWopa][v], &MetricsRow::network_efficiency);
    const double r = mean_of(sw.summary[Policy::Random][v], &MetricsRow::network_efficiency);
    const bool ok = s > w && w > r && s / r >= 1.3 && sw.seconds_per_count[v] < 1800.0;
    all = all && ok;
    detail += (detail.empty() ? "" : "; ") + std::to_string(v) + " vehicles: seed " + fmt(s) +
              ", dqn-wopa " + fmt(w) + ", random " + fmt(r) + ", seed/random " + fmt(s / r, 3) +
              (s > w ? "" : " [seed<=wopa]") + (w > r ? "" : " [wopa<=random]") +
              (s / r >= 1.3 ? "" : " [ratio<1.3]");
  }
  report("policy_ordering", all,
         detail + " (" + std::to_string(sw.config.seeds.size()) + " seeds, " +
             std::to_string(sw.config.episodes) + " episodes)");
}

void monotonic_degradation() {
  Sweeps& sw = sweeps(true, false);
  auto eff = [&](int v) { return mean_of(sw.summary[Policy::Seed][v], &MetricsRow::network_efficiency); };
  const double e20 = eff(20), e60 = eff(60), e100 = eff(100);
  report("monotonic_degradation", e20 > e60 && e60 > e100,
         "seed efficiency 20: " + fmt(e20) + ", 60: " + fmt(e60) + ", 100: " + fmt(e100));
}

void secrecy_advantage() {
  Sweeps& sw = sweeps(false, false);
  bool all = true;
  std::string detail;
  for (int v : sw.config.vehicle_counts) {
    const double s = mean_of(sw.summary[Policy::Seed][v], &MetricsRow::mean_secrecy_rate);
    const double w = mean_of(sw.summary[Policy::DqnWopa][v], &MetricsRow::mean_secrecy_rate);
    const double r = mean_of(sw.summary[Policy::Random][v], &MetricsRow::mean_secrecy_rate);
    all = all && s > r && w > r;
    detail += (detail.empty() ? "" : "; ") + std::to_string(v) + " vehicles: seed " + fmt(s) +
              ", dqn-wopa " + fmt(w) + ", random " + fmt(r);
  }
  report("secrecy_advantage", all, detail);
}

// Agent-averaged loss per gradient step; initial window = steps 1-10, final
// window = steps 141-150.
void loss_convergence() {
  Sweeps& sw = sweeps(false, true);
  int good = 0, seeds = 0;
  std::string per_seed;
  for (const auto& losses : sw.seed_step_losses) {
    ++seeds;
    if (losses.size() < 150) {
      per_seed += " n/a";
      continue;
    }
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
      first += losses[i] / 10.0;
      last += losses[140 + i] / 10.0;
    }
    const double drop = 1.0 - last / first;
    good += drop >= 0.8;
    per_seed += " " + fmt(100.0 * drop, 3) + "%";
  }
  report("loss_convergence", seeds == 10 && good >= 8,
         std::to_string(good) + "/" + std::to_string(seeds) +
             " seeds drop >= 80% between steps 1-10 and 141-150 (drops" + per_seed + ")");
}

// Same configuration and seed twice, compared byte for byte; the second run
// also logs every subframe for the constraint replay.
void determinism_and_constraints() {
  ExperimentConfig c = desk_config();
  c.vehicle_counts = {20};
  c.seeds = {3};
  c.episodes = 40;
  const fs::path base = fs::temp_directory_path() / "seedsim_acceptance";
  fs::remove_all(base);
  c.output_dir = (base / "a").string();
  run_sweep(c);
  c.output_dir = (base / "b").string();
  c.log_subframes = true;
  run_sweep(c);
  const std::string a = slurp(base / "a" / "metrics.csv"), b = slurp(base / "b" / "metrics.csv");
  report("determinism", !a.empty() && a == b,
         std::to_string(a.size()) + " bytes of metrics.csv, " + (a == b ? "identical" : "different"));

  std::ifstream log(base / "b" / "subframes.csv");
  const LogCheck chk = verify_subframe_log(log, c.comm.lambda_alpha, c.comm.r_threshold);
  report("constraint_soundness", chk.rows > 0 && chk.violations == 0 && chk.penalised > 0,
         std::to_string(chk.rows) + " subframes replayed, " + std::to_string(chk.penalised) +
             " penalised, " + std::to_string(chk.violations) + " violations" +
             (chk.violations ? " (first: " + chk.first_violation + ")" : ""));
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, void (*)()>> all = {
      {"formula", formula_oracle},
      {"gradient", gradient_check},
      {"tiny", tiny_instance},
      {"ordering", policy_ordering},
      {"degradation", monotonic_degradation},
      {"secrecy", secrecy_advantage},
      {"loss", loss_convergence},
      {"determinism", determinism_and_constraints},
  };
  std::set<std::string> chosen(argv + 1, argv + argc);
  try {
    for (const auto& [name, fn] : all)
      if (chosen.empty() || chosen.count(name)) fn();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance: aborted with error: %s\n", e.what());
    return 1;
  }
  return failures ? 1 : 0;
}
