// seedsim: sweep runner, exhaustive oracle and config inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seedsim/config.hpp"
#include "seedsim/experiment.hpp"
#include "seedsim/oracle.hpp"

using namespace seedsim;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::string> vehicles;
  std::vector<std::string> overrides;  // key=value
};

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c = f.config_path.empty() ? ExperimentConfig{} : load_config(f.config_path);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Fault("--set expects key=value, got '" + kv + "'");
    set_config_value(c, cfg::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (f.out) c.output_dir = *f.out;
  if (f.seed) c.seeds = {*f.seed};
  if (f.policy) set_config_value(c, "policies", *f.policy);
  if (f.vehicles) set_config_value(c, "vehicle_counts", *f.vehicles);
  c.validate();
  return c;
}

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "single seed (replaces the seeds list)");
  app->add_option("--policy", f.policy, "policy or comma list: seed, dqn-wopa, random");
  app->add_option("--vehicles", f.vehicles, "comma separated vehicle counts");
  app->add_option("--set", f.overrides, "override any config key: --set key=value");
}

std::string describe(const JointAction& j, const CommParams& comm) {
  std::string s;
  for (std::size_t m = 0; m < j.size(); ++m) {
    if (m) s += ' ';
    s += "link" + std::to_string(m) + "=(sub " + std::to_string(j[m].subchannel) + ", " +
         cfg::fmt_double(comm.v2v_power_levels_dbm[static_cast<std::size_t>(j[m].level)]) + " dBm)";
  }
  return s;
}

int cmd_run(const CommonFlags& f) {
  const ExperimentConfig c = resolve(f);
  std::cerr << "running " << c.policies.size() * c.vehicle_counts.size() * c.seeds.size()
            << " cells into " << c.output_dir << "\n";
  const auto r = run_sweep(c, [](const CellResult& cell) {
    if (cell.rows.empty()) return;
    const auto w = final_window(cell.rows, 0.1);
    std::cerr << policy_name(cell.policy) << " vehicles=" << cell.vehicle_count
              << " seed=" << cell.seed << " efficiency=" << fmt9(w.network_efficiency)
              << " secrecy=" << fmt9(w.mean_secrecy_rate) << "\n";
  });
  std::cout << "wrote " << c.output_dir << "/metrics.csv and " << c.output_dir << "/summary.csv ("
            << r.summary.size() << " summary rows)\n";
  return 0;
}

int cmd_oracle(const CommonFlags& f, int m, int n, int levels, bool wopa) {
  const ExperimentConfig c = resolve(f);
  const TinyInstance ti = make_tiny_instance(c, m, n, levels, c.seeds.front());
  const auto kind = wopa ? ActionCodec::Kind::SubchannelOnly : ActionCodec::Kind::SubchannelAndPower;
  const OracleResult r = exhaustive_best(ti.gains, ti.roles, ti.comm, ti.noise_mw, kind);
  std::cout << "joint actions evaluated: " << r.evaluated << "\n";
  std::cout << "best joint action: " << describe(r.best, ti.comm) << "\n";
  std::cout << "best reward: " << fmt9(r.best_reward) << "\n";
  return 0;
}

int cmd_demo(const CommonFlags& f, int subframes) {
  ExperimentConfig c = resolve(f);
  const int count = c.vehicle_counts.front();
  const std::uint64_t seed = c.seeds.front();
  const Policy policy = c.policies.front();
  Environment env = make_environment(c, count, seed);
  auto ctl = make_controller(policy, c, env.topology(), seed, count);
  std::cout << "demo: policy=" << policy_name(policy) << " vehicles=" << count
            << " v2v_links=" << env.num_agents() << " subchannels=" << env.num_subchannels()
            << "\n";
  std::int64_t step = 0;
  const DqnParams dqn = c.dqn;
  const EpsilonSchedule eps = [&](std::int64_t s) { return epsilon_at(s, subframes, dqn); };
  env.reset_history();
  auto states = env.observe_all();
  for (int t = 0; t < subframes; ++t) {
    const double e = eps(step++);
    const JointAction joint = ctl->act(states, e);
    const StepResult res = env.step(joint);
    auto next = env.observe_all();
    ctl->learn(states, joint, res.evaluation.reward, next);
    states = std::move(next);
    if (t % 10 == 0 || t + 1 == subframes) {
      const auto& ev = res.evaluation;
      std::printf("subframe %4d  eps %.3f  reward %10.5f  efficiency %10.5f  v2v %10.5f  v2i %10.5f  secrecy %8.4f\n",
                  t, e, ev.reward, ev.efficiency.objective, ev.efficiency.zeta_v2v,
                  ev.efficiency.zeta_v2i, ev.rates.mean_secrecy());
    }
  }
  return 0;
}

int cmd_verify(const CommonFlags& f, const std::string& log_path) {
  const ExperimentConfig c = resolve(f);
  std::ifstream in(log_path);
  if (!in) throw Fault("cannot open " + log_path);
  const LogCheck chk = verify_subframe_log(in, c.comm.lambda_alpha, c.comm.r_threshold);
  std::cout << "rows " << chk.rows << ", penalised " << chk.penalised << ", violations "
            << chk.violations << "\n";
  if (chk.violations) {
    std::cout << "first violation: " << chk.first_violation << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seedsim: secure spectrum/energy-efficiency allocation for C-V2X platoons"};
  app.require_subcommand(1);

  CommonFlags run_f, oracle_f, validate_f, demo_f, verify_f;
  auto* run = app.add_subcommand("run", "run the policy x vehicle-count x seed sweep");
  add_common(run, run_f);

  auto* oracle = app.add_subcommand("oracle", "exhaustive search on a tiny fixed-gain instance");
  add_common(oracle, oracle_f);
  int m = 2, n = 2, levels = 2;
  bool wopa = false;
  oracle->add_option("--m", m, "number of V2V links")->check(CLI::Range(1, 8));
  oracle->add_option("--n", n, "number of subchannels")->check(CLI::Range(1, 20));
  oracle->add_option("--levels", levels, "power levels available")->check(CLI::Range(1, 8));
  oracle->add_flag("--wopa", wopa, "restrict to subchannel choice at role-maximum power");

  auto* validate = app.add_subcommand("validate-config", "print the resolved configuration");
  add_common(validate, validate_f);

  auto* demo = app.add_subcommand("demo", "one short episode with live metrics");
  add_common(demo, demo_f);
  int subframes = 100;
  demo->add_option("--subframes", subframes, "subframes to simulate")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify-log", "re-check the reward rule over subframes.csv");
  add_common(verify, verify_f);
  std::string log_path;
  verify->add_option("log", log_path, "path to subframes.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_f);
    if (*oracle) return cmd_oracle(oracle_f, m, n, levels, wopa);
    if (*validate) {
      std::cout << dump_config(resolve(validate_f));
      return 0;
    }
    if (*demo) return cmd_demo(demo_f, subframes);
    if (*verify) return cmd_verify(verify_f, log_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
