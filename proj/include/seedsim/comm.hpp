#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "seedsim/channel.hpp"
#include "seedsim/common.hpp"

namespace seedsim {

struct CommParams {
  int num_subchannels = 20;
  double total_bandwidth_hz = 10e6;
  double p_v2i_dbm = 23.0;
  std::vector<double> v2v_power_levels_dbm{23.0, 15.0, 10.0, 5.0};
  // Platoon members may only use levels from this index onwards.
  int member_first_level = 1;
  double p_circuit_dbm = 16.0;
  double p_max_v2i_dbm = 23.0;
  double p_max_v2v_dbm = 23.0;
  double r_threshold = 0.1;  // bps/Hz
  double lambda_alpha = 0.9;

  double lambda_beta() const { return 1.0 - lambda_alpha; }
  double bandwidth_per_subchannel_hz() const { return total_bandwidth_hz / num_subchannels; }
  int num_power_levels() const { return static_cast<int>(v2v_power_levels_dbm.size()); }

  void validate() const {
    if (num_subchannels <= 0) throw Fault("num_subchannels must be positive");
    if (!(total_bandwidth_hz > 0.0)) throw Fault("total bandwidth must be positive");
    if (v2v_power_levels_dbm.empty()) throw Fault("V2V power level table is empty");
    if (member_first_level < 0 || member_first_level >= num_power_levels())
      throw Fault("member_first_level must index the power level table");
    if (!(lambda_alpha >= 0.0 && lambda_alpha <= 1.0))
      throw Fault("lambda_alpha must lie in [0, 1]");
    if (!std::isfinite(p_circuit_dbm)) throw Fault("circuit power must be finite");
    for (double l : v2v_power_levels_dbm)
      if (!(l <= p_max_v2v_dbm)) throw Fault("V2V power level exceeds the V2V maximum");
    if (!(p_v2i_dbm <= p_max_v2i_dbm)) throw Fault("V2I power exceeds the V2I maximum");
  }
};

// Subchannel reuse matrix plus resolved transmit powers (milliwatts).
struct Allocation {
  Eigen::MatrixXi a;             // M x N, a(m, n) = 1 iff V2V m reuses subchannel n
  std::vector<int> power_level;  // index into the V2V level table, per V2V link
  std::vector<double> p_v2v_mw;  // resolved from power_level
  double p_v2i_mw = 0.0;
  double p_circuit_mw = 0.0;

  std::size_t num_v2v() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t num_v2i() const { return static_cast<std::size_t>(a.cols()); }

  static Allocation empty(std::size_t m, const CommParams& p) {
    Allocation al;
    al.a = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(m), p.num_subchannels);
    al.power_level.assign(m, 0);
    al.p_v2v_mw.assign(m, dbm_to_mw(p.v2v_power_levels_dbm.at(0)));
    al.p_v2i_mw = dbm_to_mw(p.p_v2i_dbm);
    al.p_circuit_mw = dbm_to_mw(p.p_circuit_dbm);
    return al;
  }

  // One subchannel and one power level per V2V link.
  static Allocation from_choices(const std::vector<int>& subchannel,
                                 const std::vector<int>& level, const CommParams& p) {
    if (subchannel.size() != level.size()) throw Fault("allocation: choice length mismatch");
    Allocation al = empty(subchannel.size(), p);
    for (std::size_t m = 0; m < subchannel.size(); ++m) {
      if (subchannel[m] < 0 || subchannel[m] >= p.num_subchannels)
        throw Fault("allocation: subchannel out of range");
      al.a(static_cast<Eigen::Index>(m), subchannel[m]) = 1;
      al.set_level(m, level[m], p);
    }
    return al;
  }

  void set_level(std::size_t m, int level, const CommParams& p) {
    power_level.at(m) = level;
    p_v2v_mw.at(m) = dbm_to_mw(p.v2v_power_levels_dbm.at(static_cast<std::size_t>(level)));
  }
};

struct RateReport {
  std::vector<double> r_n;      // V2I rates
  std::vector<double> r_m;      // V2V rates
  std::vector<double> r_m_e;    // eavesdropping rate per V2V link
  std::vector<double> r_m_sec;  // secrecy rate per V2V link
  std::vector<double> i_m;      // interference at each V2V receiver (mW)
  std::vector<double> i_eve;    // interference at the eavesdropper while decoding m (mW)

  double mean_secrecy() const {
    if (r_m_sec.empty()) return 0.0;
    double s = 0.0;
    for (double v : r_m_sec) s += v;
    return s / static_cast<double>(r_m_sec.size());
  }
};

struct EfficiencyReport {
  double zeta_v2v = 0.0;
  double zeta_v2i = 0.0;
  double objective = 0.0;
  double lambda_alpha = 0.9;
  double lambda_beta = 0.1;
  double bandwidth_per_subchannel = 0.0;
};

inline double v2i_rate(std::size_t n, const Allocation& al, const ChannelGains& g,
                       double noise_mw) {
  double interference = 0.0;
  for (std::size_t m = 0; m < al.num_v2v(); ++m)
    if (al.a(m, n)) interference += al.p_v2v_mw[m] * g.h_m_b(m);
  return std::log2(1.0 + al.p_v2i_mw * g.h_n_b(n) / (interference + noise_mw));
}

struct RateAndInterference {
  double rate = 0.0;
  double interference = 0.0;
};

namespace detail {

// Interference from the V2I link and co-channel V2V links on m's subchannel(s),
// seen through `v2i_gain(n)` and `v2v_gain(j)`.
template <class V2IGain, class V2VGain>
double co_channel_interference(std::size_t m, const Allocation& al, V2IGain v2i_gain,
                               V2VGain v2v_gain) {
  double sum = 0.0;
  for (std::size_t n = 0; n < al.num_v2i(); ++n) {
    if (!al.a(m, n)) continue;
    sum += al.p_v2i_mw * v2i_gain(n);
    for (std::size_t j = 0; j < al.num_v2v(); ++j)
      if (j != m && al.a(j, n)) sum += al.p_v2v_mw[j] * v2v_gain(j);
  }
  return sum;
}

}  // namespace detail

inline RateAndInterference v2v_rate(std::size_t m, const Allocation& al,
                                    const ChannelGains& g, double noise_mw) {
  const double i = detail::co_channel_interference(
      m, al, [&](std::size_t n) { return g.h_n_m(n, m); },
      [&](std::size_t j) { return g.h_m_j(m, j); });
  return {std::log2(1.0 + al.p_v2v_mw[m] * g.h_m(m) / (i + noise_mw)), i};
}

inline RateAndInterference eavesdrop_rate(std::size_t m, const Allocation& al,
                                          const ChannelGains& g, double noise_mw) {
  const double i = detail::co_channel_interference(
      m, al, [&](std::size_t n) { return g.h_n_e(n); },
      [&](std::size_t j) { return g.h_m_e(j); });
  return {std::log2(1.0 + al.p_v2v_mw[m] * g.h_m_e(m) / (i + noise_mw)), i};
}

inline double secrecy_rate(double r_m, double r_m_e) { return std::max(r_m - r_m_e, 0.0); }

inline RateReport compute_rates(const Allocation& al, const ChannelGains& g,
                                double noise_mw) {
  if (g.num_v2v() != al.num_v2v() || g.num_v2i() != al.num_v2i())
    throw Fault("compute_rates: allocation and gain dimensions differ");
  RateReport r;
  const std::size_t M = al.num_v2v(), N = al.num_v2i();
  r.r_n.resize(N);
  for (std::size_t n = 0; n < N; ++n) r.r_n[n] = v2i_rate(n, al, g, noise_mw);
  r.r_m.resize(M);
  r.r_m_e.resize(M);
  r.r_m_sec.resize(M);
  r.i_m.resize(M);
  r.i_eve.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto v = v2v_rate(m, al, g, noise_mw);
    const auto e = eavesdrop_rate(m, al, g, noise_mw);
    r.r_m[m] = v.rate;
    r.i_m[m] = v.interference;
    r.r_m_e[m] = e.rate;
    r.i_eve[m] = e.interference;
    r.r_m_sec[m] = secrecy_rate(v.rate, e.rate);
  }
  return r;
}

// Compositive efficiencies with powers in watts and bandwidth in hertz.
inline EfficiencyReport efficiency(const RateReport& r, const Allocation& al,
                                   const CommParams& p) {
  EfficiencyReport e;
  e.lambda_alpha = p.lambda_alpha;
  e.lambda_beta = p.lambda_beta();
  const double b = p.bandwidth_per_subchannel_hz();
  e.bandwidth_per_subchannel = b;
  const double total_b = b * static_cast<double>(al.num_v2i());
  const double pc = mw_to_watt(al.p_circuit_mw);
  if (!(pc > 0.0)) throw Fault("efficiency: circuit power must be positive");

  double v2v_bits = 0.0, v2v_power = 0.0;
  for (std::size_t m = 0; m < r.r_m.size(); ++m) {
    v2v_bits += b * r.r_m[m];
    v2v_power += mw_to_watt(al.p_v2v_mw[m]);
  }
  v2v_power += static_cast<double>(r.r_m.size()) * pc;
  double v2i_bits = 0.0;
  for (double rn : r.r_n) v2i_bits += b * rn;
  const double n = static_cast<double>(r.r_n.size());
  const double v2i_power = n * mw_to_watt(al.p_v2i_mw) + n * pc;

  e.zeta_v2v = r.r_m.empty() ? 0.0 : v2v_bits / (total_b * v2v_power);
  e.zeta_v2i = r.r_n.empty() ? 0.0 : v2i_bits / (total_b * v2i_power);
  e.objective = e.lambda_alpha * e.zeta_v2v + e.lambda_beta * e.zeta_v2i;
  return e;
}

inline bool secrecy_satisfied(const RateReport& r, double r_threshold) {
  return std::all_of(r.r_m_sec.begin(), r.r_m_sec.end(),
                     [&](double s) { return s >= r_threshold; });
}

// Shared reward: the weighted objective when every link meets the secrecy
// threshold, -1 otherwise.
inline double reward(const RateReport& r, const EfficiencyReport& e, double r_threshold) {
  return secrecy_satisfied(r, r_threshold) ? e.objective : -1.0;
}

struct ConstraintFlags {
  std::vector<bool> single_reuse;  // per row: sum_n a_mn <= 1
  std::vector<bool> secrecy;       // per link: R_sec >= R_T
  bool v2i_power = true;
  bool v2v_power = true;
  bool binary = true;

  static bool all(const std::vector<bool>& v) {
    return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
  }
  bool all_satisfied() const {
    return all(single_reuse) && all(secrecy) && v2i_power && v2v_power && binary;
  }
};

inline ConstraintFlags check_constraints(const Allocation& al, const RateReport& r,
                                         double r_threshold, const CommParams& p) {
  ConstraintFlags f;
  for (Eigen::Index m = 0; m < al.a.rows(); ++m) {
    int sum = 0;
    for (Eigen::Index n = 0; n < al.a.cols(); ++n) {
      const int v = al.a(m, n);
      if (v != 0 && v != 1) f.binary = false;
      sum += v;
    }
    f.single_reuse.push_back(sum <= 1);
  }
  for (double s : r.r_m_sec) f.secrecy.push_back(s >= r_threshold);
  f.v2i_power = al.p_v2i_mw >= 0.0 && al.p_v2i_mw <= dbm_to_mw(p.p_max_v2i_dbm);
  const double vmax = dbm_to_mw(p.p_max_v2v_dbm);
  for (double pw : al.p_v2v_mw)
    if (pw < 0.0 || pw > vmax) f.v2v_power = false;
  return f;
}

struct Evaluation {
  RateReport rates;
  EfficiencyReport efficiency;
  double reward = 0.0;
};

inline Evaluation evaluate(const Allocation& al, const ChannelGains& g, double noise_mw,
                           const CommParams& p) {
  Evaluation ev;
  ev.rates = compute_rates(al, g, noise_mw);
  ev.efficiency = efficiency(ev.rates, al, p);
  ev.reward = reward(ev.rates, ev.efficiency, p.r_threshold);
  return ev;
}

}  // namespace seedsim
