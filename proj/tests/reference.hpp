#pragma once

// Plain-loop re-derivations of the link budget used to cross-check the library.
// Nothing here calls into seedsim's rate code.

#include <algorithm>
#include <cmath>
#include <vector>

#include "seedsim/channel.hpp"
#include "seedsim/comm.hpp"
#include "seedsim/common.hpp"

namespace ref {

struct Instance {
  int M = 0, N = 0;
  std::vector<std::vector<int>> a;    // M x N
  std::vector<double> p_v2v_w;        // M
  double p_v2i_w = 0.0;
  double p_c_w = 0.0;
  double noise_w = 0.0;
  double bandwidth_hz = 0.0;          // per subchannel
  std::vector<double> h_m, h_m_b, h_m_e, h_n_b, h_n_e;
  std::vector<std::vector<double>> h_n_m;  // [n][m]
  std::vector<std::vector<double>> h_m_j;  // [m][j]
};

struct Result {
  std::vector<double> r_n, r_m, r_e, r_sec;
  double zeta_v2v = 0.0, zeta_v2i = 0.0;
};

inline Result evaluate(const Instance& x) {
  Result r;
  for (int n = 0; n < x.N; ++n) {
    double i = 0.0;
    for (int m = 0; m < x.M; ++m) i += x.a[m][n] * x.p_v2v_w[m] * x.h_m_b[m];
    r.r_n.push_back(std::log2(1.0 + x.p_v2i_w * x.h_n_b[n] / (i + x.noise_w)));
  }
  for (int m = 0; m < x.M; ++m) {
    double i_m = 0.0, i_e = 0.0;
    for (int n = 0; n < x.N; ++n) {
      i_m += x.a[m][n] * x.p_v2i_w * x.h_n_m[n][m];
      i_e += x.a[m][n] * x.p_v2i_w * x.h_n_e[n];
    }
    for (int n = 0; n < x.N; ++n)
      for (int j = 0; j < x.M; ++j) {
        if (j == m) continue;
        i_m += x.a[m][n] * x.a[j][n] * x.p_v2v_w[j] * x.h_m_j[m][j];
        i_e += x.a[m][n] * x.a[j][n] * x.p_v2v_w[j] * x.h_m_e[j];
      }
    const double rm = std::log2(1.0 + x.p_v2v_w[m] * x.h_m[m] / (i_m + x.noise_w));
    const double re = std::log2(1.0 + x.p_v2v_w[m] * x.h_m_e[m] / (i_e + x.noise_w));
    r.r_m.push_back(rm);
    r.r_e.push_back(re);
    r.r_sec.push_back(rm - re > 0.0 ? rm - re : 0.0);
  }
  double num = 0.0, pw = 0.0;
  for (int m = 0; m < x.M; ++m) {
    num += x.bandwidth_hz * r.r_m[m];
    pw += x.p_v2v_w[m];
  }
  pw += x.M * x.p_c_w;
  r.zeta_v2v = num / (x.N * x.bandwidth_hz * pw);
  num = 0.0;
  for (int n = 0; n < x.N; ++n) num += x.bandwidth_hz * r.r_n[n];
  r.zeta_v2i = num / (x.N * x.bandwidth_hz * (x.N * x.p_v2i_w + x.N * x.p_c_w));
  return r;
}

// Random instance with one subchannel per link (or none) and gains spread over
// several decades.
inline Instance random_instance(seedsim::Rng& rng, int M, int N, const seedsim::CommParams& p,
                                double noise_mw, std::vector<int>& sub, std::vector<int>& lvl) {
  Instance x;
  x.M = M;
  x.N = N;
  x.a.assign(M, std::vector<int>(N, 0));
  sub.assign(M, 0);
  lvl.assign(M, 0);
  for (int m = 0; m < M; ++m) {
    sub[m] = static_cast<int>(rng.below(N));
    lvl[m] = static_cast<int>(rng.below(p.v2v_power_levels_dbm.size()));
    x.a[m][sub[m]] = 1;
    x.p_v2v_w.push_back(std::pow(10.0, p.v2v_power_levels_dbm[lvl[m]] / 10.0) / 1000.0);
  }
  x.p_v2i_w = std::pow(10.0, p.p_v2i_dbm / 10.0) / 1000.0;
  x.p_c_w = std::pow(10.0, p.p_circuit_dbm / 10.0) / 1000.0;
  x.noise_w = noise_mw / 1000.0;
  x.bandwidth_hz = p.total_bandwidth_hz / p.num_subchannels;
  auto g = [&] { return std::pow(10.0, rng.uniform(-14.0, -6.0)); };
  for (int m = 0; m < M; ++m) {
    x.h_m.push_back(g());
    x.h_m_b.push_back(g());
    x.h_m_e.push_back(g());
  }
  for (int n = 0; n < N; ++n) {
    x.h_n_b.push_back(g());
    x.h_n_e.push_back(g());
  }
  x.h_n_m.assign(N, std::vector<double>(M));
  for (auto& row : x.h_n_m)
    for (auto& v : row) v = g();
  x.h_m_j.assign(M, std::vector<double>(M, 0.0));
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < M; ++j)
      if (j != m) x.h_m_j[m][j] = g();
  return x;
}

inline seedsim::ChannelGains to_gains(const Instance& x) {
  auto g = seedsim::ChannelGains::zeros(x.M, x.N);
  for (int m = 0; m < x.M; ++m) {
    g.h_m(m) = x.h_m[m];
    g.h_m_b(m) = x.h_m_b[m];
    g.h_m_e(m) = x.h_m_e[m];
    for (int j = 0; j < x.M; ++j) g.h_m_j(m, j) = x.h_m_j[m][j];
  }
  for (int n = 0; n < x.N; ++n) {
    g.h_n_b(n) = x.h_n_b[n];
    g.h_n_e(n) = x.h_n_e[n];
    for (int m = 0; m < x.M; ++m) g.h_n_m(n, m) = x.h_n_m[n][m];
  }
  return g;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace ref
