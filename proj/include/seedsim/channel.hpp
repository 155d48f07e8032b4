#pragma once

#include <cmath>
#include <map>
#include <utility>

#include <Eigen/Dense>

#include "seedsim/common.hpp"
#include "seedsim/topology.hpp"

namespace seedsim {

struct ChannelParams {
  double carrier_frequency_hz = 2e9;
  double noise_power_dbm = -114.0;
  double bs_antenna_gain_dbi = 8.0;
  double eavesdropper_antenna_gain_dbi = 6.0;
  double vehicle_antenna_gain_dbi = 3.0;
  double shadow_std_los_db = 3.0;
  double shadow_std_nlos_db = 4.0;
  double decorrelation_distance_m = 10.0;
  // Urban V2V loss: a + b*log10(d_m) + c*log10(fc_GHz), plus a flat NLOS penalty.
  double v2v_los_intercept_db = 38.77;
  double v2v_los_slope_db = 16.7;
  double v2v_freq_coeff_db = 18.2;
  double nlos_penalty_db = 15.0;
  // Vehicle to BS loss: a + b*log10(d_km).
  double bs_intercept_db = 128.1;
  double bs_slope_db = 37.6;
  double min_distance_m = 1.0;

  double noise_mw() const { return dbm_to_mw(noise_power_dbm); }

  void validate() const {
    const double all[] = {carrier_frequency_hz, noise_power_dbm, bs_antenna_gain_dbi,
                          eavesdropper_antenna_gain_dbi, vehicle_antenna_gain_dbi,
                          shadow_std_los_db, shadow_std_nlos_db, decorrelation_distance_m,
                          nlos_penalty_db, min_distance_m};
    for (double v : all)
      if (!std::isfinite(v)) throw Fault("channel parameters must be finite");
    if (!(decorrelation_distance_m > 0.0)) throw Fault("decorrelation distance must be > 0");
    if (!(carrier_frequency_hz > 0.0)) throw Fault("carrier frequency must be > 0");
    if (nlos_penalty_db < 0.0) throw Fault("NLOS penalty must be non-negative");
    if (!(min_distance_m > 0.0)) throw Fault("minimum distance must be > 0");
    if (!(noise_mw() > 0.0)) throw Fault("noise power underflows to zero");
  }
};

// Vehicle-to-vehicle (and vehicle-to-eavesdropper) path loss. Distances below
// min_distance_m are clamped.
inline double path_loss_db(Vec2 tx, Vec2 rx, bool los, const ChannelParams& p) {
  const double d = std::max(distance(tx, rx), p.min_distance_m);
  const double pl = p.v2v_los_intercept_db + p.v2v_los_slope_db * std::log10(d) +
                    p.v2v_freq_coeff_db * std::log10(p.carrier_frequency_hz / 1e9);
  return los ? pl : pl + p.nlos_penalty_db;
}

inline double path_loss_bs_db(Vec2 tx, Vec2 bs, const ChannelParams& p) {
  const double d = std::max(distance(tx, bs), p.min_distance_m);
  return p.bs_intercept_db + p.bs_slope_db * std::log10(d / 1000.0);
}

// Correlated log-normal update: value' = rho*value + sqrt(1-rho^2)*sigma*z.
inline double shadow_correlation(double displacement_m, double decorrelation_m) {
  return std::exp(-displacement_m / decorrelation_m);
}

inline double update_shadowing(double value_db, double displacement_m,
                               double decorrelation_m, double sigma_db, Rng& rng) {
  if (displacement_m < 0.0) throw Fault("update_shadowing: negative displacement");
  const double rho = shadow_correlation(displacement_m, decorrelation_m);
  return rho * value_db + std::sqrt(1.0 - rho * rho) * sigma_db * rng.normal();
}

// Entities that can sit at either end of a channel: vehicles by id, plus the
// base station and the eavesdropper.
inline constexpr int kBaseStation = -1;
inline constexpr int kEavesdropper = -2;

class ShadowState {
 public:
  struct Entry {
    double value_db = 0.0;
    Vec2 relative;  // rx - tx at the last update
  };

  // Returns the shadowing on tx->rx, drawing a fresh value on first use.
  double get(int tx, int rx, Vec2 relative, double sigma_db, Rng& rng) {
    auto [it, inserted] = entries_.try_emplace({tx, rx});
    if (inserted) {
      it->second.value_db = sigma_db * rng.normal();
      it->second.relative = relative;
    }
    return it->second.value_db;
  }

  void set(int tx, int rx, double value_db, Vec2 relative = {}) {
    entries_[{tx, rx}] = {value_db, relative};
  }

  // Evolves every known link by the change in its tx->rx offset since the last
  // update. `relative_of` maps (tx, rx) to the current offset and `sigma_of` to
  // the current standard deviation.
  template <class RelativeFn, class SigmaFn>
  void update(RelativeFn relative_of, SigmaFn sigma_of, double decorrelation_m, Rng& rng) {
    for (auto& [key, e] : entries_) {
      const Vec2 now = relative_of(key.first, key.second);
      const double moved = norm(now - e.relative);
      e.value_db = update_shadowing(e.value_db, moved, decorrelation_m,
                                    sigma_of(key.first, key.second), rng);
      e.relative = now;
    }
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::map<std::pair<int, int>, Entry> entries_;
};

// All linear power gains for one subframe. Matrices are indexed
// [receiver-side link][transmitter-side link] as in the rate formulas.
struct ChannelGains {
  Eigen::VectorXd h_m;    // V2V m: own tx -> own rx
  Eigen::VectorXd h_n_b;  // V2I n tx -> BS
  Eigen::VectorXd h_m_b;  // V2V m tx -> BS
  Eigen::MatrixXd h_n_m;  // (n, m): V2I n tx -> V2V m rx
  Eigen::MatrixXd h_m_j;  // (m, j): V2V j tx -> V2V m rx
  Eigen::VectorXd h_m_e;  // V2V m tx -> eavesdropper
  Eigen::VectorXd h_n_e;  // V2I n tx -> eavesdropper

  std::size_t num_v2v() const { return static_cast<std::size_t>(h_m.size()); }
  std::size_t num_v2i() const { return static_cast<std::size_t>(h_n_b.size()); }

  static ChannelGains zeros(std::size_t m, std::size_t n) {
    ChannelGains g;
    g.h_m = Eigen::VectorXd::Zero(m);
    g.h_n_b = Eigen::VectorXd::Zero(n);
    g.h_m_b = Eigen::VectorXd::Zero(m);
    g.h_n_m = Eigen::MatrixXd::Zero(n, m);
    g.h_m_j = Eigen::MatrixXd::Zero(m, m);
    g.h_m_e = Eigen::VectorXd::Zero(m);
    g.h_n_e = Eigen::VectorXd::Zero(n);
    return g;
  }
};

inline double gain_linear(double path_loss_db, double shadow_db, double g_tx_dbi,
                          double g_rx_dbi) {
  return db_to_linear(-path_loss_db + shadow_db + g_tx_dbi + g_rx_dbi);
}

namespace detail {

inline Vec2 entity_position(const Topology& t, int id) {
  if (id == kBaseStation) return t.bs_pos;
  if (id == kEavesdropper) return t.eavesdropper_pos;
  if (id < 0 || static_cast<std::size_t>(id) >= t.vehicles.size())
    throw Fault("channel: entity index out of range");
  return t.vehicles[id].position;
}

}  // namespace detail

// Shadowing standard deviation for the current geometry of tx->rx.
inline double shadow_sigma(const Topology& t, int tx, int rx, const ChannelParams& p) {
  const bool los = t.geometry.line_of_sight(detail::entity_position(t, tx),
                                            detail::entity_position(t, rx));
  return los ? p.shadow_std_los_db : p.shadow_std_nlos_db;
}

// Single channel tx->rx including path loss, shadowing and antenna gains.
inline double link_gain(const Topology& t, int tx, int rx, ShadowState& shadow,
                        const ChannelParams& p, Rng& rng) {
  const Vec2 a = detail::entity_position(t, tx);
  const Vec2 b = detail::entity_position(t, rx);
  const bool los = t.geometry.line_of_sight(a, b);
  const double sigma = los ? p.shadow_std_los_db : p.shadow_std_nlos_db;
  const double sh = shadow.get(tx, rx, b - a, sigma, rng);
  const double g_tx = p.vehicle_antenna_gain_dbi;
  double g_rx = p.vehicle_antenna_gain_dbi;
  double pl;
  if (rx == kBaseStation) {
    g_rx = p.bs_antenna_gain_dbi;
    pl = path_loss_bs_db(a, b, p);
  } else {
    if (rx == kEavesdropper) g_rx = p.eavesdropper_antenna_gain_dbi;
    pl = path_loss_db(a, b, los, p);
  }
  return gain_linear(pl, sh, g_tx, g_rx);
}

inline ChannelGains compute_gains(const Topology& t, ShadowState& shadow,
                                  const ChannelParams& p, Rng& rng) {
  const std::size_t M = t.num_v2v(), N = t.num_v2i();
  ChannelGains g = ChannelGains::zeros(M, N);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& lm = t.v2v_links[m];
    g.h_m(m) = link_gain(t, lm.tx, lm.rx, shadow, p, rng);
    g.h_m_b(m) = link_gain(t, lm.tx, kBaseStation, shadow, p, rng);
    g.h_m_e(m) = link_gain(t, lm.tx, kEavesdropper, shadow, p, rng);
    for (std::size_t j = 0; j < M; ++j)
      g.h_m_j(m, j) = j == m ? g.h_m(m)
                             : link_gain(t, t.v2v_links[j].tx, lm.rx, shadow, p, rng);
  }
  for (std::size_t n = 0; n < N; ++n) {
    const int tx = t.v2i_links[n];
    g.h_n_b(n) = link_gain(t, tx, kBaseStation, shadow, p, rng);
    g.h_n_e(n) = link_gain(t, tx, kEavesdropper, shadow, p, rng);
    for (std::size_t m = 0; m < M; ++m)
      g.h_n_m(n, m) = link_gain(t, tx, t.v2v_links[m].rx, shadow, p, rng);
  }
  return g;
}

// Advances shadowing for every known link after the topology moved.
inline void refresh_shadowing(const Topology& t, ShadowState& shadow,
                              const ChannelParams& p, Rng& rng) {
  shadow.update(
      [&](int tx, int rx) {
        return detail::entity_position(t, rx) - detail::entity_position(t, tx);
      },
      [&](int tx, int rx) { return shadow_sigma(t, tx, rx, p); },
      p.decorrelation_distance_m, rng);
}

}  // namespace seedsim
