#include <cmath>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "reference.hpp"
#include "seedsim/comm.hpp"

using namespace seedsim;

namespace {

// Noise 1 mW keeps the SINR arithmetic readable.
constexpr double kNoise = 1.0;

CommParams single(int n = 1) {
  CommParams p;
  p.num_subchannels = n;
  p.total_bandwidth_hz = n;  // 1 Hz per subchannel
  return p;
}

}  // namespace

TEST(V2IRate, NoReuseUnitSnr) {
  const CommParams p = single();
  Allocation al = Allocation::empty(1, p);
  auto g = ChannelGains::zeros(1, 1);
  g.h_n_b(0) = kNoise / al.p_v2i_mw;
  EXPECT_DOUBLE_EQ(v2i_rate(0, al, g, kNoise), 1.0);
}

TEST(V2IRate, OneInterfererAtTwiceNoise) {
  const CommParams p = single();
  Allocation al = Allocation::from_choices({0}, {0}, p);
  auto g = ChannelGains::zeros(1, 1);
  g.h_n_b(0) = 3.0 * kNoise / al.p_v2i_mw;
  g.h_m_b(0) = 2.0 * kNoise / al.p_v2v_mw[0];
  EXPECT_NEAR(v2i_rate(0, al, g, kNoise), 1.0, 1e-15);
}

TEST(V2VRate, UnassignedRowIsInterferenceFree) {
  const CommParams p = single(2);
  Allocation al = Allocation::empty(2, p);
  auto g = ChannelGains::zeros(2, 2);
  g.h_m << 1e-3, 2e-3;
  g.h_n_m.setConstant(1.0);
  g.h_m_j.setConstant(1.0);
  const auto r = v2v_rate(0, al, g, kNoise);
  EXPECT_EQ(r.interference, 0.0);
  EXPECT_DOUBLE_EQ(r.rate, std::log2(1.0 + al.p_v2v_mw[0] * 1e-3 / kNoise));
}

TEST(V2VRate, SharedSubchannelMatchesDoubleLoop) {
  const CommParams p = single(2);
  Allocation al = Allocation::from_choices({1, 1}, {0, 2}, p);
  auto g = ChannelGains::zeros(2, 2);
  g.h_m << 1e-4, 3e-4;
  g.h_n_m << 1e-6, 2e-6, 4e-6, 8e-6;
  g.h_m_j << 0.0, 5e-7, 7e-7, 0.0;
  for (std::size_t m = 0; m < 2; ++m) {
    double lit = 0.0;
    for (int n = 0; n < 2; ++n) {
      lit += al.a(m, n) * al.p_v2i_mw * g.h_n_m(n, m);
      for (std::size_t j = 0; j < 2; ++j)
        if (j != m) lit += al.a(m, n) * al.a(j, n) * al.p_v2v_mw[j] * g.h_m_j(m, j);
    }
    const auto r = v2v_rate(m, al, g, kNoise);
    EXPECT_DOUBLE_EQ(r.interference, lit);
    EXPECT_GT(r.interference, al.p_v2i_mw * g.h_n_m(1, m));  // both terms present
  }
}

TEST(EavesdropRate, VanishingGainGivesZero) {
  const CommParams p = single();
  Allocation al = Allocation::from_choices({0}, {0}, p);
  auto g = ChannelGains::zeros(1, 1);
  g.h_m(0) = 1e-6;
  EXPECT_EQ(eavesdrop_rate(0, al, g, kNoise).rate, 0.0);
}

TEST(EavesdropRate, SymmetricWithLegitimateLink) {
  const CommParams p = single();
  Allocation al = Allocation::from_choices({0}, {1}, p);
  auto g = ChannelGains::zeros(1, 1);
  g.h_m(0) = g.h_m_e(0) = 1e-5;
  g.h_n_m(0, 0) = g.h_n_e(0) = 1e-7;
  EXPECT_DOUBLE_EQ(eavesdrop_rate(0, al, g, kNoise).rate, v2v_rate(0, al, g, kNoise).rate);
}

TEST(Secrecy, ClampAtZero) {
  EXPECT_DOUBLE_EQ(secrecy_rate(2.0, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(secrecy_rate(0.5, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(secrecy_rate(0.7, 0.7), 0.0);
}

TEST(Efficiency, AllRatesZero) {
  const CommParams p = single();
  Allocation al = Allocation::from_choices({0}, {0}, p);
  RateReport r;
  r.r_m = {0.0};
  r.r_n = {0.0};
  const auto e = efficiency(r, al, p);
  EXPECT_EQ(e.zeta_v2v, 0.0);
  EXPECT_EQ(e.zeta_v2i, 0.0);
}

TEST(Efficiency, HandArithmeticUnitExample) {
  CommParams p = single();
  Allocation al = Allocation::from_choices({0}, {0}, p);
  al.p_v2v_mw = {500.0};
  al.p_circuit_mw = 500.0;
  RateReport r;
  r.r_m = {1.0};
  r.r_n = {0.0};
  EXPECT_DOUBLE_EQ(efficiency(r, al, p).zeta_v2v, 1.0);
}

TEST(Reward, PassThroughAndPenalty) {
  RateReport r;
  r.r_m_sec = {0.5, 0.3};
  EfficiencyReport e;
  e.objective = 0.8;
  EXPECT_DOUBLE_EQ(reward(r, e, 0.1), 0.8);
  r.r_m_sec = {0.5, 0.05};
  EXPECT_EQ(reward(r, e, 0.1), -1.0);
  r.r_m_sec = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(reward(r, e, 0.0), 0.8);
}

TEST(Constraints, DoubleReuseRowViolatesSingleReuse) {
  const CommParams p = single(3);
  Allocation al = Allocation::empty(2, p);
  al.a(0, 0) = al.a(0, 1) = 1;
  al.a(1, 2) = 1;
  RateReport r;
  r.r_m_sec = {1.0, 1.0};
  const auto f = check_constraints(al, r, 0.1, p);
  EXPECT_FALSE(f.single_reuse[0]);
  EXPECT_TRUE(f.single_reuse[1]);
  EXPECT_FALSE(f.all_satisfied());
}

TEST(Constraints, FreshAllocationSatisfiesAllButMaybeSecrecy) {
  const CommParams p;
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> sub, lvl;
    auto x = ref::random_instance(rng, 6, p.num_subchannels, p, dbm_to_mw(-114.0), sub, lvl);
    const Allocation al = Allocation::from_choices(sub, lvl, p);
    const auto rep = compute_rates(al, ref::to_gains(x), dbm_to_mw(-114.0));
    const auto f = check_constraints(al, rep, p.r_threshold, p);
    EXPECT_TRUE(ConstraintFlags::all(f.single_reuse));
    EXPECT_TRUE(f.binary);
    EXPECT_TRUE(f.v2i_power);
    EXPECT_TRUE(f.v2v_power);
    for (std::size_t m = 0; m < rep.r_m_sec.size(); ++m)
      EXPECT_EQ(f.secrecy[m], rep.r_m_sec[m] >= p.r_threshold);
  }
}

TEST(Allocation, ChoicesOutOfRangeFault) {
  const CommParams p;
  EXPECT_THROW(Allocation::from_choices({20}, {0}, p), Fault);
  EXPECT_THROW(Allocation::from_choices({0}, {4}, p), std::out_of_range);
  EXPECT_THROW(Allocation::from_choices({0, 1}, {0}, p), Fault);
}

TEST(Rates, LiteralSummationAgreement) {
  const auto r = checks::formula_check(300, 2024);
  EXPECT_EQ(r.instances, 300);
  EXPECT_LT(r.worst_rel, 1e-12);
}

TEST(CommParamsTest, Validation) {
  CommParams p;
  EXPECT_NO_THROW(p.validate());
  p.lambda_alpha = 1.5;
  EXPECT_THROW(p.validate(), Fault);
}
