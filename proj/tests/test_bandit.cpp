#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles/bandit_replay.hpp"
#include "oracles/numeric_oracles.hpp"
#include "ppdl/bandit.hpp"
#include "ppdl/errors.hpp"

using namespace ppdl;

namespace {

std::vector<NodeId> ids(std::size_t n) {
  std::vector<NodeId> v(n);
  std::iota(v.begin(), v.end(), NodeId{1});
  return v;
}

// Drives a BanditState and the replay oracle with the same random history.
// Arms are drawn with a bias toward a few favourites so that the significant
// and competitive sets are nontrivial.
void random_trace(BanditState& state, oracle::BanditReplay& replay, std::size_t rounds,
                  Rng& rng, double q) {
  std::uniform_int_distribution<ArmIndex> any(0, state.num_arms() - 1);
  std::uniform_int_distribution<ArmIndex> few(0, std::min<ArmIndex>(4, state.num_arms() - 1));
  std::uniform_int_distribution<int> reward_step(0, 20);
  for (std::size_t t = 0; t < rounds; ++t) {
    const ArmIndex arm = uniform01(rng) < 0.6 ? few(rng) : any(rng);
    const double r = reward_step(rng) / 20.0;
    state.record_outcome(arm, r, q);
    replay.record(arm, r, q);
  }
}

}  // namespace

TEST(QSchedule, Examples) {
  PseudoRewardConfig c;
  c.q0 = 0.2;
  EXPECT_EQ(q_of_t(c, 57), 0.2);
  PseudoRewardConfig e{QSchedule::exponential, 0.5, 0.07, 200};
  EXPECT_DOUBLE_EQ(q_of_t(e, 0), 0.5);
  EXPECT_DOUBLE_EQ(q_of_t(e, 200), 0.07);
  EXPECT_DOUBLE_EQ(q_of_t(e, 1000), 0.07);
  for (std::uint64_t t = 1; t <= 200; ++t) EXPECT_LE(q_of_t(e, t), q_of_t(e, t - 1));
  EXPECT_NEAR(q_of_t(e, 100), std::sqrt(0.5 * 0.07), 1e-12);
}

TEST(QSchedule, Validation) {
  EXPECT_THROW((PseudoRewardConfig{QSchedule::constant, 0.0, 0.07, 10}.validate()), ConfigError);
  EXPECT_THROW((PseudoRewardConfig{QSchedule::exponential, 0.1, 0.2, 10}.validate()), ConfigError);
  EXPECT_THROW((PseudoRewardConfig{QSchedule::exponential, 0.5, 0.07, 0}.validate()), ConfigError);
  EXPECT_NO_THROW((PseudoRewardConfig{QSchedule::exponential, 0.5, 0.07, 10}.validate()));
}

TEST(PseudoReward, Examples) {
  EXPECT_EQ(pseudo_reward(0.3, 0.2, 0), 1.0);
  EXPECT_DOUBLE_EQ(pseudo_reward(0.5, 0.2, 2), 0.6);
  EXPECT_EQ(pseudo_reward(0.95, 0.2, 1), 1.0);
  EXPECT_THROW(pseudo_reward(1.1, 0.2, 1), DomainError);
  EXPECT_THROW(pseudo_reward(-0.1, 0.2, 1), DomainError);
}

TEST(BanditState, RecordOutcomeExamples) {
  BanditState s(10, 3);
  s.record_outcome(7, 1.0, 0.2);
  EXPECT_EQ(s.plays(7), 1u);
  EXPECT_EQ(s.empirical_reward(7), 1.0);
  EXPECT_EQ(s.pseudo_sums(7)[1], 1.0);
  EXPECT_EQ(s.cum_loss()[7], 0.0);

  BanditState t(10, 2);
  t.record_outcome(7, 0.4, 0.2);
  t.record_outcome(7, 0.6, 0.2);
  EXPECT_DOUBLE_EQ(t.empirical_reward(7), 0.5);
  EXPECT_DOUBLE_EQ(t.cum_loss()[7], 1.0);
  EXPECT_EQ(t.round(), 2u);
  EXPECT_EQ(t.last_arm(), 7u);
  EXPECT_EQ(t.last_reward(), 0.6);

  EXPECT_THROW(t.record_outcome(7, 1.5, 0.2), DomainError);
  EXPECT_THROW(t.record_outcome(10, 0.5, 0.2), IndexError);
  EXPECT_THROW(t.empirical_reward(3), StateError);
}

TEST(BanditState, StatisticsMatchReplay) {
  Rng rng = make_stream(11);
  GroupCatalog cat(0, ids(10), 3);
  BanditState s(cat.num_arms(), 3);
  oracle::BanditReplay replay(ids(10), 3);
  random_trace(s, replay, 50, rng, 0.2);

  std::uint64_t total = 0;
  for (ArmIndex j = 0; j < cat.num_arms(); ++j) {
    ASSERT_EQ(s.plays(j), replay.plays(j));
    ASSERT_EQ(s.cum_loss()[j], replay.cum_loss(j));
    total += s.plays(j);
    if (s.plays(j) == 0) continue;
    ASSERT_EQ(s.empirical_reward(j), replay.mu(j));
    const auto sums = s.pseudo_sums(j);
    for (std::size_t u = 1; u < 3; ++u) {
      const double mean = sums[u - 1] / s.plays(j);
      EXPECT_GE(mean, 0.0);
      EXPECT_LE(mean, 1.0);
      if (u > 1) {
        EXPECT_LE(sums[u - 1], sums[u - 2]);
      }
    }
  }
  EXPECT_EQ(total, s.round());
}

TEST(EmpiricalPseudoReward, Cases) {
  GroupCatalog cat(0, ids(6), 2);
  BanditState s(cat.num_arms(), 2);
  const ArmIndex a = cat.rank(Group{{1, 2}});
  const ArmIndex b = cat.rank(Group{{2, 3}});
  const ArmIndex c = cat.rank(Group{{4, 5}});
  s.record_outcome(a, 0.5, 0.2);
  EXPECT_EQ(empirical_pseudo_reward(s, a, a, cat), 0.5);
  EXPECT_EQ(empirical_pseudo_reward(s, c, a, cat), 1.0);
  EXPECT_DOUBLE_EQ(empirical_pseudo_reward(s, b, a, cat), 0.7);
  EXPECT_THROW(empirical_pseudo_reward(s, a, b, cat), StateError);
}

TEST(EmpiricalPseudoReward, MatchesNaiveAccumulationAllPairs) {
  Rng rng = make_stream(12);
  GroupCatalog cat(0, ids(10), 3);
  BanditState s(cat.num_arms(), 3);
  oracle::BanditReplay replay(ids(10), 3);
  // Vary q per round so the bucket sums see different slack values.
  std::uniform_int_distribution<ArmIndex> any(0, cat.num_arms() - 1);
  for (int t = 0; t < 60; ++t) {
    const ArmIndex arm = any(rng) % 15;
    const double r = uniform01(rng);
    const double q = 0.05 + 0.01 * (t % 7);
    s.record_outcome(arm, r, q);
    replay.record(arm, r, q);
  }
  for (ArmIndex src : s.played_arms()) {
    for (ArmIndex tgt = 0; tgt < cat.num_arms(); ++tgt) {
      ASSERT_EQ(cat.overlap(tgt, src), replay.overlap(tgt, src));
      ASSERT_EQ(empirical_pseudo_reward(s, tgt, src, cat), replay.phi(tgt, src))
          << "target " << tgt << " source " << src;
    }
  }
}

TEST(CompetitiveSet, DegenerateCases) {
  GroupCatalog cat(0, ids(5), 2);
  BanditState s(cat.num_arms(), 2);
  EXPECT_EQ(competitive_set(s, cat, 20).size(), cat.num_arms());

  s.record_outcome(3, 0.4, 0.2);
  // divisor 1: plays 1 > round 1 fails, so S is empty.
  EXPECT_EQ(significant_set(s, 1).size(), 0u);
  EXPECT_EQ(competitive_set(s, cat, 1).size(), cat.num_arms());
  // divisor 2: S = {3}; q = 1 saturates every pseudo-reward.
  BanditState sat(cat.num_arms(), 2);
  sat.record_outcome(3, 0.4, 1.0);
  EXPECT_EQ(significant_set(sat, 2), std::vector<ArmIndex>{3});
  EXPECT_EQ(competitive_set(sat, cat, 2).size(), cat.num_arms());
  EXPECT_THROW(significant_set(sat, 0), DomainError);
}

TEST(CompetitiveSet, RoundOneSingleArm) {
  GroupCatalog cat(0, ids(5), 2);
  BanditState s(cat.num_arms(), 2);
  s.record_outcome(0, 0.9, 0.05);  // {1,2}, mu = 0.9, overlap pseudo 0.95
  const auto comp = competitive_set(s, cat, 2);
  for (ArmIndex j = 0; j < cat.num_arms(); ++j) {
    const bool member = std::find(comp.begin(), comp.end(), j) != comp.end();
    const bool expected = j == 0 || empirical_pseudo_reward(s, j, 0, cat) >= 0.9;
    EXPECT_EQ(member, expected) << j;
  }
}

TEST(CompetitiveSet, MatchesBruteForceOnRandomTraces) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = make_stream(100 + seed);
    GroupCatalog cat(0, ids(8), 2);
    BanditState s(cat.num_arms(), 2);
    oracle::BanditReplay replay(ids(8), 2);
    std::uniform_int_distribution<ArmIndex> any(0, cat.num_arms() - 1);
    for (int t = 0; t < 200; ++t) {
      const ArmIndex arm = uniform01(rng) < 0.5 ? any(rng) % 6 : any(rng);
      const double r = std::round(uniform01(rng) * 10.0) / 10.0;
      s.record_outcome(arm, r, 0.1);
      replay.record(arm, r, 0.1);
      for (std::uint64_t div : {3u, 8u, 28u}) {
        ASSERT_EQ(significant_set(s, div), replay.significant(div));
        ASSERT_EQ(competitive_set(s, cat, div), replay.competitive(div))
            << "seed " << seed << " t " << t << " divisor " << div;
      }
    }
  }
}

TEST(Tsallis, UniformLossesGiveUniformDistribution) {
  for (double level : {0.0, 3.5, 1000.0}) {
    for (std::uint64_t t : {1u, 7u, 500u}) {
      std::vector<double> losses(37, level);
      double x = 0.0;
      const auto p = tsallis_distribution(losses, t, x);
      for (double v : p) EXPECT_NEAR(v, 1.0 / 37.0, 1e-9);
    }
  }
  double x = 0.0;
  const auto p = tsallis_distribution(std::vector<double>(4, 0.0), 1, x);
  for (double v : p) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(Tsallis, TwoArmFixedPointMatchesBisection) {
  const std::vector<double> losses{0.0, 1.0};
  double x = 0.0;
  const auto p = tsallis_distribution(losses, 4, x);
  double x_ref = 0.0;
  const auto ref = oracle::tsallis_bisection(losses, 4, 1e-15, &x_ref);
  EXPECT_NEAR(p[0], ref[0], 1e-9);
  EXPECT_NEAR(p[1], ref[1], 1e-9);
  EXPECT_NEAR(x, x_ref, 1e-8);
  // Frozen from the bisection oracle.
  EXPECT_NEAR(x, -2.4533262527, 1e-8);
  EXPECT_NEAR(p[0], 0.6645832312, 1e-9);
  EXPECT_NEAR(p[1], 0.3354167688, 1e-9);
}

TEST(Tsallis, RandomInstancesMatchBisection) {
  Rng rng = make_stream(5);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rep % 30;
    std::vector<double> losses(n);
    for (auto& l : losses) l = 20.0 * uniform01(rng);
    const std::uint64_t t = 1 + rep * 13;
    double x = 5.0 * (uniform01(rng) - 0.5);  // arbitrary carried value
    const auto p = tsallis_distribution(losses, t, x);
    const auto ref = oracle::tsallis_bisection(losses, t, 1e-15);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(p[j], ref[j], 1e-9);
      EXPECT_GT(p[j], 0.0);
      EXPECT_LE(p[j], 1.0);
      sum += p[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Tsallis, ShiftInvariance) {
  Rng rng = make_stream(6);
  std::vector<double> losses(25);
  for (auto& l : losses) l = 10.0 * uniform01(rng);
  auto shifted = losses;
  for (auto& l : shifted) l += 123.25;
  double x1 = 0.0, x2 = 0.0;
  const auto a = tsallis_distribution(losses, 40, x1);
  const auto b = tsallis_distribution(shifted, 40, x2);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-8);
}

TEST(Tsallis, Errors) {
  double x = 0.0;
  EXPECT_THROW(tsallis_distribution(std::vector<double>{0.0, 1.0}, 0, x), DomainError);
  EXPECT_THROW(tsallis_distribution(std::vector<double>{}, 1, x), DomainError);
  const std::vector<double> bad{0.0, std::nan("")};
  try {
    tsallis_distribution(bad, 3, x);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("t=3"), std::string::npos);
  }
}

TEST(Tsallis, UpdateUsesNextRound) {
  BanditState s(3, 2);
  s.record_outcome(0, 0.0, 0.1);
  const auto& d = tsallis_update(s);
  double x = 0.0;
  const auto ref = tsallis_distribution(std::vector<double>{1.0, 0.0, 0.0}, 2, x);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(d[j], ref[j], 1e-12);
  EXPECT_LT(d[0], d[1]);
}

TEST(Tsallis, StationaryBernoulliConcentrates) {
  // Best arm mean 0.8, the rest 0.5. Importance-weighted losses so the
  // estimator is unbiased.
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    BanditState s(10, 1, LossMode::importance_weighted);
    Rng rng = make_stream(seed, {77});
    std::vector<ArmIndex> all(10);
    std::iota(all.begin(), all.end(), ArmIndex{0});
    for (int t = 0; t < 5000; ++t) {
      tsallis_update(s);
      const ArmIndex arm = select_arm(s, all, rng);
      const double mean = arm == 3 ? 0.8 : 0.5;
      s.record_outcome(arm, uniform01(rng) < mean ? 1.0 : 0.0, 0.0);
    }
    tsallis_update(s);
    EXPECT_GE(s.dist()[3], 0.9) << "seed " << seed;
  }
}

TEST(SelectArm, Singleton) {
  BanditState s(5, 2);
  Rng rng = make_stream(1);
  const std::vector<ArmIndex> one{3};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(select_arm(s, one, rng), 3u);
  EXPECT_EQ(s.last_sample_probability(), 1.0);
  EXPECT_THROW(select_arm(s, std::vector<ArmIndex>{}, rng), DomainError);
}

TEST(SelectArm, UniformFrequencies) {
  const std::size_t n = 8;
  BanditState s(n, 2);
  Rng rng = make_stream(2);
  std::vector<ArmIndex> all(n);
  std::iota(all.begin(), all.end(), ArmIndex{0});
  std::vector<int> counts(n, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[select_arm(s, all, rng)]++;
  const double mean = draws / static_cast<double>(n);
  const double sd = std::sqrt(draws * (1.0 / n) * (1.0 - 1.0 / n));
  for (int c : counts) EXPECT_LE(std::abs(c - mean), 3.0 * sd);
}

TEST(SelectArm, RestrictionPreservesRatios) {
  BanditState s(4, 2);
  std::vector<double> losses{0.0, 2.0, 5.0, 1.0};
  s.set_cum_loss(losses);
  s.set_round(9);
  const auto& d = tsallis_update(s);
  const std::vector<ArmIndex> comp{1, 3};
  Rng rng = make_stream(3);
  const std::size_t draws = 200000;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < draws; ++i) ones += select_arm(s, comp, rng) == 1;
  const double expected = d[1] / (d[1] + d[3]);
  const double sd = std::sqrt(expected * (1 - expected) / draws);
  EXPECT_NEAR(ones / static_cast<double>(draws), expected, 4 * sd);
  select_arm(s, comp, rng);
  const ArmIndex last = *s.last_arm();
  EXPECT_DOUBLE_EQ(s.last_sample_probability(), d[last] / (d[1] + d[3]));
}

TEST(Entropy, Values) {
  EXPECT_NEAR(entropy(std::vector<double>(4, 0.25)), std::log(4.0), 1e-15);
  EXPECT_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
}
