#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ppdl/groups.hpp"
#include "ppdl/rng.hpp"

namespace ppdl {

enum class QSchedule { constant, exponential };

// Time profile of the pseudo-reward slack q(t).
struct PseudoRewardConfig {
  QSchedule mode = QSchedule::constant;
  double q0 = 0.1;
  double q_min = 0.07;          // exponential mode: floor reached at horizon
  std::uint64_t horizon = 200;  // exponential mode

  void validate() const;
  friend bool operator==(const PseudoRewardConfig&,
                         const PseudoRewardConfig&) = default;
};

// constant: q0. exponential: max(q_min, q0 * exp(-lambda t)) with
// lambda = ln(q0 / q_min) / horizon, so q(0) = q0 and q(horizon) = q_min.
double q_of_t(const PseudoRewardConfig& cfg, std::uint64_t t);

// Upper bound on a group's reward given the observed reward `alpha` of a
// group sharing `u` members with it: min(alpha + q/u, 1). u == 0 carries no
// information and saturates to 1.
double pseudo_reward(double alpha, double q, std::size_t u);

// How the played arm's loss is charged.
//   raw:                 l += 1 - r
//   importance_weighted: l += (1 - r) / p, p the arm's sampling probability
enum class LossMode { raw, importance_weighted };

// Per-node correlated Tsallis-INF bandit over the arms of a GroupCatalog.
//
// Pseudo-reward statistics are kept per played arm and per overlap level:
// s(l, j) depends on (l, j) only through u = |l ∩ j|, so
//   pseudo_sums(j)[u-1] = sum over rounds where j was played of
//                         min(r_j + q/u, 1)
// reconstructs every phi(l, j) on demand in O(M) memory per played arm.
class BanditState {
 public:
  BanditState(ArmIndex num_arms, std::size_t group_size,
              LossMode loss_mode = LossMode::raw);

  ArmIndex num_arms() const { return num_arms_; }
  std::size_t group_size() const { return group_size_; }
  LossMode loss_mode() const { return loss_mode_; }
  // Number of recorded outcomes; equals the sum of plays().
  std::uint64_t round() const { return round_; }

  std::span<const double> cum_loss() const { return cum_loss_; }
  std::span<const double> dist() const { return dist_; }
  double normalizer() const { return normalizer_; }

  std::uint64_t plays(ArmIndex arm) const;
  double reward_sum(ArmIndex arm) const;
  // Empirical reward mu_j. Throws StateError for an unplayed arm.
  double empirical_reward(ArmIndex arm) const;
  // Running pseudo-reward sums of a played arm, index u-1 for u in [1, M-1].
  std::span<const double> pseudo_sums(ArmIndex arm) const;
  // Played arms in first-play order.
  std::span<const ArmIndex> played_arms() const { return played_; }

  std::optional<ArmIndex> last_arm() const { return last_arm_; }
  std::optional<double> last_reward() const { return last_reward_; }
  // Renormalized probability with which last_arm() was drawn.
  double last_sample_probability() const { return last_sample_prob_; }

  // Folds one observed reward for `arm` into every statistic and charges
  // its loss. `q` is q(t) of the round the reward belongs to.
  void record_outcome(ArmIndex arm, double reward, double q);

  // Overwrites the cumulative losses; used to pin states in tests and
  // benchmarks.
  void set_cum_loss(std::span<const double> losses);
  void set_round(std::uint64_t round) { round_ = round; }

 private:
  friend const std::vector<double>& tsallis_update(BanditState& state);
  friend ArmIndex select_arm(BanditState& state,
                             std::span<const ArmIndex> competitive, Rng& rng);

  struct ArmStats {
    std::uint64_t plays = 0;
    double reward_sum = 0.0;
    std::vector<double> pseudo_sums;
  };
  const ArmStats* find(ArmIndex arm) const;

  ArmIndex num_arms_;
  std::size_t group_size_;
  LossMode loss_mode_;
  std::uint64_t round_ = 0;

  std::vector<double> cum_loss_;
  std::vector<double> dist_;
  double normalizer_ = 0.0;

  std::unordered_map<ArmIndex, ArmStats> stats_;
  std::vector<ArmIndex> played_;

  std::optional<ArmIndex> last_arm_;
  std::optional<double> last_reward_;
  double last_sample_prob_ = 1.0;
};

// phi(target, source): the source arm's empirical pseudo-reward toward the
// target. target == source yields mu_source; disjoint groups yield 1.
double empirical_pseudo_reward(const BanditState& state, ArmIndex target,
                               ArmIndex source, const GroupCatalog& catalog);

// Significant arms: plays * divisor > round, in ascending arm order.
std::vector<ArmIndex> significant_set(const BanditState& state,
                                      std::uint64_t divisor);

// Empirically competitive arms, ascending. An arm j is competitive when
// phi(j, l) >= mu(k_best) for every significant l other than j, where
// k_best maximizes mu over the significant set (ties to the lowest index);
// k_best itself is always included. An empty significant set, or no recorded
// rounds, yields every arm.
std::vector<ArmIndex> competitive_set(const BanditState& state,
                                      const GroupCatalog& catalog,
                                      std::uint64_t divisor);

inline constexpr double kNewtonTolerance = 1e-9;
inline constexpr int kNewtonMaxIterations = 100;

// Solves the Tsallis-INF normalization for the cumulative losses at round t
// (t >= 1, learning rate 2/sqrt(t)), starting from `normalizer` and writing
// the solution back. Returns p_j = 4 (eta (l_j - x))^-2, rescaled to sum 1.
std::vector<double> tsallis_distribution(std::span<const double> cum_loss,
                                         std::uint64_t t, double& normalizer);

// Recomputes dist() for round t = round() + 1 and returns it.
const std::vector<double>& tsallis_update(BanditState& state);

// Draws an arm from dist() restricted to `competitive` and renormalized.
// Consumes exactly one uniform variate.
ArmIndex select_arm(BanditState& state, std::span<const ArmIndex> competitive,
                    Rng& rng);

// Shannon entropy (nats) of a probability vector.
double entropy(std::span<const double> dist);

}  // namespace ppdl
