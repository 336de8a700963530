#include "ppdl/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "ppdl/errors.hpp"

namespace ppdl {

void PseudoRewardConfig::validate() const {
  if (!(q0 > 0.0) || !std::isfinite(q0)) {
    throw ConfigError("pseudo-reward q0 must be positive and finite");
  }
  if (mode == QSchedule::exponential) {
    if (!(q_min > 0.0) || q_min > q0) {
      throw ConfigError("pseudo-reward q_min must lie in (0, q0]");
    }
    if (horizon == 0) {
      throw ConfigError("pseudo-reward horizon must be positive");
    }
  }
}

double q_of_t(const PseudoRewardConfig& cfg, std::uint64_t t) {
  if (cfg.mode == QSchedule::constant) return cfg.q0;
  if (t >= cfg.horizon) return cfg.q_min;
  const double lambda =
      std::log(cfg.q0 / cfg.q_min) / static_cast<double>(cfg.horizon);
  return std::max(cfg.q_min, cfg.q0 * std::exp(-lambda * static_cast<double>(t)));
}

double pseudo_reward(double alpha, double q, std::size_t u) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("pseudo_reward: observed reward must lie in [0, 1]");
  }
  if (u == 0) return 1.0;
  return std::min(alpha + q / static_cast<double>(u), 1.0);
}

BanditState::BanditState(ArmIndex num_arms, std::size_t group_size,
                         LossMode loss_mode)
    : num_arms_(num_arms),
      group_size_(group_size),
      loss_mode_(loss_mode),
      cum_loss_(num_arms, 0.0),
      dist_(num_arms, num_arms ? 1.0 / static_cast<double>(num_arms) : 0.0) {
  if (num_arms == 0) throw DomainError("BanditState: no arms");
  if (group_size == 0) throw DomainError("BanditState: group size must be positive");
}

const BanditState::ArmStats* BanditState::find(ArmIndex arm) const {
  auto it = stats_.find(arm);
  return it == stats_.end() ? nullptr : &it->second;
}

std::uint64_t BanditState::plays(ArmIndex arm) const {
  const ArmStats* s = find(arm);
  return s ? s->plays : 0;
}

double BanditState::reward_sum(ArmIndex arm) const {
  const ArmStats* s = find(arm);
  return s ? s->reward_sum : 0.0;
}

double BanditState::empirical_reward(ArmIndex arm) const {
  const ArmStats* s = find(arm);
  if (!s) throw StateError("arm " + std::to_string(arm) + " has not been played");
  return s->reward_sum / static_cast<double>(s->plays);
}

std::span<const double> BanditState::pseudo_sums(ArmIndex arm) const {
  const ArmStats* s = find(arm);
  if (!s) throw StateError("arm " + std::to_string(arm) + " has not been played");
  return s->pseudo_sums;
}

void BanditState::record_outcome(ArmIndex arm, double reward, double q) {
  if (arm >= num_arms_) {
    throw IndexError("record_outcome: arm " + std::to_string(arm) +
                     " out of range");
  }
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw DomainError("record_outcome: reward must lie in [0, 1]");
  }
  auto [it, inserted] = stats_.try_emplace(arm);
  ArmStats& s = it->second;
  if (inserted) {
    s.pseudo_sums.assign(group_size_ - 1, 0.0);
    played_.push_back(arm);
  }
  s.plays += 1;
  s.reward_sum += reward;
  for (std::size_t u = 1; u < group_size_; ++u) {
    s.pseudo_sums[u - 1] += pseudo_reward(reward, q, u);
  }

  double loss = 1.0 - reward;
  if (loss_mode_ == LossMode::importance_weighted) {
    const double p = (last_arm_ && *last_arm_ == arm) ? last_sample_prob_
                                                     : dist_[arm];
    loss /= p;
  }
  cum_loss_[arm] += loss;

  round_ += 1;
  last_arm_ = arm;
  last_reward_ = reward;
}

void BanditState::set_cum_loss(std::span<const double> losses) {
  if (losses.size() != num_arms_) {
    throw DomainError("set_cum_loss: expected one loss per arm");
  }
  cum_loss_.assign(losses.begin(), losses.end());
}

double empirical_pseudo_reward(const BanditState& state, ArmIndex target,
                               ArmIndex source, const GroupCatalog& catalog) {
  const std::uint64_t n = state.plays(source);
  if (n == 0) {
    throw StateError("empirical_pseudo_reward: source arm " +
                     std::to_string(source) + " has not been played");
  }
  if (target == source) return state.empirical_reward(source);
  const std::size_t u = catalog.overlap(target, source);
  if (u == 0) return 1.0;
  return state.pseudo_sums(source)[u - 1] / static_cast<double>(n);
}

std::vector<ArmIndex> significant_set(const BanditState& state,
                                      std::uint64_t divisor) {
  if (divisor == 0) throw DomainError("significant_set: divisor must be positive");
  std::vector<ArmIndex> out;
  for (ArmIndex arm : state.played_arms()) {
    // plays > round / divisor, in exact integer arithmetic.
    const auto lhs = static_cast<unsigned __int128>(state.plays(arm)) * divisor;
    if (lhs > state.round()) out.push_back(arm);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<ArmIndex> all_arms(ArmIndex n) {
  std::vector<ArmIndex> v(n);
  std::iota(v.begin(), v.end(), ArmIndex{0});
  return v;
}

}  // namespace

std::vector<ArmIndex> competitive_set(const BanditState& state,
                                      const GroupCatalog& catalog,
                                      std::uint64_t divisor) {
  if (catalog.num_arms() != state.num_arms()) {
    throw DomainError("competitive_set: catalog and bandit disagree on arm count");
  }
  if (state.round() == 0) return all_arms(state.num_arms());
  const std::vector<ArmIndex> significant = significant_set(state, divisor);
  if (significant.empty()) return all_arms(state.num_arms());

  ArmIndex best = significant.front();
  double best_mu = state.empirical_reward(best);
  for (ArmIndex arm : significant) {
    const double mu = state.empirical_reward(arm);
    if (mu > best_mu) {
      best = arm;
      best_mu = mu;
    }
  }

  const std::size_t m = catalog.group_size();
  const std::size_t n = catalog.neighborhood().size();

  // Per significant arm: membership mask over neighborhood positions and the
  // per-overlap pseudo-reward means.
  struct Anchor {
    ArmIndex arm;
    std::vector<std::uint8_t> mask;
    std::vector<double> phi;  // phi[u-1]
  };
  std::vector<Anchor> anchors;
  anchors.reserve(significant.size());
  std::vector<std::size_t> pos(m);
  for (ArmIndex arm : significant) {
    Anchor a{arm, std::vector<std::uint8_t>(n, 0), {}};
    catalog.unrank_positions(arm, pos);
    for (auto p : pos) a.mask[p] = 1;
    const double plays = static_cast<double>(state.plays(arm));
    for (double s : state.pseudo_sums(arm)) a.phi.push_back(s / plays);
    anchors.push_back(std::move(a));
  }

  std::vector<ArmIndex> out;
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  ArmIndex j = 0;
  do {
    bool competitive = true;
    if (j != best) {
      for (const Anchor& a : anchors) {
        if (a.arm == j) continue;
        std::size_t u = 0;
        for (auto p : pos) u += a.mask[p];
        const double phi = u == 0 ? 1.0 : a.phi[u - 1];
        if (phi < best_mu) {
          competitive = false;
          break;
        }
      }
    }
    if (competitive) out.push_back(j);
    ++j;
  } while (catalog.next_positions(pos));
  return out;
}

std::vector<double> tsallis_distribution(std::span<const double> cum_loss,
                                         std::uint64_t t, double& normalizer) {
  if (t == 0) throw DomainError("tsallis_distribution: round must be >= 1");
  if (cum_loss.empty()) throw DomainError("tsallis_distribution: no arms");

  const double eta = 2.0 / std::sqrt(static_cast<double>(t));
  const double min_loss = *std::min_element(cum_loss.begin(), cum_loss.end());
  // Every p_j <= 1 requires eta (l_j - x) >= 2. The root lies at or left of
  // this cap, and f(x) = sum p - 1 is increasing and convex there, so Newton
  // from the right converges monotonically; iterates are held under the cap.
  const double cap = min_loss - 2.0 / eta;
  double x = std::min(normalizer, cap);

  std::vector<double> p(cum_loss.size());
  double sum = 0.0;
  bool converged = false;
  for (int iter = 0; iter < kNewtonMaxIterations; ++iter) {
    sum = 0.0;
    double sum32 = 0.0;
    for (std::size_t j = 0; j < cum_loss.size(); ++j) {
      const double z = eta * (cum_loss[j] - x);
      p[j] = 4.0 / (z * z);
      sum += p[j];
      sum32 += p[j] * std::sqrt(p[j]);
    }
    if (std::abs(sum - 1.0) <= kNewtonTolerance) {
      converged = true;
      break;
    }
    x -= (sum - 1.0) / (eta * sum32);
    x = std::min(x, cap);
  }
  if (!converged || !std::isfinite(sum)) {
    const double max_loss = *std::max_element(cum_loss.begin(), cum_loss.end());
    std::ostringstream msg;
    msg << "tsallis normalization did not converge: t=" << t
        << " losses in [" << min_loss << ", " << max_loss
        << "], |sum p - 1|=" << std::abs(sum - 1.0);
    throw NumericalError(msg.str());
  }
  for (double& v : p) v /= sum;
  normalizer = x;
  return p;
}

const std::vector<double>& tsallis_update(BanditState& state) {
  state.dist_ =
      tsallis_distribution(state.cum_loss_, state.round_ + 1, state.normalizer_);
  return state.dist_;
}

ArmIndex select_arm(BanditState& state, std::span<const ArmIndex> competitive,
                    Rng& rng) {
  if (competitive.empty()) {
    throw DomainError("select_arm: competitive set is empty");
  }
  double total = 0.0;
  for (ArmIndex a : competitive) total += state.dist_[a];
  if (!(total > 0.0)) {
    throw NumericalError("select_arm: competitive set carries no probability mass");
  }
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  ArmIndex chosen = competitive.back();
  for (ArmIndex a : competitive) {
    acc += state.dist_[a];
    if (target < acc) {
      chosen = a;
      break;
    }
  }
  state.last_arm_ = chosen;
  state.last_sample_prob_ = state.dist_[chosen] / total;
  return chosen;
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace ppdl
