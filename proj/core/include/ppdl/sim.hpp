#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ppdl/bandit.hpp"
#include "ppdl/data.hpp"
#include "ppdl/groups.hpp"
#include "ppdl/learner.hpp"
#include "ppdl/secagg.hpp"

namespace ppdl {

// ppdl uses a constant q(t); ppdl_var the exponentially decaying one.
enum class Method { ppdl, ppdl_var, dac, random, oracle, local };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
bool uses_bandit(Method method);

// When the bandit reward (validation accuracy) is measured.
enum class RewardTiming { after_training, before_training };

struct SimConfig {
  Method method = Method::ppdl;
  std::size_t nodes = 20;
  std::size_t group_size = 2;
  std::uint64_t rounds = 150;
  std::uint64_t seed = 0;

  std::size_t local_epochs = 3;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  ModelKind model = ModelKind::logistic;
  std::size_t hidden = 32;

  TaskSpec task;
  ClusterLayout layout;
  std::size_t samples_per_node = 200;
  SplitFractions split;
  // Optional CSV pool (label,f0..) replacing the synthetic generator.
  std::string pool_csv;

  PseudoRewardConfig pseudo;
  // Significant-set divisor; 0 selects the number of nodes.
  std::uint64_t significance_divisor = 0;
  LossMode loss_mode = LossMode::raw;
  // false disables competitive-set masking (plain Tsallis-INF).
  bool correlated = true;
  RewardTiming reward_timing = RewardTiming::after_training;
  // Weight of the group aggregate in the merge; unset means M / (M + 1).
  std::optional<double> merge_weight;

  double dac_tau = 30.0;

  FieldParams field;
  // Shares required to reconstruct; 0 means the whole group.
  std::size_t secagg_threshold = 0;
  // Per-member probability of dropping out after sharing its mask.
  double dropout_prob = 0.0;

  // Neighborhood per node; empty means fully connected.
  std::vector<std::vector<NodeId>> adjacency;

  // Worker threads per round. Outputs do not depend on this.
  std::size_t threads = 1;

  std::uint64_t divisor() const;
  std::vector<NodeId> neighborhood(NodeId node) const;
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct NodeRoundEntry {
  NodeId node = 0;
  std::optional<ArmIndex> arm;
  std::vector<NodeId> group;      // members whose models were aggregated
  std::optional<double> reward;
  double val_acc = 0.0;
  double val_loss = 0.0;
  double train_loss = 0.0;
  std::optional<std::size_t> comp_set_size;
  std::optional<double> entropy;  // of the sampling distribution
  bool aggregation_failed = false;

  friend bool operator==(const NodeRoundEntry&, const NodeRoundEntry&) = default;
};

struct RoundRecord {
  std::uint64_t round = 0;
  std::vector<NodeRoundEntry> nodes;  // indexed by node id

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// counts(i, j): rounds in which node j was in node i's aggregated group.
class CommMatrix {
 public:
  explicit CommMatrix(std::size_t nodes = 0) : n_(nodes), counts_(nodes * nodes, 0) {}

  std::size_t size() const { return n_; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts_[i * n_ + j]; }
  void add(std::size_t i, std::size_t j) { counts_[i * n_ + j] += 1; }
  std::uint64_t row_sum(std::size_t i) const;
  std::uint64_t total() const;

  friend bool operator==(const CommMatrix&, const CommMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct NodeResult {
  NodeId node = 0;
  std::size_t cluster = 0;
  double test_acc = 0.0;
  std::uint64_t best_round = 0;
  double best_val_loss = 0.0;
};

struct ClusterSummary {
  std::size_t cluster = 0;
  std::size_t size = 0;
  double mean_test_acc = 0.0;
};

struct ExperimentResult {
  SimConfig config;
  std::vector<RoundRecord> records;
  CommMatrix comm;
  std::vector<NodeResult> nodes;
  std::vector<ClusterSummary> clusters;
  double mean_over_clusters = 0.0;  // unweighted mean of cluster means
  double node_weighted_mean = 0.0;
};

// Synchronous round-based simulation. Within a round every node reads only
// the round-start models of its peers, so the node processing order (and
// thread count) cannot change any output.
class Simulation {
 public:
  explicit Simulation(SimConfig config);
  Simulation(SimConfig config, std::vector<NodeDataset> datasets);

  const SimConfig& config() const { return config_; }
  std::uint64_t round() const { return round_; }
  bool done() const { return round_ >= config_.rounds; }

  // Nodes are stepped in this order within each round (test hook).
  void set_processing_order(std::vector<NodeId> order);

  // Receives every aggregation transcript after each round barrier, in node
  // order.
  using AuditSink =
      std::function<void(std::uint64_t round, NodeId node, const Transcript&)>;
  void set_audit_sink(AuditSink sink);
  // Messages, over all aggregations so far, whose payload equalled a
  // member's quantized parameters.
  std::uint64_t privacy_violations() const;

  const RoundRecord& run_round();
  ExperimentResult finish();
  ExperimentResult run();

  std::span<const RoundRecord> records() const { return records_; }
  const CommMatrix& comm() const { return comm_; }
  const std::vector<NodeDataset>& datasets() const { return data_; }
  const ModelParams& model(NodeId node) const { return nodes_.at(node).model; }
  // Null for methods without a bandit.
  const BanditState* bandit(NodeId node) const;
  const GroupCatalog* catalog(NodeId node) const;
  std::span<const double> dac_probabilities(NodeId node) const;

 private:
  struct NodeState {
    ModelParams model;
    AdamState opt;
    Rng select_rng;
    Rng train_rng;
    std::vector<NodeId> neighbors;
    std::optional<GroupCatalog> catalog;
    std::optional<BanditState> bandit;
    std::vector<double> dac_scores;
    std::vector<double> dac_probs;
    BestCheckpoint best;
    std::uint64_t privacy_violations = 0;
  };

  void init();
  NodeRoundEntry step_node(NodeId node, std::uint64_t t,
                           const std::vector<std::vector<double>>& snapshot);
  NodeRoundEntry run_round_ppdl(NodeId node, std::uint64_t t,
                                const std::vector<std::vector<double>>& snapshot);
  NodeRoundEntry run_round_dac(NodeId node, std::uint64_t t,
                               const std::vector<std::vector<double>>& snapshot);
  NodeRoundEntry run_round_baseline(NodeId node, std::uint64_t t,
                                    const std::vector<std::vector<double>>& snapshot);
  std::optional<AggregateResult> aggregate(NodeId node, std::uint64_t t,
                                           const Group& group,
                                           const std::vector<std::vector<double>>& snapshot);
  // Merge (if an aggregate is given), train, evaluate. Fills the metric
  // fields of `entry` and returns the reward.
  double merge_train_evaluate(NodeId node, std::uint64_t t,
                              const std::vector<double>* aggregate,
                              std::size_t contributors, NodeRoundEntry& entry);

  SimConfig config_;
  std::vector<NodeDataset> data_;
  std::vector<NodeState> nodes_;
  std::vector<NodeId> order_;
  std::vector<RoundRecord> records_;
  CommMatrix comm_;
  std::uint64_t round_ = 0;
  AuditSink audit_sink_;
  std::vector<std::vector<Transcript>> pending_transcripts_;
};

ExperimentResult run_experiment(const SimConfig& config);

// Fraction of aggregated group members that share the selecting node's
// cluster, over rounds [first, last] (1-based, inclusive).
double intra_cluster_fraction(std::span<const RoundRecord> records,
                              const ClusterLayout& layout, std::uint64_t first,
                              std::uint64_t last);

}  // namespace ppdl
