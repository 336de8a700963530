#include "ppdl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "ppdl/errors.hpp"

namespace ppdl {

namespace {

// Stream tags for make_stream.
constexpr std::uint64_t kSelectStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kSecaggStream = 3;
constexpr std::uint64_t kInitStream = 4;

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ppdl: return "ppdl";
    case Method::ppdl_var: return "ppdl-var";
    case Method::dac: return "dac";
    case Method::random: return "random";
    case Method::oracle: return "oracle";
    case Method::local: return "local";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::ppdl, Method::ppdl_var, Method::dac, Method::random,
                   Method::oracle, Method::local}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected ppdl, ppdl-var, dac, random, oracle, local)");
}

bool uses_bandit(Method method) {
  return method == Method::ppdl || method == Method::ppdl_var;
}

std::uint64_t SimConfig::divisor() const {
  return significance_divisor == 0 ? nodes : significance_divisor;
}

std::vector<NodeId> SimConfig::neighborhood(NodeId node) const {
  if (!adjacency.empty()) return adjacency.at(node);
  std::vector<NodeId> out;
  out.reserve(nodes - 1);
  for (std::size_t j = 0; j < nodes; ++j) {
    if (j != node) out.push_back(static_cast<NodeId>(j));
  }
  return out;
}

void SimConfig::validate() const {
  if (group_size == 0) throw ConfigError("group_size must be >= 1");
  if (nodes < group_size + 1) {
    throw ConfigError("nodes must be >= group_size + 1 (every neighborhood needs "
                      "at least group_size members): nodes=" + std::to_string(nodes) +
                      ", group_size=" + std::to_string(group_size));
  }
  if (rounds == 0) throw ConfigError("rounds must be >= 1");
  if (local_epochs == 0) throw ConfigError("local_epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be non-negative");
  }
  if (model == ModelKind::mlp1 && hidden == 0) throw ConfigError("model.hidden must be >= 1");
  task.validate();
  layout.validate(task.classes);
  if (layout.total() != nodes) {
    throw ConfigError("layout.cluster_sizes sum to " + std::to_string(layout.total()) +
                      " but nodes = " + std::to_string(nodes));
  }
  split.validate();
  pseudo.validate();
  if (method == Method::ppdl_var && pseudo.mode != QSchedule::exponential) {
    throw ConfigError("bandit.q_schedule must be exponential for ppdl-var");
  }
  if (method == Method::ppdl && pseudo.mode != QSchedule::constant) {
    throw ConfigError("bandit.q_schedule must be constant for ppdl");
  }
  if (merge_weight && !(*merge_weight >= 0.0 && *merge_weight <= 1.0)) {
    throw ConfigError("merge_weight must lie in [0, 1]");
  }
  if (!(dac_tau >= 0.0)) throw ConfigError("dac.tau must be non-negative");
  field.validate(group_size);
  if (secagg_threshold > group_size) {
    throw ConfigError("secagg.threshold exceeds group_size");
  }
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) {
    throw ConfigError("secagg.dropout_prob must lie in [0, 1)");
  }
  if (threads == 0) throw ConfigError("threads must be >= 1");

  if (!adjacency.empty()) {
    if (adjacency.size() != nodes) {
      throw ConfigError("topology.adjacency needs one neighborhood per node");
    }
    for (std::size_t i = 0; i < nodes; ++i) {
      for (NodeId j : adjacency[i]) {
        if (j >= nodes) throw ConfigError("topology.adjacency: node id out of range");
        if (j == i) throw ConfigError("topology.adjacency: node lists itself");
      }
    }
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t n = adjacency.empty() ? nodes - 1 : adjacency[i].size();
    if (n < group_size) {
      throw ConfigError("node " + std::to_string(i) + " has " + std::to_string(n) +
                        " neighbors, fewer than group_size " +
                        std::to_string(group_size));
    }
    if (uses_bandit(method)) {
      try {
        (void)count_groups(n, group_size);
      } catch (const CapacityError&) {
        throw ConfigError("node " + std::to_string(i) +
                          ": number of groups overflows the arm index");
      }
    }
  }
}

std::uint64_t CommMatrix::row_sum(std::size_t i) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n_; ++j) s += at(i, j);
  return s;
}

std::uint64_t CommMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

Simulation::Simulation(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.pool_csv.empty()) {
    data_ = make_node_datasets(config_.task, config_.layout, config_.samples_per_node,
                               config_.split, config_.seed);
  } else {
    const LabeledData pool = load_csv(config_.pool_csv, config_.task.classes);
    if (pool.dim != config_.task.dim) {
      throw ConfigError("pool_csv has " + std::to_string(pool.dim) +
                        " features but task.dim = " + std::to_string(config_.task.dim));
    }
    Rng split = make_stream(config_.seed, {0xda7a, 1});
    data_ = partition(pool, config_.layout, config_.samples_per_node, config_.split, split);
  }
  init();
}

Simulation::Simulation(SimConfig config, std::vector<NodeDataset> datasets)
    : config_(std::move(config)), data_(std::move(datasets)) {
  config_.validate();
  init();
}

void Simulation::init() {
  const std::size_t k = config_.nodes;
  if (data_.size() != k) {
    throw ConfigError("expected " + std::to_string(k) + " node datasets, got " +
                      std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (data_[i].train.empty() || data_[i].val.empty() || data_[i].test.empty()) {
      throw ConfigError("node " + std::to_string(i) + " has an empty data split");
    }
    if (data_[i].train.dim != config_.task.dim) {
      throw ConfigError("node " + std::to_string(i) + " feature width mismatch");
    }
  }

  Rng init_rng = make_stream(config_.seed, {kInitStream});
  const ModelParams initial =
      ModelParams::random(config_.model, config_.task.dim, config_.hidden,
                          static_cast<std::size_t>(config_.task.classes), init_rng);

  nodes_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    NodeState& s = nodes_[i];
    const auto id = static_cast<NodeId>(i);
    s.model = initial;
    s.opt.lr = config_.learning_rate;
    s.select_rng = make_stream(config_.seed, {kSelectStream, i});
    s.train_rng = make_stream(config_.seed, {kTrainStream, i});
    s.neighbors = config_.neighborhood(id);
    std::sort(s.neighbors.begin(), s.neighbors.end());
    if (uses_bandit(config_.method)) {
      s.catalog.emplace(id, s.neighbors, config_.group_size);
      s.bandit.emplace(s.catalog->num_arms(), config_.group_size, config_.loss_mode);
    }
    if (config_.method == Method::dac) {
      s.dac_scores.assign(s.neighbors.size(), 0.0);
      s.dac_probs.assign(s.neighbors.size(), 1.0 / static_cast<double>(s.neighbors.size()));
    }
  }
  order_.resize(k);
  std::iota(order_.begin(), order_.end(), NodeId{0});
  comm_ = CommMatrix(k);
}

void Simulation::set_processing_order(std::vector<NodeId> order) {
  std::vector<NodeId> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) throw DomainError("processing order must be a permutation of nodes");
  }
  if (sorted.size() != config_.nodes) {
    throw DomainError("processing order must be a permutation of nodes");
  }
  order_ = std::move(order);
}

const BanditState* Simulation::bandit(NodeId node) const {
  const auto& b = nodes_.at(node).bandit;
  return b ? &*b : nullptr;
}

const GroupCatalog* Simulation::catalog(NodeId node) const {
  const auto& c = nodes_.at(node).catalog;
  return c ? &*c : nullptr;
}

std::span<const double> Simulation::dac_probabilities(NodeId node) const {
  return nodes_.at(node).dac_probs;
}

void Simulation::set_audit_sink(AuditSink sink) { audit_sink_ = std::move(sink); }

std::uint64_t Simulation::privacy_violations() const {
  std::uint64_t total = 0;
  for (const NodeState& s : nodes_) total += s.privacy_violations;
  return total;
}

const RoundRecord& Simulation::run_round() {
  if (done()) throw StateError("simulation already ran all rounds");
  const std::uint64_t t = round_ + 1;
  const std::size_t k = config_.nodes;

  std::vector<std::vector<double>> snapshot(k);
  for (std::size_t i = 0; i < k; ++i) snapshot[i] = nodes_[i].model.theta;

  RoundRecord record;
  record.round = t;
  record.nodes.resize(k);
  pending_transcripts_.assign(k, {});

  const std::size_t workers = std::min(config_.threads, k);
  if (workers <= 1) {
    for (NodeId node : order_) record.nodes[node] = step_node(node, t, snapshot);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t idx = w; idx < order_.size(); idx += workers) {
              const NodeId node = order_[idx];
              record.nodes[node] = step_node(node, t, snapshot);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t i = 0; i < k; ++i) {
    for (NodeId j : record.nodes[i].group) comm_.add(i, j);
    if (audit_sink_) {
      for (const Transcript& tr : pending_transcripts_[i]) {
        audit_sink_(t, static_cast<NodeId>(i), tr);
      }
    }
  }
  pending_transcripts_.clear();

  round_ = t;
  records_.push_back(std::move(record));
  return records_.back();
}

NodeRoundEntry Simulation::step_node(NodeId node, std::uint64_t t,
                                     const std::vector<std::vector<double>>& snapshot) {
  switch (config_.method) {
    case Method::ppdl:
    case Method::ppdl_var:
      return run_round_ppdl(node, t, snapshot);
    case Method::dac:
      return run_round_dac(node, t, snapshot);
    case Method::random:
    case Method::oracle:
    case Method::local:
      return run_round_baseline(node, t, snapshot);
  }
  throw StateError("unhandled method");
}

std::optional<AggregateResult> Simulation::aggregate(
    NodeId node, std::uint64_t t, const Group& group,
    const std::vector<std::vector<double>>& snapshot) {
  Rng rng = make_stream(config_.seed, {kSecaggStream, node, t});
  AggregationOptions opt;
  opt.round = t;
  opt.threshold = config_.secagg_threshold == 0
                      ? group.size()
                      : std::min(config_.secagg_threshold, group.size());
  if (config_.dropout_prob > 0.0) {
    for (NodeId member : group.members) {
      if (uniform01(rng) < config_.dropout_prob) opt.dropouts.push_back(member);
    }
  }
  const ParamsLookup lookup = [&](NodeId j) { return std::span<const double>(snapshot[j]); };
  try {
    AggregateResult result = secure_aggregate(node, group, lookup, config_.field, opt, rng);
    if (group.size() >= 2) {
      std::vector<FieldVector> plain;
      plain.reserve(group.size());
      for (NodeId j : group.members) plain.push_back(quantize(snapshot[j], config_.field));
      nodes_[node].privacy_violations += audit_transcript(result.transcript, plain);
    }
    if (audit_sink_) pending_transcripts_[node].push_back(result.transcript);
    return result;
  } catch (const AggregationFailure&) {
    return std::nullopt;
  }
}

double Simulation::merge_train_evaluate(NodeId node, std::uint64_t t,
                                        const std::vector<double>* aggregate,
                                        std::size_t contributors,
                                        NodeRoundEntry& entry) {
  NodeState& s = nodes_[node];
  const NodeDataset& d = data_[node];
  if (aggregate) s.model = merge(s.model, *aggregate, contributors, config_.merge_weight);
  double reward = 0.0;
  if (config_.reward_timing == RewardTiming::before_training) {
    reward = evaluate(s.model, d.val).accuracy;
  }
  entry.train_loss =
      local_train(s.model, d.train, config_.local_epochs, config_.batch_size, s.opt, s.train_rng);
  const Evaluation ev = evaluate(s.model, d.val);
  entry.val_acc = ev.accuracy;
  entry.val_loss = ev.loss;
  if (config_.reward_timing == RewardTiming::after_training) reward = ev.accuracy;
  s.best.offer(t, ev.loss, s.model);
  return reward;
}

NodeRoundEntry Simulation::run_round_ppdl(NodeId node, std::uint64_t t,
                                          const std::vector<std::vector<double>>& snapshot) {
  NodeState& s = nodes_[node];
  BanditState& bandit = *s.bandit;
  const GroupCatalog& catalog = *s.catalog;
  NodeRoundEntry entry;
  entry.node = node;

  tsallis_update(bandit);
  std::vector<ArmIndex> competitive;
  if (config_.correlated) {
    competitive = competitive_set(bandit, catalog, config_.divisor());
  } else {
    competitive.resize(bandit.num_arms());
    std::iota(competitive.begin(), competitive.end(), ArmIndex{0});
  }
  const ArmIndex arm = select_arm(bandit, competitive, s.select_rng);
  entry.arm = arm;
  entry.comp_set_size = competitive.size();
  entry.entropy = entropy(bandit.dist());

  const Group group = catalog.unrank(arm);
  auto agg = aggregate(node, t, group, snapshot);
  if (!agg) {
    // Environmental failure: train alone, do not charge the arm.
    entry.aggregation_failed = true;
    merge_train_evaluate(node, t, nullptr, 0, entry);
    return entry;
  }
  entry.group = agg->contributors;
  const double reward =
      merge_train_evaluate(node, t, &agg->mean, agg->contributors.size(), entry);
  entry.reward = reward;
  bandit.record_outcome(arm, reward, q_of_t(config_.pseudo, t));
  return entry;
}

NodeRoundEntry Simulation::run_round_dac(NodeId node, std::uint64_t t,
                                         const std::vector<std::vector<double>>& snapshot) {
  NodeState& s = nodes_[node];
  const NodeDataset& d = data_[node];
  NodeRoundEntry entry;
  entry.node = node;
  entry.entropy = entropy(s.dac_probs);

  // M draws without replacement from the softmax vector.
  const std::size_t m = std::min(config_.group_size, s.neighbors.size());
  std::vector<double> weights = s.dac_probs;
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < m; ++k) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double target = uniform01(s.select_rng) * total;
    double acc = 0.0;
    std::size_t chosen = weights.size();
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] <= 0.0) continue;
      acc += weights[j];
      chosen = j;
      if (target < acc) break;
    }
    picked.push_back(chosen);
    weights[chosen] = 0.0;
  }

  // Peers' round-start models arrive in plaintext and are scored by the
  // inverse of their loss on the local training split.
  std::vector<double> mean(s.model.theta.size(), 0.0);
  ModelParams peer = s.model;
  for (std::size_t idx : picked) {
    const NodeId j = s.neighbors[idx];
    peer.theta = snapshot[j];
    const double loss = evaluate(peer, d.train).loss;
    s.dac_scores[idx] = loss > 0.0 ? 1.0 / loss : 1e12;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += snapshot[j][i];
    entry.group.push_back(j);
  }
  for (double& v : mean) v /= static_cast<double>(picked.size());
  std::sort(entry.group.begin(), entry.group.end());

  entry.reward = merge_train_evaluate(node, t, &mean, picked.size(), entry);

  const double max_score = *std::max_element(s.dac_scores.begin(), s.dac_scores.end());
  if (max_score > 0.0) {
    double z = 0.0;
    for (std::size_t j = 0; j < s.dac_probs.size(); ++j) {
      s.dac_probs[j] = std::exp(config_.dac_tau * (s.dac_scores[j] / max_score - 1.0));
      z += s.dac_probs[j];
    }
    for (double& p : s.dac_probs) p /= z;
  }
  return entry;
}

NodeRoundEntry Simulation::run_round_baseline(NodeId node, std::uint64_t t,
                                              const std::vector<std::vector<double>>& snapshot) {
  NodeState& s = nodes_[node];
  NodeRoundEntry entry;
  entry.node = node;

  std::vector<NodeId> pool;
  if (config_.method == Method::random) {
    pool = s.neighbors;
  } else if (config_.method == Method::oracle) {
    const std::size_t own = config_.layout.cluster_of(node);
    for (NodeId j : s.neighbors) {
      if (config_.layout.cluster_of(j) == own) pool.push_back(j);
    }
  }
  const std::size_t m = std::min(config_.group_size, pool.size());
  // Partial Fisher-Yates: the first m entries become a uniform m-subset.
  for (std::size_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(s.select_rng)]);
  }
  Group group{std::vector<NodeId>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m))};
  std::sort(group.members.begin(), group.members.end());

  if (group.members.empty()) {
    merge_train_evaluate(node, t, nullptr, 0, entry);
    return entry;
  }
  auto agg = aggregate(node, t, group, snapshot);
  if (!agg) {
    entry.aggregation_failed = true;
    merge_train_evaluate(node, t, nullptr, 0, entry);
    return entry;
  }
  entry.group = agg->contributors;
  entry.reward = merge_train_evaluate(node, t, &agg->mean, agg->contributors.size(), entry);
  return entry;
}

ExperimentResult Simulation::finish() {
  if (!done()) throw StateError("finish() before all rounds ran");
  ExperimentResult out;
  out.config = config_;
  out.records = records_;
  out.comm = comm_;

  const std::size_t nclusters = config_.layout.sizes.size();
  std::vector<double> sums(nclusters, 0.0);
  std::vector<std::size_t> counts(nclusters, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < config_.nodes; ++i) {
    const NodeState& s = nodes_[i];
    NodeResult r;
    r.node = static_cast<NodeId>(i);
    r.cluster = data_[i].cluster;
    r.best_round = s.best.round();
    r.best_val_loss = s.best.val_loss();
    r.test_acc = evaluate(s.best.model(), data_[i].test).accuracy;
    sums[r.cluster] += r.test_acc;
    counts[r.cluster] += 1;
    total += r.test_acc;
    out.nodes.push_back(r);
  }
  double cluster_total = 0.0;
  for (std::size_t c = 0; c < nclusters; ++c) {
    const double mean = counts[c] ? sums[c] / static_cast<double>(counts[c]) : 0.0;
    out.clusters.push_back({c, counts[c], mean});
    cluster_total += mean;
  }
  out.mean_over_clusters = cluster_total / static_cast<double>(nclusters);
  out.node_weighted_mean = total / static_cast<double>(config_.nodes);
  return out;
}

ExperimentResult Simulation::run() {
  while (!done()) run_round();
  return finish();
}

ExperimentResult run_experiment(const SimConfig& config) {
  Simulation sim(config);
  return sim.run();
}

double intra_cluster_fraction(std::span<const RoundRecord> records,
                              const ClusterLayout& layout, std::uint64_t first,
                              std::uint64_t last) {
  std::uint64_t same = 0;
  std::uint64_t all = 0;
  for (const RoundRecord& rec : records) {
    if (rec.round < first || rec.round > last) continue;
    for (const NodeRoundEntry& e : rec.nodes) {
      const std::size_t own = layout.cluster_of(e.node);
      for (NodeId j : e.group) {
        same += layout.cluster_of(j) == own;
        ++all;
      }
    }
  }
  return all == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(all);
}

}  // namespace ppdl
