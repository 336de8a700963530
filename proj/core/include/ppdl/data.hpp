#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppdl/dataset.hpp"
#include "ppdl/rng.hpp"

namespace ppdl {

// Gaussian class clusters. In every consecutive coordinate pair p, class c
// is centered on a circle of `radius` at angle 2*pi*c/classes + offset(p),
// with isotropic noise of standard deviation `noise`.
struct TaskSpec {
  int classes = 4;
  std::size_t dim = 16;
  double radius = 3.0;
  double noise = 1.0;

  void validate() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Angular offset of coordinate pair p: pi * p / (classes * pairs), so pairs
// are not exact copies of one another.
double pair_offset(const TaskSpec& task, std::size_t pair);
std::vector<double> class_mean(const TaskSpec& task, int label);

// `per_class` samples of every class, grouped by class.
LabeledData make_base_task(const TaskSpec& task, std::size_t per_class, Rng& rng);

// Plane rotation by `degrees` of every consecutive coordinate pair.
LabeledData apply_rotation(const LabeledData& pool, double degrees);

enum class ShiftKind { rotation, labels };

// Contiguous node-to-cluster assignment: the first sizes[0] nodes form
// cluster 0, and so on.
struct ClusterLayout {
  ShiftKind shift = ShiftKind::labels;
  std::vector<std::size_t> sizes;
  std::vector<double> angles;                 // rotation: degrees per cluster
  std::vector<std::vector<int>> label_sets;   // labels: allowed labels per cluster

  std::size_t total() const;
  std::size_t cluster_of(std::size_t node) const;
  void validate(int classes) const;
  friend bool operator==(const ClusterLayout&, const ClusterLayout&) = default;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;

  void validate() const;
  friend bool operator==(const SplitFractions&, const SplitFractions&) = default;
};

struct NodeDataset {
  LabeledData train;
  LabeledData val;
  LabeledData test;
  std::size_t cluster = 0;
};

// Deals `samples_per_node` pool samples to every node without replacement,
// in node order, from a shuffled copy of the pool. Under label shift a node
// only takes samples whose label is in its cluster's set; under covariate
// shift the node's samples are rotated by its cluster's angle. Each node's
// samples are then shuffled and split by `fracs`.
std::vector<NodeDataset> partition(const LabeledData& pool,
                                   const ClusterLayout& layout,
                                   std::size_t samples_per_node,
                                   const SplitFractions& fracs, Rng& rng);

// Generates a pool large enough for `layout` and partitions it.
std::vector<NodeDataset> make_node_datasets(const TaskSpec& task,
                                            const ClusterLayout& layout,
                                            std::size_t samples_per_node,
                                            const SplitFractions& fracs,
                                            std::uint64_t seed);

// CSV with header "label,f0,...,f{d-1}". Labels must lie in [0, classes).
LabeledData load_csv(const std::filesystem::path& path, int classes);
// Writes with 17 significant digits, so load_csv reproduces values exactly.
void write_csv(const std::filesystem::path& path, const LabeledData& data);

}  // namespace ppdl
