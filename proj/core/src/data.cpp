#include "ppdl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "ppdl/errors.hpp"

namespace ppdl {

void TaskSpec::validate() const {
  if (classes < 2) throw ConfigError("task.classes must be >= 2");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("task.dim must be even and >= 2");
  if (!(radius > 0.0)) throw ConfigError("task.radius must be positive");
  if (!(noise >= 0.0)) throw ConfigError("task.noise must be non-negative");
}

double pair_offset(const TaskSpec& task, std::size_t pair) {
  const double pairs = static_cast<double>(task.dim / 2);
  return std::numbers::pi * static_cast<double>(pair) /
         (static_cast<double>(task.classes) * pairs);
}

std::vector<double> class_mean(const TaskSpec& task, int label) {
  std::vector<double> mu(task.dim);
  const double base = 2.0 * std::numbers::pi * label / task.classes;
  for (std::size_t p = 0; p < task.dim / 2; ++p) {
    const double a = base + pair_offset(task, p);
    mu[2 * p] = task.radius * std::cos(a);
    mu[2 * p + 1] = task.radius * std::sin(a);
  }
  return mu;
}

LabeledData make_base_task(const TaskSpec& task, std::size_t per_class, Rng& rng) {
  task.validate();
  if (per_class == 0) throw DomainError("make_base_task: empty pool (per_class = 0)");
  LabeledData pool;
  pool.dim = task.dim;
  pool.features.reserve(per_class * task.classes * task.dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(task.dim);
  for (int c = 0; c < task.classes; ++c) {
    const auto mu = class_mean(task, c);
    for (std::size_t s = 0; s < per_class; ++s) {
      for (std::size_t i = 0; i < task.dim; ++i) x[i] = mu[i] + task.noise * normal(rng);
      pool.push_back(x, c);
    }
  }
  return pool;
}

LabeledData apply_rotation(const LabeledData& pool, double degrees) {
  if (pool.dim % 2 != 0) throw DomainError("apply_rotation: odd feature width");
  LabeledData out = pool;
  if (degrees == 0.0) return out;
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto x = out.row(r);
    for (std::size_t p = 0; p + 1 < x.size(); p += 2) {
      const double u = x[p];
      const double v = x[p + 1];
      x[p] = c * u - s * v;
      x[p + 1] = s * u + c * v;
    }
  }
  return out;
}

std::size_t ClusterLayout::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
}

std::size_t ClusterLayout::cluster_of(std::size_t node) const {
  std::size_t end = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    end += sizes[c];
    if (node < end) return c;
  }
  throw IndexError("node " + std::to_string(node) + " outside the cluster layout");
}

void ClusterLayout::validate(int classes) const {
  if (sizes.empty()) throw ConfigError("layout.cluster_sizes must be nonempty");
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("layout.cluster_sizes entries must be positive");
  }
  if (shift == ShiftKind::rotation) {
    if (angles.size() != sizes.size()) {
      throw ConfigError("layout.angles needs one angle per cluster");
    }
    for (double a : angles) {
      if (!(a >= 0.0 && a < 360.0)) throw ConfigError("layout.angles must lie in [0, 360)");
    }
  } else {
    if (label_sets.size() != sizes.size()) {
      throw ConfigError("layout.label_sets needs one label set per cluster");
    }
    for (const auto& set : label_sets) {
      if (set.empty()) throw ConfigError("layout.label_sets entries must be nonempty");
      for (int l : set) {
        if (l < 0 || l >= classes) {
          throw ConfigError("layout.label_sets label " + std::to_string(l) +
                            " outside [0, " + std::to_string(classes) + ")");
        }
      }
    }
  }
}

void SplitFractions::validate() const {
  if (train <= 0.0 || val <= 0.0 || test <= 0.0) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

std::vector<NodeDataset> partition(const LabeledData& pool,
                                   const ClusterLayout& layout,
                                   std::size_t samples_per_node,
                                   const SplitFractions& fracs, Rng& rng) {
  fracs.validate();
  const std::size_t k = layout.total();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(fracs.train * samples_per_node));
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(fracs.val * samples_per_node));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= samples_per_node) {
    throw ConfigError("samples_per_node " + std::to_string(samples_per_node) +
                      " too small for nonempty train/val/test splits");
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> used(pool.size(), false);
  // Covariate shift consumes `order` front to back.
  std::size_t cursor = 0;

  std::vector<NodeDataset> nodes(k);
  for (std::size_t node = 0; node < k; ++node) {
    const std::size_t cluster = layout.cluster_of(node);
    NodeDataset& nd = nodes[node];
    nd.cluster = cluster;

    LabeledData mine;
    mine.dim = pool.dim;
    if (layout.shift == ShiftKind::labels) {
      const auto& allowed = layout.label_sets[cluster];
      for (std::size_t i = 0; i < order.size() && mine.size() < samples_per_node; ++i) {
        const std::size_t idx = order[i];
        if (used[idx]) continue;
        if (std::find(allowed.begin(), allowed.end(), pool.labels[idx]) == allowed.end()) {
          continue;
        }
        used[idx] = true;
        mine.push_back(pool.row(idx), pool.labels[idx]);
      }
    } else {
      while (cursor < order.size() && mine.size() < samples_per_node) {
        const std::size_t idx = order[cursor++];
        used[idx] = true;
        mine.push_back(pool.row(idx), pool.labels[idx]);
      }
      mine = apply_rotation(mine, layout.angles[cluster]);
    }
    if (mine.size() < samples_per_node) {
      throw ConfigError("pool has too few samples for node " + std::to_string(node));
    }

    std::vector<std::size_t> idx(samples_per_node);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    nd.train.dim = nd.val.dim = nd.test.dim = pool.dim;
    for (std::size_t i = 0; i < samples_per_node; ++i) {
      LabeledData& dst = i < n_train ? nd.train : (i < n_train + n_val ? nd.val : nd.test);
      dst.push_back(mine.row(idx[i]), mine.labels[idx[i]]);
    }
  }
  return nodes;
}

std::vector<NodeDataset> make_node_datasets(const TaskSpec& task,
                                            const ClusterLayout& layout,
                                            std::size_t samples_per_node,
                                            const SplitFractions& fracs,
                                            std::uint64_t seed) {
  task.validate();
  layout.validate(task.classes);
  // Upper bound on the samples of any one class that nodes may request.
  std::size_t per_class = 0;
  if (layout.shift == ShiftKind::rotation) {
    per_class = (layout.total() * samples_per_node + task.classes - 1) / task.classes;
  } else {
    std::vector<std::size_t> demand(task.classes, 0);
    for (std::size_t c = 0; c < layout.sizes.size(); ++c) {
      for (int l : layout.label_sets[c]) demand[l] += layout.sizes[c] * samples_per_node;
    }
    per_class = *std::max_element(demand.begin(), demand.end());
  }
  Rng gen = make_stream(seed, {0xda7a, 0});
  LabeledData pool = make_base_task(task, std::max<std::size_t>(per_class, 1), gen);
  Rng split = make_stream(seed, {0xda7a, 1});
  return partition(pool, layout, samples_per_node, fracs, split);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

LabeledData load_csv(const std::filesystem::path& path, int classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header");
  const auto header = split_commas(trim(line));
  if (header.size() < 2 || trim(header[0]) != "label") {
    throw ParseError(path.string() + ":1: header must be label,f0,...");
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (trim(header[i]) != "f" + std::to_string(i - 1)) {
      throw ParseError(path.string() + ":1: expected column f" + std::to_string(i - 1));
    }
  }
  LabeledData data;
  data.dim = header.size() - 1;
  std::vector<double> x(data.dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_commas(body);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields");
    }
    int label = 0;
    const auto lf = trim(fields[0]);
    auto [lp, lec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (lec != std::errc{} || lp != lf.data() + lf.size()) {
      throw ParseError(where + ": bad label '" + std::string(lf) + "'");
    }
    if (label < 0 || label >= classes) {
      throw DomainError(where + ": label " + std::to_string(label) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
    for (std::size_t i = 0; i < data.dim; ++i) {
      const auto f = trim(fields[i + 1]);
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), x[i]);
      if (ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(x[i])) {
        throw ParseError(where + ": bad value '" + std::string(f) + "'");
      }
    }
    data.push_back(x, label);
  }
  return data;
}

void write_csv(const std::filesystem::path& path, const LabeledData& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "label";
  for (std::size_t i = 0; i < data.dim; ++i) out << ",f" << i;
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (double v : data.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ppdl
