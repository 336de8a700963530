#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "ppdl/data.hpp"
#include "ppdl/errors.hpp"

using namespace ppdl;
namespace fs = std::filesystem;

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

std::vector<double> mean_of_label(const LabeledData& d, int label) {
  std::vector<double> mu(d.dim, 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    if (d.labels[r] != label) continue;
    ++n;
    for (std::size_t i = 0; i < d.dim; ++i) mu[i] += d.row(r)[i];
  }
  for (auto& v : mu) v /= static_cast<double>(n);
  return mu;
}

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ppdl_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(Task, ClassMeans) {
  TaskSpec task;
  task.classes = 4;
  task.dim = 6;
  task.radius = 2.0;
  const auto mu0 = class_mean(task, 0);
  EXPECT_DOUBLE_EQ(mu0[0], 2.0);
  EXPECT_DOUBLE_EQ(mu0[1], 0.0);
  EXPECT_NEAR(norm(mu0), 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(pair_offset(task, 1), std::numbers::pi / 12, 1e-15);
  // Class 1 is class 0 turned by a quarter circle in every coordinate pair.
  const auto mu1 = class_mean(task, 1);
  const auto turned = apply_rotation(
      [&] {
        LabeledData d;
        d.dim = 6;
        d.push_back(mu0, 0);
        return d;
      }(),
      90.0);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(turned.row(0)[i], mu1[i], 1e-12);
}

TEST(Task, Validation) {
  TaskSpec t;
  t.dim = 3;
  EXPECT_THROW(t.validate(), ConfigError);
  t.dim = 4;
  t.classes = 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t.classes = 2;
  t.radius = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  Rng rng = make_stream(0);
  t.radius = 1.0;
  EXPECT_THROW(make_base_task(t, 0, rng), DomainError);
}

TEST(Task, BaseTaskStatistics) {
  TaskSpec task;
  task.dim = 4;
  Rng rng = make_stream(11);
  const auto pool = make_base_task(task, 3000, rng);
  ASSERT_EQ(pool.size(), 12000u);
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(std::count(pool.labels.begin(), pool.labels.end(), c), 3000);
    const auto mu = mean_of_label(pool, c);
    const auto ref = class_mean(task, c);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(mu[i], ref[i], 0.08);
  }

  task.noise = 0.0;
  const auto exact = make_base_task(task, 2, rng);
  for (std::size_t r = 0; r < exact.size(); ++r) {
    const auto ref = class_mean(task, exact.labels[r]);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(exact.row(r)[i], ref[i]);
  }
}

TEST(Rotation, Properties) {
  LabeledData d;
  d.dim = 4;
  d.push_back(std::vector<double>{1.0, 0.0, 0.0, 2.0}, 1);
  const auto q = apply_rotation(d, 90.0);
  EXPECT_NEAR(q.row(0)[0], 0.0, 1e-15);
  EXPECT_NEAR(q.row(0)[1], 1.0, 1e-15);
  EXPECT_NEAR(q.row(0)[2], -2.0, 1e-15);
  EXPECT_NEAR(q.row(0)[3], 0.0, 1e-15);
  EXPECT_EQ(q.labels, d.labels);
  EXPECT_EQ(apply_rotation(d, 0.0), d);

  Rng rng = make_stream(12);
  TaskSpec task;
  task.dim = 8;
  const auto pool = make_base_task(task, 20, rng);
  const auto a = apply_rotation(apply_rotation(pool, 30.0), 60.0);
  const auto b = apply_rotation(pool, 90.0);
  for (std::size_t r = 0; r < pool.size(); ++r) {
    EXPECT_NEAR(norm(b.row(r)), norm(pool.row(r)), 1e-12);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a.row(r)[i], b.row(r)[i], 1e-12);
  }

  LabeledData odd;
  odd.dim = 3;
  EXPECT_THROW(apply_rotation(odd, 10.0), DomainError);
}

TEST(Layout, ClusterOfAndValidation) {
  ClusterLayout l{ShiftKind::labels, {2, 3}, {}, {{0}, {1, 2}}};
  EXPECT_EQ(l.total(), 5u);
  EXPECT_EQ(l.cluster_of(1), 0u);
  EXPECT_EQ(l.cluster_of(2), 1u);
  EXPECT_THROW(l.cluster_of(5), IndexError);
  EXPECT_NO_THROW(l.validate(3));
  EXPECT_THROW(l.validate(2), ConfigError);
  l.label_sets[0].clear();
  EXPECT_THROW(l.validate(3), ConfigError);

  ClusterLayout r{ShiftKind::rotation, {2, 2}, {0.0}, {}};
  EXPECT_THROW(r.validate(4), ConfigError);
  r.angles = {0.0, 360.0};
  EXPECT_THROW(r.validate(4), ConfigError);
  r.angles = {0.0, 180.0};
  EXPECT_NO_THROW(r.validate(4));

  SplitFractions s{0.5, 0.3, 0.3};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Partition, LabelShiftNodes) {
  TaskSpec task;
  task.dim = 4;
  ClusterLayout layout{ShiftKind::labels, {3, 2}, {}, {{0, 2}, {1, 3}}};
  const SplitFractions fr{0.6, 0.2, 0.2};
  const auto nodes = make_node_datasets(task, layout, 50, fr, 5);
  ASSERT_EQ(nodes.size(), 5u);
  std::set<std::vector<double>> seen;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const auto& nd = nodes[n];
    EXPECT_EQ(nd.cluster, layout.cluster_of(n));
    EXPECT_EQ(nd.train.size(), 30u);
    EXPECT_EQ(nd.val.size(), 10u);
    EXPECT_EQ(nd.test.size(), 10u);
    const auto& allowed = layout.label_sets[nd.cluster];
    for (const LabeledData* part : {&nd.train, &nd.val, &nd.test}) {
      EXPECT_EQ(part->dim, 4u);
      for (std::size_t r = 0; r < part->size(); ++r) {
        EXPECT_NE(std::find(allowed.begin(), allowed.end(), part->labels[r]), allowed.end());
        const auto row = part->row(r);
        // Pool samples are used at most once across all nodes.
        EXPECT_TRUE(seen.insert(std::vector<double>(row.begin(), row.end())).second);
      }
    }
  }
}

TEST(Partition, RotationShiftNodes) {
  TaskSpec task;
  task.dim = 4;
  task.noise = 0.5;
  ClusterLayout layout{ShiftKind::rotation, {2, 2}, {0.0, 180.0}, {}};
  const auto nodes = make_node_datasets(task, layout, 400, {}, 6);
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_EQ(nodes[n].train.size() + nodes[n].val.size() + nodes[n].test.size(), 400u);
    const double angle = layout.angles[nodes[n].cluster];
    for (int c = 0; c < 4; ++c) {
      LabeledData ref;
      ref.dim = 4;
      ref.push_back(class_mean(task, c), c);
      const auto expect = apply_rotation(ref, angle);
      const auto mu = mean_of_label(nodes[n].train, c);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(mu[i], expect.row(0)[i], 0.25);
    }
  }
}

TEST(Partition, Determinism) {
  TaskSpec task;
  task.dim = 4;
  ClusterLayout layout{ShiftKind::labels, {2, 2}, {}, {{0, 1}, {2, 3}}};
  const auto a = make_node_datasets(task, layout, 40, {}, 9);
  const auto b = make_node_datasets(task, layout, 40, {}, 9);
  const auto c = make_node_datasets(task, layout, 40, {}, 10);
  for (std::size_t n = 0; n < a.size(); ++n) {
    EXPECT_EQ(a[n].train, b[n].train);
    EXPECT_EQ(a[n].test, b[n].test);
  }
  EXPECT_NE(a[0].train, c[0].train);
}

TEST(Partition, Errors) {
  TaskSpec task;
  task.dim = 4;
  ClusterLayout layout{ShiftKind::labels, {2}, {}, {{0, 1}}};
  EXPECT_THROW(make_node_datasets(task, layout, 3, {}, 0), ConfigError);
  Rng rng = make_stream(1);
  const auto pool = make_base_task(task, 10, rng);
  EXPECT_THROW(partition(pool, layout, 40, {}, rng), ConfigError);
  EXPECT_THROW(partition(pool, layout, 10, {0.5, 0.5, 0.5}, rng), ConfigError);
}

TEST(Csv, RoundTripIsExact) {
  TaskSpec task;
  task.dim = 6;
  Rng rng = make_stream(13);
  const auto pool = make_base_task(task, 25, rng);
  const auto path = temp_file("pool.csv");
  write_csv(path, pool);
  EXPECT_EQ(load_csv(path, 4), pool);
}

TEST(Csv, Errors) {
  EXPECT_THROW(load_csv(temp_file("does_not_exist.csv"), 2), IoError);

  const auto path = temp_file("bad.csv");
  write_text(path, "");
  EXPECT_THROW(load_csv(path, 2), ParseError);
  write_text(path, "y,f0\n0,1.0\n");
  EXPECT_THROW(load_csv(path, 2), ParseError);
  write_text(path, "label,f0,f2\n0,1,2\n");
  EXPECT_THROW(load_csv(path, 2), ParseError);
  write_text(path, "label,f0,f1\n0,1.0\n");
  EXPECT_THROW(load_csv(path, 2), ParseError);
  write_text(path, "label,f0,f1\n0,1.0,abc\n");
  try {
    load_csv(path, 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  write_text(path, "label,f0,f1\n0,1.0,nan\n");
  EXPECT_THROW(load_csv(path, 2), ParseError);
  write_text(path, "label,f0,f1\n2,1.0,2.0\n");
  EXPECT_THROW(load_csv(path, 2), DomainError);
  write_text(path, "label,f0,f1\r\n1,1.5,-2\r\n\r\n");
  const auto ok = load_csv(path, 2);
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok.row(0)[1], -2.0);
}
