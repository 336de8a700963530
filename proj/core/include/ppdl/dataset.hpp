#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ppdl {

// Row-major feature matrix with integer class labels.
struct LabeledData {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(features).subspan(i * dim, dim);
  }
  void push_back(std::span<const double> x, int label) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
  }

  friend bool operator==(const LabeledData&, const LabeledData&) = default;
};

}  // namespace ppdl
