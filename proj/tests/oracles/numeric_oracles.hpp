#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ppdl/dataset.hpp"
#include "ppdl/learner.hpp"

namespace oracle {

// Solves sum_j 4 (eta (l_j - x))^-2 = 1 for x < min l by bisection, eta =
// 2 / sqrt(t), and returns the resulting distribution. `x_out` receives x.
std::vector<double> tsallis_bisection(std::span<const double> cum_loss, std::uint64_t t,
                                      double tol, double* x_out = nullptr);

// Central finite differences of the mean cross-entropy.
std::vector<double> finite_difference_grad(const ppdl::ModelParams& model,
                                           const ppdl::LabeledData& data, double h);

// Naive per-sample cross-entropy computed from predict_logits only.
double naive_loss(const ppdl::ModelParams& model, const ppdl::LabeledData& data);

}  // namespace oracle
