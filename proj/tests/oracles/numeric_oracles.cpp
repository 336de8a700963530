#include "oracles/numeric_oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

std::vector<double> tsallis_bisection(std::span<const double> cum_loss, std::uint64_t t,
                                      double tol, double* x_out) {
  const double eta = 2.0 / std::sqrt(static_cast<double>(t));
  const double lmin = *std::min_element(cum_loss.begin(), cum_loss.end());
  const double n = static_cast<double>(cum_loss.size());
  auto mass = [&](double x) {
    long double s = 0.0L;
    for (double l : cum_loss) {
      const long double d = static_cast<long double>(eta) * (l - x);
      s += 4.0L / (d * d);
    }
    return s;
  };
  // Sum <= 1 at the left end, >= 1 at the right end.
  double lo = lmin - 2.0 * std::sqrt(n) / eta;
  double hi = lmin - 2.0 / eta;
  for (int i = 0; i < 400 && hi - lo > tol * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) < 1.0L) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double x = 0.5 * (lo + hi);
  if (x_out) *x_out = x;
  std::vector<double> p;
  for (double l : cum_loss) {
    const double d = eta * (l - x);
    p.push_back(4.0 / (d * d));
  }
  return p;
}

double naive_loss(const ppdl::ModelParams& model, const ppdl::LabeledData& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = ppdl::predict_logits(model, data.row(i));
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    total += -(z[data.labels[i]] - zmax - std::log(s));
  }
  return total / static_cast<double>(data.size());
}

std::vector<double> finite_difference_grad(const ppdl::ModelParams& model,
                                           const ppdl::LabeledData& data, double h) {
  ppdl::ModelParams m = model;
  std::vector<double> g(m.theta.size());
  for (std::size_t k = 0; k < m.theta.size(); ++k) {
    const double orig = m.theta[k];
    m.theta[k] = orig + h;
    const double up = naive_loss(m, data);
    m.theta[k] = orig - h;
    const double down = naive_loss(m, data);
    m.theta[k] = orig;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
