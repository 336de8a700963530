#include "ppdl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "ppdl/errors.hpp"

namespace ppdl {

std::size_t ModelParams::param_count(ModelKind kind, std::size_t input,
                                     std::size_t hidden, std::size_t classes) {
  if (kind == ModelKind::logistic) return input * classes + classes;
  return input * hidden + hidden + hidden * classes + classes;
}

ModelParams ModelParams::zeros(ModelKind kind, std::size_t input,
                               std::size_t hidden, std::size_t classes) {
  if (input == 0 || classes < 2) {
    throw DomainError("model needs input >= 1 and classes >= 2");
  }
  if (kind == ModelKind::mlp1 && hidden == 0) {
    throw DomainError("mlp1 needs a positive hidden width");
  }
  if (kind == ModelKind::logistic) hidden = 0;
  ModelParams m{kind, input, hidden, classes, {}};
  m.theta.assign(param_count(kind, input, hidden, classes), 0.0);
  return m;
}

ModelParams ModelParams::random(ModelKind kind, std::size_t input,
                                std::size_t hidden, std::size_t classes,
                                Rng& rng) {
  ModelParams m = zeros(kind, input, hidden, classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) m.theta[offset + i] = s * normal(rng);
  };
  if (kind == ModelKind::logistic) {
    fill(0, classes * input, input);
  } else {
    fill(0, hidden * input, input);
    fill(hidden * input + hidden, classes * hidden, hidden);
  }
  return m;
}

void ModelParams::check() const {
  if (theta.size() != param_count(kind, input, hidden, classes)) {
    throw DomainError("model parameter length does not match its dimensions");
  }
}

namespace {

// Writes softmax probabilities into `logits` and returns log-sum-exp.
double softmax_inplace(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logits) v /= z;
  return mx + std::log(z);
}

void check_label(const ModelParams& model, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= model.classes) {
    throw DomainError("label " + std::to_string(label) + " outside [0, " +
                      std::to_string(model.classes) + ")");
  }
}

// Forward pass for one input. `hidden` receives post-ReLU activations for
// mlp1; returns logits.
void forward(const ModelParams& model, std::span<const double> x,
             std::span<double> hidden, std::span<double> logits) {
  const std::size_t d = model.input;
  const std::size_t c = model.classes;
  const double* th = model.theta.data();
  if (model.kind == ModelKind::logistic) {
    const double* w = th;
    const double* b = th + c * d;
    for (std::size_t k = 0; k < c; ++k) {
      double s = b[k];
      for (std::size_t i = 0; i < d; ++i) s += w[k * d + i] * x[i];
      logits[k] = s;
    }
    return;
  }
  const std::size_t h = model.hidden;
  const double* w1 = th;
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  for (std::size_t j = 0; j < h; ++j) {
    double s = b1[j];
    for (std::size_t i = 0; i < d; ++i) s += w1[j * d + i] * x[i];
    hidden[j] = s > 0.0 ? s : 0.0;
  }
  for (std::size_t k = 0; k < c; ++k) {
    double s = b2[k];
    for (std::size_t j = 0; j < h; ++j) s += w2[k * h + j] * hidden[j];
    logits[k] = s;
  }
}

}  // namespace

std::vector<double> predict_logits(const ModelParams& model,
                                   std::span<const double> x) {
  model.check();
  if (x.size() != model.input) throw DomainError("predict: input width mismatch");
  std::vector<double> hidden(model.hidden);
  std::vector<double> logits(model.classes);
  forward(model, x, hidden, logits);
  return logits;
}

LossGrad loss_and_grad(const ModelParams& model, const LabeledData& data,
                       std::span<const std::size_t> rows) {
  model.check();
  if (rows.empty()) throw DomainError("loss_and_grad: empty batch");
  if (data.dim != model.input) throw DomainError("loss_and_grad: input width mismatch");

  const std::size_t d = model.input;
  const std::size_t c = model.classes;
  const std::size_t h = model.hidden;
  LossGrad out;
  out.grad.assign(model.theta.size(), 0.0);
  std::vector<double> hidden(h);
  std::vector<double> probs(c);
  std::vector<double> dhidden(h);

  double* g = out.grad.data();
  const double* th = model.theta.data();
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    const int y = data.labels[r];
    check_label(model, y);
    forward(model, x, hidden, probs);
    const double lse = softmax_inplace(probs);
    // -log softmax_y = lse - logit_y; probs is already softmax, so recover
    // the loss from the normalized probability for stability.
    const double p_y = probs[static_cast<std::size_t>(y)];
    out.loss += (p_y > 0.0) ? -std::log(p_y) : lse;
    probs[static_cast<std::size_t>(y)] -= 1.0;  // dL/dlogits

    if (model.kind == ModelKind::logistic) {
      double* gw = g;
      double* gb = g + c * d;
      for (std::size_t k = 0; k < c; ++k) {
        const double dk = probs[k];
        for (std::size_t i = 0; i < d; ++i) gw[k * d + i] += dk * x[i];
        gb[k] += dk;
      }
      continue;
    }
    const double* w2 = th + h * d + h;
    double* gw1 = g;
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    std::fill(dhidden.begin(), dhidden.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      const double dk = probs[k];
      for (std::size_t j = 0; j < h; ++j) {
        gw2[k * h + j] += dk * hidden[j];
        dhidden[j] += dk * w2[k * h + j];
      }
      gb2[k] += dk;
    }
    for (std::size_t j = 0; j < h; ++j) {
      if (hidden[j] <= 0.0) continue;
      const double dj = dhidden[j];
      for (std::size_t i = 0; i < d; ++i) gw1[j * d + i] += dj * x[i];
      gb1[j] += dj;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  out.loss *= inv;
  for (double& v : out.grad) v *= inv;
  if (!std::isfinite(out.loss)) {
    throw NumericalError("loss_and_grad: non-finite loss");
  }
  return out;
}

LossGrad loss_and_grad(const ModelParams& model, const LabeledData& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_grad(model, data, rows);
}

void adam_step(AdamState& state, ModelParams& model, std::span<const double> grad) {
  if (grad.size() != model.theta.size()) {
    throw DomainError("adam_step: gradient length mismatch");
  }
  if (state.m.size() != grad.size()) {
    state.m.assign(grad.size(), 0.0);
    state.v.assign(grad.size(), 0.0);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    model.theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double local_train(ModelParams& model, const LabeledData& train,
                   std::size_t epochs, std::size_t batch_size, AdamState& opt,
                   Rng& rng) {
  if (train.empty()) throw ConfigError("local_train: empty training split");
  if (epochs == 0) throw ConfigError("local_train: epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("local_train: batch size must be >= 1");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double epoch_loss = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const auto batch = std::span<const std::size_t>(order).subspan(start, len);
      LossGrad lg = loss_and_grad(model, train, batch);
      adam_step(opt, model, lg.grad);
      epoch_loss += lg.loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
  }
  return epoch_loss;
}

ModelParams merge(const ModelParams& local, std::span<const double> aggregate,
                  std::size_t group_size, std::optional<double> weight) {
  if (aggregate.size() != local.theta.size()) {
    throw DomainError("merge: aggregate has " + std::to_string(aggregate.size()) +
                      " parameters, local model " +
                      std::to_string(local.theta.size()));
  }
  const double w = weight.value_or(static_cast<double>(group_size) /
                                   static_cast<double>(group_size + 1));
  if (!(w >= 0.0 && w <= 1.0)) throw DomainError("merge: weight must lie in [0, 1]");
  ModelParams out = local;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    out.theta[i] = (1.0 - w) * local.theta[i] + w * aggregate[i];
  }
  return out;
}

Evaluation evaluate(const ModelParams& model, const LabeledData& data) {
  model.check();
  if (data.empty()) throw DomainError("evaluate: empty split");
  if (data.dim != model.input) throw DomainError("evaluate: input width mismatch");
  std::vector<double> hidden(model.hidden);
  std::vector<double> logits(model.classes);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int y = data.labels[r];
    check_label(model, y);
    forward(model, data.row(r), hidden, logits);
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == static_cast<std::size_t>(y)) ++correct;
    const double lse = softmax_inplace(logits);
    const double p_y = logits[static_cast<std::size_t>(y)];
    loss += p_y > 0.0 ? -std::log(p_y) : lse;
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, loss / n};
}

bool BestCheckpoint::offer(std::uint64_t round, double val_loss,
                           const ModelParams& model) {
  if (round_ != 0 && !(val_loss < loss_)) return false;
  round_ = round;
  loss_ = val_loss;
  model_ = model;
  return true;
}

namespace {

constexpr char kMagic[8] = {'P', 'P', 'D', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof bits);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof buf);
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) {
    throw ParseError("checkpoint truncated");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& model,
                      std::uint64_t round) {
  model.check();
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, model.kind == ModelKind::logistic ? 0u : 1u);
  put_le<std::uint64_t>(out, model.input);
  put_le<std::uint64_t>(out, model.hidden);
  put_le<std::uint64_t>(out, model.classes);
  put_le<std::uint64_t>(out, round);
  put_le<std::uint64_t>(out, model.theta.size());
  for (double v : model.theta) put_le<double>(out, v);
  if (!out) throw IoError("checkpoint write failed");
}

ModelParams read_checkpoint(std::istream& in, std::uint64_t* round) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ParseError("not a ppdl checkpoint");
  }
  if (get_le<std::uint32_t>(in) != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version");
  }
  const auto kind_code = get_le<std::uint32_t>(in);
  if (kind_code > 1) throw ParseError("unknown model kind in checkpoint");
  ModelParams m;
  m.kind = kind_code == 0 ? ModelKind::logistic : ModelKind::mlp1;
  m.input = get_le<std::uint64_t>(in);
  m.hidden = get_le<std::uint64_t>(in);
  m.classes = get_le<std::uint64_t>(in);
  const auto r = get_le<std::uint64_t>(in);
  const auto len = get_le<std::uint64_t>(in);
  if (len != ModelParams::param_count(m.kind, m.input, m.hidden, m.classes)) {
    throw ParseError("checkpoint length does not match its header");
  }
  m.theta.resize(len);
  for (auto& v : m.theta) v = get_le<double>(in);
  if (round) *round = r;
  return m;
}

}  // namespace ppdl
