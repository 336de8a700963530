#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ppdl/dataset.hpp"
#include "ppdl/rng.hpp"

namespace ppdl {

enum class ModelKind { logistic, mlp1 };

// Flat parameter vector of a softmax classifier.
//   logistic: W (classes x input), b (classes)
//   mlp1:     W1 (hidden x input), b1 (hidden), W2 (classes x hidden),
//             b2 (classes), ReLU hidden layer
struct ModelParams {
  ModelKind kind = ModelKind::logistic;
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  std::vector<double> theta;

  static std::size_t param_count(ModelKind kind, std::size_t input,
                                 std::size_t hidden, std::size_t classes);
  // Zero-initialized model of the given shape.
  static ModelParams zeros(ModelKind kind, std::size_t input,
                           std::size_t hidden, std::size_t classes);
  // Gaussian init with std 1/sqrt(fan_in) for weights, zero biases.
  static ModelParams random(ModelKind kind, std::size_t input,
                            std::size_t hidden, std::size_t classes, Rng& rng);

  void check() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean softmax cross-entropy over `rows` of `data` and its exact gradient.
LossGrad loss_and_grad(const ModelParams& model, const LabeledData& data,
                       std::span<const std::size_t> rows);
LossGrad loss_and_grad(const ModelParams& model, const LabeledData& data);

// Class logits for one input.
std::vector<double> predict_logits(const ModelParams& model,
                                   std::span<const double> x);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of model.theta in place.
void adam_step(AdamState& state, ModelParams& model, std::span<const double> grad);

// `epochs` passes of shuffled mini-batches (the last batch may be short).
// Returns the mean mini-batch loss of the final epoch.
double local_train(ModelParams& model, const LabeledData& train,
                   std::size_t epochs, std::size_t batch_size, AdamState& opt,
                   Rng& rng);

// Mixes a group aggregate into the local model:
//   theta = (1 - weight) * local + weight * aggregate
// with weight = M / (M + 1) by default, i.e. a uniform average over the M
// group models and the local one.
ModelParams merge(const ModelParams& local, std::span<const double> aggregate,
                  std::size_t group_size,
                  std::optional<double> weight = std::nullopt);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax accuracy (ties to the lowest class) and mean cross-entropy.
Evaluation evaluate(const ModelParams& model, const LabeledData& data);

// Keeps the model with the lowest validation loss seen so far; ties keep the
// earliest round.
class BestCheckpoint {
 public:
  // Returns true if this round became the new best.
  bool offer(std::uint64_t round, double val_loss, const ModelParams& model);

  bool has_value() const { return round_ != 0; }
  std::uint64_t round() const { return round_; }
  double val_loss() const { return loss_; }
  const ModelParams& model() const { return model_; }

 private:
  std::uint64_t round_ = 0;
  double loss_ = 0.0;
  ModelParams model_;
};

// Binary checkpoint: magic "PPDLCKPT", u32 version, u32 kind, u64 input,
// u64 hidden, u64 classes, u64 round, u64 length, then length f64 values.
// All integers and doubles little-endian.
void write_checkpoint(std::ostream& out, const ModelParams& model,
                      std::uint64_t round);
ModelParams read_checkpoint(std::istream& in, std::uint64_t* round = nullptr);

}  // namespace ppdl
