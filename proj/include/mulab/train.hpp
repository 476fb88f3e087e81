#pragma once

// SGD training loop: momentum, weight decay, constant or cosine schedule,
// epoch-level seeded shuffling, per-sample augmentation substreams. The
// augmentation stream for a sample depends only on (seed, epoch, sample
// index), so output is independent of batch assembly.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mulab/augment.hpp"
#include "mulab/dataset.hpp"
#include "mulab/errors.hpp"
#include "mulab/model.hpp"
#include "mulab/ops.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  int epochs = 60;
  double learning_rate = 0.1;
  int batch_size = 256;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule schedule = LrSchedule::Cosine;
  std::uint64_t seed = 0;
  AugmentationConfig augmentation{};

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  }
};

struct TrainResult {
  double seconds = 0.0;
  std::vector<double> epoch_loss;
};

// SGD with momentum and decoupled-from-nothing classic L2 weight decay:
//   v <- mu*v + (g + wd*theta);  theta <- theta - lr * v
// An optional binary mask multiplies the final update elementwise, so
// parameters with mask 0 never move (bitwise).
template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(Model<T>& model, double momentum, double weight_decay,
               const std::vector<std::vector<T>>* mask = nullptr)
      : model_(model), momentum_(momentum), weight_decay_(weight_decay), mask_(mask) {
    for (auto& p : model.parameters())
      velocity_.emplace_back(static_cast<std::size_t>(p.tensor.size()), T(0));
    if (mask_ && mask_->size() != velocity_.size())
      throw ContractError("optimizer mask does not align with parameter list");
  }

  void step(double lr) {
    auto& params = model_.parameters();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Tensor<T>& p = params[pi].tensor;
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      auto& v = velocity_[pi];
      const T* m = mask_ ? (*mask_)[pi].data() : nullptr;
      if (mask_ && (*mask_)[pi].size() != g.size())
        throw ContractError("mask shape mismatch at " + params[pi].path);
      for (std::size_t i = 0; i < g.size(); ++i) {
        T grad = g[i] + static_cast<T>(weight_decay_) * p[static_cast<std::int64_t>(i)];
        v[i] = static_cast<T>(momentum_) * v[i] + grad;
        T delta = static_cast<T>(lr) * v[i];
        if (m) delta *= m[i];
        p[static_cast<std::int64_t>(i)] -= delta;
      }
    }
  }

 private:
  Model<T>& model_;
  double momentum_, weight_decay_;
  const std::vector<std::vector<T>>* mask_;
  std::vector<std::vector<T>> velocity_;
};

inline double schedule_lr(const TrainConfig& cfg, int epoch) {
  if (cfg.schedule == LrSchedule::Constant) return cfg.learning_rate;
  return cfg.learning_rate * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * epoch / std::max(1, cfg.epochs)));
}

// Assemble a batch, augmenting each sample with a substream derived from
// (seed, "aug", epoch<<32 | original index).
inline Tensorf make_batch(const Dataset& data, const std::vector<int>& indices,
                          std::size_t start, std::size_t count,
                          const AugmentationConfig& aug, std::uint64_t seed, int epoch,
                          std::vector<int>* labels_out) {
  const int C = data.channels(), H = data.height(), W = data.width();
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  Tensorf batch({static_cast<int>(count), C, H, W});
  labels_out->clear();
  for (std::size_t j = 0; j < count; ++j) {
    const int idx = indices[start + j];
    Tensorf img = image_at(data.images, idx);
    if (aug.kind != AugScenario::NoAug) {
      Rng rng(Rng::derive(seed, "aug",
                          (static_cast<std::uint64_t>(epoch) << 32) ^
                              static_cast<std::uint64_t>(idx)));
      img = augment_sample(img, aug, rng);
    }
    std::copy(img.data(), img.data() + sz,
              batch.data() + static_cast<std::int64_t>(j) * sz);
    labels_out->push_back(data.labels[static_cast<std::size_t>(idx)]);
  }
  return batch;
}

// Trains in place; epochs may be 0 (parameters untouched). Returned
// seconds cover the optimization loop only.
inline TrainResult train(Model<float>& model, const Dataset& data,
                         const TrainConfig& cfg) {
  if (data.n() == 0) throw ContractError("train: empty dataset");
  for (int l : data.labels)
    if (l < 0 || l >= data.num_classes)
      throw ContractError("train: label " + std::to_string(l) + " out of range");

  TrainResult result;
  auto t0 = std::chrono::steady_clock::now();
  SgdOptimizer<float> opt(model, cfg.momentum, cfg.weight_decay);
  std::vector<int> order(static_cast<std::size_t>(data.n()));
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(Rng::derive(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const double lr = schedule_lr(cfg, epoch);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                order.size() - start);
      Tensorf batch = make_batch(data, order, start, count, cfg.augmentation, cfg.seed,
                                 epoch, &labels);
      model.zero_grad();
      Tapef tape;
      Tensorf logits = model.forward(&tape, batch, /*training=*/true);
      Tensorf loss = softmax_cross_entropy(&tape, logits, labels);
      const double lv = static_cast<double>(loss[0]);
      if (!std::isfinite(lv))
        throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch) +
                              " batch " + std::to_string(batches));
      backward_all(loss, tape);
      opt.step(lr);
      epoch_loss += lv;
      ++batches;
    }
    result.epoch_loss.push_back(batches ? epoch_loss / batches : 0.0);
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Accuracy percent, batchnorm in eval mode, argmax ties broken by lowest
// class index. Bitwise invariant to batch size.
inline double evaluate(Model<float>& model, const Dataset& data, int batch_size = 256) {
  if (data.n() == 0) throw ContractError("evaluate: empty split");
  const int C = data.channels(), H = data.height(), W = data.width();
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  int correct = 0;
  for (int start = 0; start < data.n(); start += batch_size) {
    const int count = std::min(batch_size, data.n() - start);
    Tensorf batch({count, C, H, W});
    std::copy(data.images.data() + static_cast<std::int64_t>(start) * sz,
              data.images.data() + static_cast<std::int64_t>(start + count) * sz,
              batch.data());
    Tensorf logits = model.forward(nullptr, batch, /*training=*/false);
    const int nc = logits.dim(1);
    for (int i = 0; i < count; ++i) {
      const float* row = logits.data() + static_cast<std::int64_t>(i) * nc;
      int best = 0;
      for (int c = 1; c < nc; ++c)
        if (row[c] > row[best]) best = c;
      if (best == data.labels[static_cast<std::size_t>(start + i)]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.n());
}

}  // namespace mulab
