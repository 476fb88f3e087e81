#pragma once

// Unlearning methods: the retrain gold standard, saliency-masked
// unlearning (SalUn), random labeling, and gradient ascent.
//
// SalUn: accumulate the forget-set cross-entropy gradient at theta_i,
// keep the weights whose |g| reaches the pooled (1-fraction)-quantile,
// then fine-tune under a random-incorrect-label forget loss interleaved
// 1:1 with a plain retain loss, masking every SGD update so only salient
// weights move. Random labeling is the same procedure with an all-ones
// mask.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mulab/dataset.hpp"
#include "mulab/errors.hpp"
#include "mulab/model.hpp"
#include "mulab/ops.hpp"
#include "mulab/rng.hpp"
#include "mulab/train.hpp"

namespace mulab {

enum class UnlearnMethod { Retrain, SalUn, RandomLabel, GradientAscent };

inline const char* unlearn_method_name(UnlearnMethod m) {
  switch (m) {
    case UnlearnMethod::Retrain: return "retrain";
    case UnlearnMethod::SalUn: return "salun";
    case UnlearnMethod::RandomLabel: return "random_label";
    case UnlearnMethod::GradientAscent: return "gradient_ascent";
  }
  return "?";
}

inline UnlearnMethod unlearn_method_from_name(const std::string& s) {
  if (s == "retrain") return UnlearnMethod::Retrain;
  if (s == "salun") return UnlearnMethod::SalUn;
  if (s == "random_label") return UnlearnMethod::RandomLabel;
  if (s == "gradient_ascent") return UnlearnMethod::GradientAscent;
  throw ConfigError("unknown unlearning method '" + s + "'");
}

struct UnlearnConfig {
  UnlearnMethod method = UnlearnMethod::SalUn;
  int epochs = 3;
  double learning_rate = 0.01;  // default: 0.1x the training rate
  double mask_fraction = 0.5;   // SalUn only
  std::uint64_t seed = 0;
  int batch_size = 256;
  bool update_bn = true;  // train-mode running moments during fine-tuning

  void validate() const {
    if (epochs < 0) throw ConfigError("unlearn epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("unlearn batch_size must be >= 1");
    if (mask_fraction <= 0.0 || mask_fraction > 1.0)
      throw ConfigError("mask_fraction must be in (0,1]");
  }
};

struct SaliencyMask {
  // Aligned with Model::parameters() order.
  std::vector<std::string> paths;
  std::vector<std::vector<float>> values;  // 0/1 per weight
  double achieved_sparsity = 0.0;          // fraction of ones
  float threshold = 0.0f;                  // gamma
};

struct UnlearnResult {
  std::unique_ptr<Model<float>> model;
  double seconds = 0.0;
};

// ---------------------------------------------------------------------------

// Binary masks selecting the top `fraction` of pooled |g| values: entry 1
// where |g| >= gamma, gamma the (1-fraction)-quantile over all tensors.
inline SaliencyMask mask_from_abs_values(std::vector<std::string> paths,
                                         const std::vector<std::vector<float>>& abs_vals,
                                         double fraction) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw ContractError("mask fraction must be in (0,1]");
  std::vector<float> pooled;
  for (const auto& v : abs_vals) pooled.insert(pooled.end(), v.begin(), v.end());
  if (pooled.empty()) throw ContractError("mask_from_abs_values: no values");
  std::sort(pooled.begin(), pooled.end());
  const std::size_t p = pooled.size();
  std::size_t qidx = static_cast<std::size_t>(
      std::floor((1.0 - fraction) * static_cast<double>(p)));
  if (qidx >= p) qidx = p - 1;
  const float gamma = pooled[qidx];

  SaliencyMask m;
  m.paths = std::move(paths);
  m.threshold = gamma;
  std::size_t ones = 0;
  for (const auto& v : abs_vals) {
    std::vector<float> row(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      row[i] = v[i] >= gamma ? 1.0f : 0.0f;
      if (row[i] != 0.0f) ++ones;
    }
    m.values.push_back(std::move(row));
  }
  m.achieved_sparsity = static_cast<double>(ones) / static_cast<double>(p);
  return m;
}

inline SaliencyMask all_ones_mask(const Model<float>& model) {
  SaliencyMask m;
  for (const auto& p : model.parameters()) {
    m.paths.push_back(p.path);
    m.values.emplace_back(static_cast<std::size_t>(p.tensor.size()), 1.0f);
  }
  m.achieved_sparsity = 1.0;
  m.threshold = 0.0f;
  return m;
}

// Accumulates the forget-set CE gradient over all batches (batchnorm
// frozen in eval mode so the pass is state-free) and thresholds pooled
// magnitudes.
inline SaliencyMask compute_saliency_mask(Model<float>& theta_i, const Dataset& forget,
                                          double fraction, int batch_size = 256) {
  if (forget.n() == 0) throw ContractError("compute_saliency_mask: empty forget set");
  theta_i.zero_grad();
  const int C = forget.channels(), H = forget.height(), W = forget.width();
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  for (int start = 0; start < forget.n(); start += batch_size) {
    const int count = std::min(batch_size, forget.n() - start);
    Tensorf batch({count, C, H, W});
    std::copy(forget.images.data() + static_cast<std::int64_t>(start) * sz,
              forget.images.data() + static_cast<std::int64_t>(start + count) * sz,
              batch.data());
    std::vector<int> labels(forget.labels.begin() + start,
                            forget.labels.begin() + start + count);
    Tapef tape;
    Tensorf logits = theta_i.forward(&tape, batch, /*training=*/false);
    Tensorf loss = softmax_cross_entropy(&tape, logits, labels);
    backward_all(loss, tape);
  }
  std::vector<std::string> paths;
  std::vector<std::vector<float>> abs_vals;
  for (auto& p : theta_i.parameters()) {
    paths.push_back(p.path);
    std::vector<float> a(static_cast<std::size_t>(p.tensor.size()), 0.0f);
    if (p.tensor.has_grad()) {
      const auto& g = p.tensor.grad();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(g[i]);
    }
    abs_vals.push_back(std::move(a));
  }
  theta_i.zero_grad();
  return mask_from_abs_values(std::move(paths), abs_vals, fraction);
}

// ---------------------------------------------------------------------------

// Random label uniformly drawn from classes != true label.
inline int random_incorrect_label(int true_label, int num_classes, Rng& rng) {
  int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
  return r >= true_label ? r + 1 : r;
}

namespace detail {

struct BatchPlan {
  const Dataset* data;
  std::vector<int> order;
  const std::vector<int>* labels;  // replacement labels (forget) or null (true)
};

}  // namespace detail

// Fine-tunes a copy of theta_i for cfg.epochs: per epoch, forget samples
// get freshly resampled incorrect labels and forget/retain batches are
// interleaved 1:1; every update is masked.
inline UnlearnResult salun_unlearn(const Model<float>& theta_i, const Dataset& forget,
                                   const Dataset& retain, const SaliencyMask& mask,
                                   const UnlearnConfig& cfg,
                                   const AugmentationConfig& aug = {}) {
  if (forget.n() == 0) throw ContractError("salun_unlearn: empty forget set");
  UnlearnResult res;
  res.model = clone_model(theta_i);
  Model<float>& model = *res.model;
  if (mask.values.size() != model.parameters().size())
    throw ContractError("saliency mask does not align with model parameters");
  for (std::size_t i = 0; i < mask.values.size(); ++i)
    if (static_cast<std::int64_t>(mask.values[i].size()) !=
        model.parameters()[i].tensor.size())
      throw ContractError("saliency mask shape mismatch at " + mask.paths[i]);

  auto t0 = std::chrono::steady_clock::now();
  SgdOptimizer<float> opt(model, 0.9, 0.0, &mask.values);
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh incorrect labels each epoch.
    Rng label_rng(Rng::derive(cfg.seed, "random-labels", static_cast<std::uint64_t>(epoch)));
    std::vector<int> wrong(static_cast<std::size_t>(forget.n()));
    for (int i = 0; i < forget.n(); ++i)
      wrong[static_cast<std::size_t>(i)] = random_incorrect_label(
          forget.labels[static_cast<std::size_t>(i)], forget.num_classes, label_rng);

    std::vector<int> forder(static_cast<std::size_t>(forget.n()));
    std::vector<int> rorder(static_cast<std::size_t>(retain.n()));
    for (std::size_t i = 0; i < forder.size(); ++i) forder[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < rorder.size(); ++i) rorder[i] = static_cast<int>(i);
    Rng fshuf(Rng::derive(cfg.seed, "unlearn-shuffle-f", static_cast<std::uint64_t>(epoch)));
    Rng rshuf(Rng::derive(cfg.seed, "unlearn-shuffle-r", static_cast<std::uint64_t>(epoch)));
    fshuf.shuffle(forder);
    rshuf.shuffle(rorder);

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t nf = (forder.size() + bs - 1) / bs;
    const std::size_t nr = retain.n() ? (rorder.size() + bs - 1) / bs : 0;
    int step = 0;
    for (std::size_t i = 0; i < std::max(nf, nr); ++i) {
      for (int which = 0; which < 2; ++which) {
        const bool is_forget = which == 0;
        if (is_forget && i >= nf) continue;
        if (!is_forget && i >= nr) continue;
        const Dataset& d = is_forget ? forget : retain;
        const std::vector<int>& order = is_forget ? forder : rorder;
        const std::size_t start = i * bs;
        const std::size_t count = std::min(bs, order.size() - start);
        Tensorf batch = make_batch(d, order, start, count, aug, cfg.seed,
                                   epoch * 2 + which, &labels);
        if (is_forget)
          for (std::size_t j = 0; j < count; ++j)
            labels[j] = wrong[static_cast<std::size_t>(order[start + j])];
        model.zero_grad();
        Tapef tape;
        Tensorf logits = model.forward(&tape, batch, /*training=*/true, cfg.update_bn);
        Tensorf loss = softmax_cross_entropy(&tape, logits, labels);
        const double lv = static_cast<double>(loss[0]);
        if (!std::isfinite(lv) || lv > 1e4)
          throw DivergenceError("unlearning loss diverged at epoch " +
                                std::to_string(epoch) + " step " + std::to_string(step));
        backward_all(loss, tape);
        opt.step(cfg.learning_rate);
        ++step;
      }
    }
  }
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline UnlearnResult random_label_unlearn(const Model<float>& theta_i,
                                          const Dataset& forget, const Dataset& retain,
                                          const UnlearnConfig& cfg,
                                          const AugmentationConfig& aug = {}) {
  return salun_unlearn(theta_i, forget, retain, all_ones_mask(theta_i), cfg, aug);
}

// Negated-gradient SGD on the forget-set CE; no retain term, no momentum.
// Divergence (loss above 1e4) is an expected failure mode and surfaces as
// DivergenceError for the caller to record.
inline UnlearnResult gradient_ascent_unlearn(const Model<float>& theta_i,
                                             const Dataset& forget,
                                             const UnlearnConfig& cfg,
                                             const AugmentationConfig& aug = {}) {
  if (forget.n() == 0) throw ContractError("gradient_ascent_unlearn: empty forget set");
  UnlearnResult res;
  res.model = clone_model(theta_i);
  Model<float>& model = *res.model;
  auto t0 = std::chrono::steady_clock::now();
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(forget.n()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuf(Rng::derive(cfg.seed, "ascent-shuffle", static_cast<std::uint64_t>(epoch)));
    shuf.shuffle(order);
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t count = std::min(bs, order.size() - start);
      Tensorf batch = make_batch(forget, order, start, count, aug, cfg.seed, epoch, &labels);
      model.zero_grad();
      Tapef tape;
      Tensorf logits = model.forward(&tape, batch, /*training=*/true, cfg.update_bn);
      Tensorf loss = softmax_cross_entropy(&tape, logits, labels);
      const double lv = static_cast<double>(loss[0]);
      if (!std::isfinite(lv) || lv > 1e4)
        throw DivergenceError("gradient ascent diverged at epoch " +
                              std::to_string(epoch) + " (loss " + std::to_string(lv) + ")");
      backward_all(loss, tape);
      for (auto& p : model.parameters()) {
        if (!p.tensor.has_grad()) continue;
        const auto& g = p.tensor.grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          p.tensor[static_cast<std::int64_t>(i)] +=
              static_cast<float>(cfg.learning_rate) * g[i];
      }
    }
  }
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Fresh initialization trained only on the retain set for the full
// training budget; the gold standard every unlearner is compared against.
inline UnlearnResult retrain(const Dataset& retain, const ArchDescriptor& arch,
                             const TrainConfig& cfg, std::uint64_t init_seed) {
  if (retain.n() == 0) throw ContractError("retrain: empty retain set");
  UnlearnResult res;
  res.model = build_model<float>(arch, init_seed);
  TrainResult tr = train(*res.model, retain, cfg);
  res.seconds = tr.seconds;
  return res;
}

}  // namespace mulab
