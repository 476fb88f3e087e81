#pragma once

// Classifier architectures with named-parameter addressing. ResNetS is a
// desk-scale residual network: 3x3 stem, three stages of two basic blocks
// (base_width/2x/4x channels, stride-2 between stages, 1x1 projection on
// channel change), global average pool, linear head.

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/ops.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

enum class Arch { MLP, ResNetS };

struct ArchDescriptor {
  Arch kind = Arch::ResNetS;
  int in_channels = 1;
  int image_size = 16;
  int num_classes = 3;
  int base_width = 16;                // ResNetS stage-1 channel count
  std::vector<int> hidden = {64, 32}; // MLP hidden widths
};

inline const char* arch_name(Arch a) {
  return a == Arch::MLP ? "mlp" : "resnet_s";
}

inline Arch arch_from_name(const std::string& s) {
  if (s == "mlp") return Arch::MLP;
  if (s == "resnet_s") return Arch::ResNetS;
  throw ConfigError("unknown architecture '" + s + "'");
}

template <typename T>
struct NamedParam {
  std::string path;
  Tensor<T> tensor;
};

template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  // training selects batch-moment normalization; update_bn=false freezes
  // the running moments (used for saliency computation and grad checks).
  virtual Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                            bool update_bn = true) = 0;
  virtual const ArchDescriptor& descriptor() const = 0;

  std::vector<NamedParam<T>>& parameters() { return params_; }
  const std::vector<NamedParam<T>>& parameters() const { return params_; }

  virtual std::vector<std::pair<std::string, BnState<T>*>> bn_states() = 0;

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

 protected:
  void register_param(const std::string& path, Tensor<T> t) {
    t.set_requires_grad(true);
    params_.push_back({path, std::move(t)});
  }

  std::vector<NamedParam<T>> params_;
};

namespace detail {

template <typename T>
Tensor<T> kaiming_conv(int f, int c, int k, Rng& rng) {
  Tensor<T> t({f, c, k, k});
  double std = std::sqrt(2.0 / (static_cast<double>(c) * k * k));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.gaussian() * std);
  return t;
}

template <typename T>
Tensor<T> kaiming_linear(int out, int in, Rng& rng) {
  Tensor<T> t({out, in});
  double std = std::sqrt(2.0 / static_cast<double>(in));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.gaussian() * std);
  return t;
}

template <typename T>
Tensor<T> ones(std::vector<int> shape) {
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = T(1);
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------

template <typename T>
class Mlp : public Model<T> {
 public:
  Mlp(const ArchDescriptor& desc, std::uint64_t seed) : desc_(desc) {
    if (desc.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    Rng rng(Rng::derive(seed, "init"));
    int in = desc.in_channels * desc.image_size * desc.image_size;
    std::vector<int> widths = desc.hidden;
    widths.push_back(desc.num_classes);
    int prev = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      std::string base = "fc" + std::to_string(i + 1);
      this->register_param(base + ".weight",
                           detail::kaiming_linear<T>(widths[i], prev, rng));
      this->register_param(base + ".bias", Tensor<T>({widths[i]}));
      prev = widths[i];
    }
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool, bool) override {
    const int B = x.dim(0);
    Tensor<T> h = reshape(tape, x, {B, static_cast<int>(x.size() / B)});
    const std::size_t layers = this->params_.size() / 2;
    for (std::size_t i = 0; i < layers; ++i) {
      h = linear(tape, h, this->params_[2 * i].tensor, this->params_[2 * i + 1].tensor);
      if (i + 1 < layers) h = relu(tape, h);
    }
    return h;
  }

  const ArchDescriptor& descriptor() const override { return desc_; }
  std::vector<std::pair<std::string, BnState<T>*>> bn_states() override { return {}; }

 private:
  ArchDescriptor desc_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ResNetS : public Model<T> {
 public:
  ResNetS(const ArchDescriptor& desc, std::uint64_t seed) : desc_(desc) {
    if (desc.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    Rng rng(Rng::derive(seed, "init"));
    const int w1 = desc.base_width, w2 = 2 * w1, w3 = 4 * w1;

    stem_ = make_conv_bn("stem", desc.in_channels, w1, 3, rng);
    const int stage_in[3] = {w1, w1, w2};
    const int stage_out[3] = {w1, w2, w3};
    for (int s = 0; s < 3; ++s) {
      for (int b = 0; b < 2; ++b) {
        Block blk;
        std::string base = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
        int in = b == 0 ? stage_in[s] : stage_out[s];
        int out = stage_out[s];
        blk.stride = (b == 0 && s > 0) ? 2 : 1;
        blk.c1 = make_conv_bn(base + ".conv1", in, out, 3, rng, base + ".bn1");
        blk.c2 = make_conv_bn(base + ".conv2", out, out, 3, rng, base + ".bn2");
        blk.has_proj = (in != out || blk.stride != 1);
        if (blk.has_proj)
          blk.proj = make_conv_bn(base + ".proj", in, out, 1, rng, base + ".bnp");
        blocks_.push_back(std::move(blk));
      }
    }
    this->register_param("head.weight", detail::kaiming_linear<T>(desc.num_classes, w3, rng));
    this->register_param("head.bias", Tensor<T>({desc.num_classes}));
    head_w_ = this->params_[this->params_.size() - 2].tensor;
    head_b_ = this->params_[this->params_.size() - 1].tensor;
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    bool update_bn = true) override {
    Tensor<T> h = conv_bn(tape, x, stem_, 1, 1, training, update_bn);
    h = relu(tape, h);
    for (auto& blk : blocks_) {
      Tensor<T> shortcut =
          blk.has_proj ? conv_bn(tape, h, blk.proj, blk.stride, 0, training, update_bn)
                       : h;
      Tensor<T> y = conv_bn(tape, h, blk.c1, blk.stride, 1, training, update_bn);
      y = relu(tape, y);
      y = conv_bn(tape, y, blk.c2, 1, 1, training, update_bn);
      h = relu(tape, add(tape, y, shortcut));
    }
    Tensor<T> pooled = global_avg_pool(tape, h);
    return linear(tape, pooled, head_w_, head_b_);
  }

  const ArchDescriptor& descriptor() const override { return desc_; }

  std::vector<std::pair<std::string, BnState<T>*>> bn_states() override {
    std::vector<std::pair<std::string, BnState<T>*>> out;
    out.emplace_back(stem_.bn_path, &stem_.bn);
    for (auto& blk : blocks_) {
      out.emplace_back(blk.c1.bn_path, &blk.c1.bn);
      out.emplace_back(blk.c2.bn_path, &blk.c2.bn);
      if (blk.has_proj) out.emplace_back(blk.proj.bn_path, &blk.proj.bn);
    }
    return out;
  }

 private:
  struct ConvBn {
    Tensor<T> w, gamma, beta;
    BnState<T> bn;
    std::string bn_path;
    int pad = 1;
  };
  struct Block {
    ConvBn c1, c2, proj;
    bool has_proj = false;
    int stride = 1;
  };

  ConvBn make_conv_bn(const std::string& conv_base, int in, int out, int k, Rng& rng,
                      std::string bn_base = "") {
    if (bn_base.empty()) bn_base = conv_base + ".bn";
    ConvBn cb;
    cb.w = detail::kaiming_conv<T>(out, in, k, rng);
    cb.gamma = detail::ones<T>({out});
    cb.beta = Tensor<T>({out});
    cb.bn = BnState<T>(out);
    cb.bn_path = bn_base;
    this->register_param(conv_base + ".weight", cb.w);
    this->register_param(bn_base + ".gamma", cb.gamma);
    this->register_param(bn_base + ".beta", cb.beta);
    return cb;
  }

  Tensor<T> conv_bn(Tape<T>* tape, const Tensor<T>& x, ConvBn& cb, int stride, int pad,
                    bool training, bool update_bn) {
    Tensor<T> h = conv2d(tape, x, cb.w, stride, pad);
    if (training && !update_bn) {
      // Batch moments without touching the running state.
      BnState<T> scratch = cb.bn;
      return batchnorm2d(tape, h, cb.gamma, cb.beta, scratch, true);
    }
    return batchnorm2d(tape, h, cb.gamma, cb.beta, cb.bn, training);
  }

  ArchDescriptor desc_;
  ConvBn stem_;
  std::vector<Block> blocks_;
  Tensor<T> head_w_, head_b_;
};

// ---------------------------------------------------------------------------

template <typename T>
std::unique_ptr<Model<T>> build_model(const ArchDescriptor& desc, std::uint64_t seed) {
  switch (desc.kind) {
    case Arch::MLP:
      return std::make_unique<Mlp<T>>(desc, seed);
    case Arch::ResNetS:
      return std::make_unique<ResNetS<T>>(desc, seed);
  }
  throw ConfigError("unknown architecture descriptor");
}

// Deep copy: fresh storage for parameters and running moments.
template <typename T>
std::unique_ptr<Model<T>> clone_model(const Model<T>& src) {
  auto dst = build_model<T>(src.descriptor(), 0);
  auto& sp = src.parameters();
  auto& dp = dst->parameters();
  if (sp.size() != dp.size()) throw ContractError("clone_model: parameter list mismatch");
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i].path != dp[i].path || sp[i].tensor.shape() != dp[i].tensor.shape())
      throw ContractError("clone_model: parameter mismatch at " + sp[i].path);
    dp[i].tensor.vec() = sp[i].tensor.vec();
  }
  auto sb = const_cast<Model<T>&>(src).bn_states();
  auto db = dst->bn_states();
  for (std::size_t i = 0; i < sb.size(); ++i) *db[i].second = *sb[i].second;
  return dst;
}

}  // namespace mulab
