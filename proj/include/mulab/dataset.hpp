#pragma once

// Labeled image datasets, the seeded forget/retain partition, and the
// synthetic corpus generator used for desk-scale experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

struct Dataset {
  Tensorf images;           // [N x C x H x W], values in [0,1]
  std::vector<int> labels;  // length N
  int num_classes = 0;
  std::string split;        // train|val|test
  std::string provenance;
  std::uint64_t seed = 0;

  int n() const { return images.rank() == 4 ? images.dim(0) : 0; }
  int channels() const { return images.dim(1); }
  int height() const { return images.dim(2); }
  int width() const { return images.dim(3); }

  void validate() const {
    if (images.rank() != 4)
      throw IntegrityError("dataset images must be [N x C x H x W], got " +
                           shape_str(images.shape()));
    if (static_cast<int>(labels.size()) != n())
      throw IntegrityError("dataset has " + std::to_string(n()) + " images but " +
                           std::to_string(labels.size()) + " labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0 || labels[i] >= num_classes)
        throw IntegrityError("label " + std::to_string(labels[i]) + " at index " +
                             std::to_string(i) + " outside [0," +
                             std::to_string(num_classes) + ")");
    for (std::int64_t i = 0; i < images.size(); ++i)
      if (!(images[i] >= 0.0f && images[i] <= 1.0f))
        throw IntegrityError("pixel value " + std::to_string(images[i]) +
                             " outside [0,1] at flat index " + std::to_string(i));
  }
};

// View of one image as a [C x H x W] tensor (copies the slice).
inline Tensorf image_at(const Tensorf& images, int i) {
  const int C = images.dim(1), H = images.dim(2), W = images.dim(3);
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  Tensorf img({C, H, W});
  const float* src = images.data() + static_cast<std::int64_t>(i) * sz;
  std::copy(src, src + sz, img.data());
  return img;
}

inline Dataset subset(const Dataset& d, const std::vector<int>& indices) {
  const int C = d.channels(), H = d.height(), W = d.width();
  const std::int64_t sz = static_cast<std::int64_t>(C) * H * W;
  Dataset out;
  if (indices.empty()) {
    out.images = Tensorf();
  } else {
    out.images = Tensorf({static_cast<int>(indices.size()), C, H, W});
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const float* src = d.images.data() + static_cast<std::int64_t>(indices[j]) * sz;
      std::copy(src, src + sz, out.images.data() + static_cast<std::int64_t>(j) * sz);
    }
  }
  out.labels.reserve(indices.size());
  for (int i : indices) out.labels.push_back(d.labels.at(static_cast<std::size_t>(i)));
  out.num_classes = d.num_classes;
  out.split = d.split;
  out.provenance = d.provenance;
  out.seed = d.seed;
  return out;
}

// ---------------------------------------------------------------------------
// Forget/retain partition: D_r = D_i - D_f, |D_f| = floor(rate * N),
// selected uniformly without replacement from the seeded stream.

struct ForgetPartition {
  std::vector<int> forget;
  std::vector<int> retain;
  double rate = 0.0;
  std::uint64_t seed = 0;
};

inline ForgetPartition split_forget(int n_train, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0)
    throw ContractError("forget rate " + std::to_string(rate) + " outside [0,1]");
  if (n_train < 0) throw ContractError("negative dataset size");
  const int k = static_cast<int>(std::floor(rate * static_cast<double>(n_train)));
  std::vector<int> idx(static_cast<std::size_t>(n_train));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(Rng::derive(seed, "forget-split"));
  // Partial Fisher-Yates: the first k slots become the forget set.
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_train - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  ForgetPartition p;
  p.forget.assign(idx.begin(), idx.begin() + k);
  p.retain.assign(idx.begin() + k, idx.end());
  std::sort(p.forget.begin(), p.forget.end());
  std::sort(p.retain.begin(), p.retain.end());
  p.rate = rate;
  p.seed = seed;
  return p;
}

inline ForgetPartition split_forget(const Dataset& train, double rate,
                                    std::uint64_t seed) {
  return split_forget(train.n(), rate, seed);
}

// ---------------------------------------------------------------------------
// Synthetic corpus: each class is a distinct spatial template (oriented
// bar, blob, or ring, parameterized by class index) plus Gaussian pixel
// noise, clipped to [0,1].

inline std::vector<float> class_template(int class_idx, int size) {
  std::vector<float> t(static_cast<std::size_t>(size) * size, 0.1f);
  const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;
  const int kind = class_idx % 3;
  const int variant = class_idx / 3;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double dx = x - cx, dy = y - cy;
      double v = 0.1;
      if (kind == 0) {
        // Oriented bar; orientation steps by 45 degrees per variant.
        double theta = variant * 0.785398163397448309616;
        double d = dx * std::cos(theta) + dy * std::sin(theta);
        if (std::abs(d) < size / 6.0) v = 0.9;
      } else if (kind == 1) {
        // Gaussian blob, center offset grows with the variant.
        double ox = cx + (variant % 2 ? -1 : 1) * variant * size / 8.0;
        double r2 = (x - ox) * (x - ox) + dy * dy;
        double sigma = size / 5.0;
        v = 0.1 + 0.8 * std::exp(-r2 / (2.0 * sigma * sigma));
      } else {
        // Ring, radius shrinks with the variant.
        double r = std::sqrt(dx * dx + dy * dy);
        double target = size / 3.0 - variant * size / 10.0;
        if (std::abs(r - target) < size / 8.0) v = 0.9;
      }
      t[static_cast<std::size_t>(y) * size + x] = static_cast<float>(v);
    }
  }
  return t;
}

struct DatasetTriple {
  Dataset train, val, test;
};

inline Dataset make_synthetic_split(int classes, int per_class, int size, double noise,
                                    std::uint64_t seed, const std::string& split,
                                    int split_index) {
  Dataset d;
  const int n = classes * per_class;
  d.images = Tensorf({n, 1, size, size});
  d.labels.resize(static_cast<std::size_t>(n));
  d.num_classes = classes;
  d.split = split;
  d.provenance = "synthetic";
  d.seed = seed;
  const std::int64_t sz = static_cast<std::int64_t>(size) * size;
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<float> tmpl = class_template(c, size);
    for (int s = 0; s < per_class; ++s, ++row) {
      Rng rng(Rng::derive(seed, "synth",
                          (static_cast<std::uint64_t>(split_index) << 48) ^
                              (static_cast<std::uint64_t>(c) << 24) ^
                              static_cast<std::uint64_t>(s)));
      float* dst = d.images.data() + static_cast<std::int64_t>(row) * sz;
      for (std::int64_t i = 0; i < sz; ++i) {
        double v = tmpl[static_cast<std::size_t>(i)];
        if (noise > 0.0) v += noise * rng.gaussian();
        dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
      d.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  return d;
}

inline DatasetTriple generate_synthetic(int classes, int per_class, int image_size,
                                        double noise, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synthetic generator requires >= 2 classes");
  if (per_class < 1 || image_size < 4)
    throw ConfigError("synthetic generator: per_class >= 1 and image_size >= 4");
  DatasetTriple t;
  const int val_pc = std::max(1, per_class / 5);
  const int test_pc = std::max(1, 2 * per_class / 5);
  t.train = make_synthetic_split(classes, per_class, image_size, noise, seed, "train", 0);
  t.val = make_synthetic_split(classes, val_pc, image_size, noise, seed, "val", 1);
  t.test = make_synthetic_split(classes, test_pc, image_size, noise, seed, "test", 2);
  return t;
}

}  // namespace mulab
