#pragma once

// Image augmentation on single [C x H x W] tensors: random crop with zero
// padding, horizontal flip, and a reduced RandAugment op set. Geometric
// ops use nearest-neighbor resampling; every op preserves shape and the
// [0,1] value range.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

enum class AugScenario { NoAug, Default, DefaultRA };

struct AugmentationConfig {
  AugScenario kind = AugScenario::NoAug;
  int crop_pad = 4;
  double flip_p = 0.5;
  int ra_n = 2;  // RandAugment ops per image
  int ra_m = 5;  // magnitude in [0,10]
};

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

// Crop an H x W window at offset (dy, dx) out of the zero-padded image;
// dy, dx in [0, 2*pad].
inline Tensorf crop_at(const Tensorf& img, int pad, int dy, int dx) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensorf out({C, H, W});
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      int sy = y + dy - pad;
      for (int x = 0; x < W; ++x) {
        int sx = x + dx - pad;
        float v = 0.0f;
        if (sy >= 0 && sy < H && sx >= 0 && sx < W)
          v = img[(static_cast<std::int64_t>(c) * H + sy) * W + sx];
        out[(static_cast<std::int64_t>(c) * H + y) * W + x] = v;
      }
    }
  }
  return out;
}

inline Tensorf random_crop(const Tensorf& img, int pad, Rng& rng) {
  if (pad < 0) throw ContractError("random_crop: pad must be >= 0");
  if (pad == 0) return img.clone();
  int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1)));
  int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1)));
  return crop_at(img, pad, dy, dx);
}

inline Tensorf hflip(const Tensorf& img) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensorf out({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        out[(static_cast<std::int64_t>(c) * H + y) * W + x] =
            img[(static_cast<std::int64_t>(c) * H + y) * W + (W - 1 - x)];
  return out;
}

inline Tensorf horizontal_flip(const Tensorf& img, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw ContractError("horizontal_flip: p outside [0,1]");
  if (rng.uniform() < p) return hflip(img);
  return img.clone();
}

// ---------------------------------------------------------------------------
// RandAugment op set. Strength scales with magnitude m in [0,10]:
//   rotate       +/- m * 3 degrees
//   translate    +/- m * 1.5% of width (rounded), per axis
//   photometric  strength m/10

enum class AugOp { Identity, Rotate, TranslateX, TranslateY, Brightness, Contrast, Sharpness };

inline constexpr int kAugOpCount = 7;

namespace detail {

inline Tensorf rotate_nn(const Tensorf& img, double degrees) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (degrees == 0.0) return img.clone();
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  Tensorf out({C, H, W});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      // Inverse map: rotate the output coordinate back into the source.
      double ry = y - cy, rx = x - cx;
      int sy = static_cast<int>(std::lround(cy + (sn * rx + cs * ry)));
      int sx = static_cast<int>(std::lround(cx + (cs * rx - sn * ry)));
      for (int c = 0; c < C; ++c) {
        float v = 0.0f;
        if (sy >= 0 && sy < H && sx >= 0 && sx < W)
          v = img[(static_cast<std::int64_t>(c) * H + sy) * W + sx];
        out[(static_cast<std::int64_t>(c) * H + y) * W + x] = v;
      }
    }
  }
  return out;
}

inline Tensorf translate(const Tensorf& img, int dy, int dx) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (dy == 0 && dx == 0) return img.clone();
  Tensorf out({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        int sy = y - dy, sx = x - dx;
        float v = 0.0f;
        if (sy >= 0 && sy < H && sx >= 0 && sx < W)
          v = img[(static_cast<std::int64_t>(c) * H + sy) * W + sx];
        out[(static_cast<std::int64_t>(c) * H + y) * W + x] = v;
      }
  return out;
}

inline Tensorf box_blur3(const Tensorf& img) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensorf out({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int oy = -1; oy <= 1; ++oy)
          for (int ox = -1; ox <= 1; ++ox) {
            int sy = y + oy, sx = x + ox;
            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
            acc += img[(static_cast<std::int64_t>(c) * H + sy) * W + sx];
            ++cnt;
          }
        out[(static_cast<std::int64_t>(c) * H + y) * W + x] =
            static_cast<float>(acc / cnt);
      }
  return out;
}

}  // namespace detail

// Apply one op at magnitude m with direction sign (+1 or -1).
inline Tensorf apply_aug_op(const Tensorf& img, AugOp op, int m, int sign) {
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  const double strength = m / 10.0;
  switch (op) {
    case AugOp::Identity:
      return img.clone();
    case AugOp::Rotate:
      return detail::rotate_nn(img, sign * m * 3.0);
    case AugOp::TranslateX:
      return detail::translate(img, 0, sign * static_cast<int>(std::lround(m * 0.015 * W)));
    case AugOp::TranslateY:
      return detail::translate(img, sign * static_cast<int>(std::lround(m * 0.015 * W)), 0);
    case AugOp::Brightness: {
      Tensorf out({C, H, W});
      float f = static_cast<float>(1.0 + sign * 0.9 * strength);
      for (std::int64_t i = 0; i < img.size(); ++i) out[i] = clamp01(img[i] * f);
      return out;
    }
    case AugOp::Contrast: {
      Tensorf out({C, H, W});
      const std::int64_t hw = static_cast<std::int64_t>(H) * W;
      float f = static_cast<float>(1.0 + sign * 0.9 * strength);
      for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) mean += img[c * hw + i];
        mean /= static_cast<double>(hw);
        for (std::int64_t i = 0; i < hw; ++i)
          out[c * hw + i] =
              clamp01(static_cast<float>(mean + (img[c * hw + i] - mean) * f));
      }
      return out;
    }
    case AugOp::Sharpness: {
      if (strength == 0.0) return img.clone();
      Tensorf blur = detail::box_blur3(img);
      Tensorf out({C, H, W});
      float s = static_cast<float>(sign * strength);
      for (std::int64_t i = 0; i < img.size(); ++i)
        out[i] = clamp01(img[i] + s * (img[i] - blur[i]));
      return out;
    }
  }
  throw ContractError("unknown augmentation op");
}

inline Tensorf rand_augment(const Tensorf& img, int n, int m, Rng& rng) {
  if (n < 1) throw ContractError("rand_augment: n must be >= 1");
  if (m < 0 || m > 10) throw ContractError("rand_augment: m outside [0,10]");
  Tensorf cur = img.clone();
  for (int i = 0; i < n; ++i) {
    AugOp op = static_cast<AugOp>(rng.below(kAugOpCount));
    int sign = rng.bernoulli(0.5) ? 1 : -1;
    cur = apply_aug_op(cur, op, m, sign);
  }
  return cur;
}

// One sample through the configured scenario. NoAug leaves the image
// bit-identical to the raw data.
inline Tensorf augment_sample(const Tensorf& img, const AugmentationConfig& cfg,
                              Rng& rng) {
  switch (cfg.kind) {
    case AugScenario::NoAug:
      return img.clone();
    case AugScenario::Default: {
      Tensorf t = random_crop(img, cfg.crop_pad, rng);
      return horizontal_flip(t, cfg.flip_p, rng);
    }
    case AugScenario::DefaultRA: {
      Tensorf t = random_crop(img, cfg.crop_pad, rng);
      t = horizontal_flip(t, cfg.flip_p, rng);
      return rand_augment(t, cfg.ra_n, cfg.ra_m, rng);
    }
  }
  throw ContractError("unknown augmentation scenario");
}

inline const char* scenario_name(AugScenario s) {
  switch (s) {
    case AugScenario::NoAug: return "noaug";
    case AugScenario::Default: return "default";
    case AugScenario::DefaultRA: return "default_ra";
  }
  return "?";
}

inline AugScenario scenario_from_name(const std::string& s) {
  if (s == "noaug") return AugScenario::NoAug;
  if (s == "default") return AugScenario::Default;
  if (s == "default_ra") return AugScenario::DefaultRA;
  throw ConfigError("unknown augmentation scenario '" + s + "'");
}

}  // namespace mulab
