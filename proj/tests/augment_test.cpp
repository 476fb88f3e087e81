#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mulab/augment.hpp"
#include "mulab/rng.hpp"

using namespace mulab;

namespace {

Tensorf gradient_image(int C, int H, int W) {
  Tensorf img({C, H, W});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        img[(static_cast<std::int64_t>(c) * H + y) * W + x] =
            static_cast<float>(x) / static_cast<float>(W);
  return img;
}

Tensorf random_image(int C, int H, int W, Rng& rng) {
  Tensorf img({C, H, W});
  for (std::int64_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<float>(rng.uniform());
  return img;
}

bool bit_identical(const Tensorf& a, const Tensorf& b) {
  if (a.shape() != b.shape()) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool in_unit_range(const Tensorf& a) {
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (!(a[i] >= 0.0f && a[i] <= 1.0f)) return false;
  return true;
}

}  // namespace

TEST(Crop, CenterOffsetIsIdentity) {
  Rng rng(1);
  Tensorf img = random_image(2, 6, 6, rng);
  EXPECT_TRUE(bit_identical(crop_at(img, 3, 3, 3), img));
}

TEST(Crop, CornerOffsetTracesPadding) {
  // dy = dx = 0 shifts content down-right by pad; the first rows/cols are
  // the zero padding.
  Tensorf img = gradient_image(1, 4, 4);
  Tensorf out = crop_at(img, 2, 0, 0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      float expect = (y < 2 || x < 2) ? 0.0f : img[(y - 2) * 4 + (x - 2)];
      EXPECT_FLOAT_EQ(out[y * 4 + x], expect) << y << "," << x;
    }
}

TEST(Crop, PadZeroIsIdentity) {
  Rng rng(2);
  Tensorf img = random_image(1, 5, 5, rng);
  Rng crop_rng(3);
  EXPECT_TRUE(bit_identical(random_crop(img, 0, crop_rng), img));
  EXPECT_THROW(random_crop(img, -1, crop_rng), ContractError);
}

TEST(Flip, IsInvolutionAndMovesColumns) {
  Rng rng(4);
  Tensorf img = random_image(3, 5, 7, rng);
  EXPECT_TRUE(bit_identical(hflip(hflip(img)), img));

  Tensorf grad = gradient_image(1, 3, 8);
  Tensorf f = hflip(grad);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 8; ++x)
      EXPECT_FLOAT_EQ(f[y * 8 + x], grad[y * 8 + (7 - x)]);
}

TEST(Flip, ProbabilityEndpoints) {
  Rng rng(5);
  Tensorf img = random_image(1, 4, 4, rng);
  Rng r0(6), r1(6);
  EXPECT_TRUE(bit_identical(horizontal_flip(img, 0.0, r0), img));
  EXPECT_TRUE(bit_identical(horizontal_flip(img, 1.0, r1), hflip(img)));
  EXPECT_THROW(horizontal_flip(img, 1.5, r0), ContractError);
}

TEST(RandAugment, MagnitudeZeroGeometryOnly) {
  // At m = 0 every op degenerates to the identity: rotation angle 0,
  // translation 0 pixels, photometric factor 1.
  Rng rng(7);
  Tensorf img = random_image(1, 8, 8, rng);
  for (int op = 0; op < kAugOpCount; ++op)
    for (int sign : {-1, 1})
      EXPECT_TRUE(bit_identical(apply_aug_op(img, static_cast<AugOp>(op), 0, sign), img))
          << "op " << op;
}

TEST(RandAugment, IdentityOpAndBounds) {
  Rng rng(8);
  Tensorf img = random_image(2, 10, 10, rng);
  EXPECT_TRUE(bit_identical(apply_aug_op(img, AugOp::Identity, 9, 1), img));
  EXPECT_THROW(rand_augment(img, 0, 5, rng), ContractError);
  EXPECT_THROW(rand_augment(img, 2, 11, rng), ContractError);
}

TEST(RandAugment, TranslateMatchesManualShift) {
  Tensorf img = gradient_image(1, 8, 8);
  // m = 9 -> round(9 * 0.015 * 8) = 1 pixel.
  Tensorf tx = apply_aug_op(img, AugOp::TranslateX, 9, 1);
  for (int y = 0; y < 8; ++y) {
    EXPECT_FLOAT_EQ(tx[y * 8 + 0], 0.0f);
    for (int x = 1; x < 8; ++x) EXPECT_FLOAT_EQ(tx[y * 8 + x], img[y * 8 + x - 1]);
  }
}

TEST(RandAugment, PropertySweepPreservesShapeAndRange) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensorf img = random_image(1, 8, 8, rng);
    int m = static_cast<int>(rng.below(11));
    Tensorf out = rand_augment(img, 2, m, rng);
    ASSERT_EQ(out.shape(), img.shape());
    ASSERT_TRUE(in_unit_range(out)) << "trial " << trial << " m " << m;
  }
}

TEST(Scenario, NoAugIsBitIdentical) {
  Rng rng(10);
  Tensorf img = random_image(3, 16, 16, rng);
  AugmentationConfig cfg;
  cfg.kind = AugScenario::NoAug;
  Rng aug_rng(11);
  EXPECT_TRUE(bit_identical(augment_sample(img, cfg, aug_rng), img));
}

TEST(Scenario, SeedStreamIsDeterministic) {
  Rng rng(12);
  Tensorf img = random_image(1, 16, 16, rng);
  for (AugScenario k : {AugScenario::Default, AugScenario::DefaultRA}) {
    AugmentationConfig cfg;
    cfg.kind = k;
    Rng a(77), b(77), c(78);
    Tensorf oa = augment_sample(img, cfg, a);
    Tensorf ob = augment_sample(img, cfg, b);
    EXPECT_TRUE(bit_identical(oa, ob));
    // A different stream eventually differs; retry a few draws to dodge
    // the coincidental-equality case.
    bool differs = false;
    for (int i = 0; i < 16 && !differs; ++i)
      differs = !bit_identical(augment_sample(img, cfg, c), oa);
    EXPECT_TRUE(differs) << scenario_name(k);
  }
}

TEST(Scenario, NamesRoundTrip) {
  for (AugScenario k :
       {AugScenario::NoAug, AugScenario::Default, AugScenario::DefaultRA})
    EXPECT_EQ(scenario_from_name(scenario_name(k)), k);
  EXPECT_THROW(scenario_from_name("cutmix"), ConfigError);
}

TEST(Scenario, DefaultKeepsRangeAndShape) {
  Rng rng(13);
  AugmentationConfig cfg;
  cfg.kind = AugScenario::Default;
  Rng aug_rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Tensorf img = random_image(1, 12, 12, rng);
    Tensorf out = augment_sample(img, cfg, aug_rng);
    ASSERT_EQ(out.shape(), img.shape());
    ASSERT_TRUE(in_unit_range(out));
  }
}
