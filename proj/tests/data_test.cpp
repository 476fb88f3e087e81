#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mulab/dataset.hpp"
#include "mulab/idx.hpp"
#include "mulab/manifest.hpp"

using namespace mulab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("mulab_data_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_raw(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

// Nearest-template classifier, the independent oracle for the generator.
int nearest_template(const Tensorf& img, int classes, int size) {
  int best = -1;
  double best_d = 0.0;
  for (int c = 0; c < classes; ++c) {
    std::vector<float> t = class_template(c, size);
    double d = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double diff = static_cast<double>(img[static_cast<std::int64_t>(i)]) - t[i];
      d += diff * diff;
    }
    if (best < 0 || d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

TEST(Idx, HandWrittenHeaderBytes) {
  fs::path dir = temp_dir("idx_hand");
  // 00 00 08 03, dims 2 x 2 x 2, payload 0..7.
  std::vector<std::uint8_t> raw = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2,
                                   0, 0, 0, 2, 0, 1, 2, 3, 4, 5, 6, 7};
  write_raw(dir / "imgs.idx", raw);
  IdxContent c = read_idx((dir / "imgs.idx").string());
  EXPECT_EQ(c.dims, (std::vector<int>{2, 2, 2}));
  ASSERT_EQ(c.bytes.size(), 8u);
  Tensorf imgs = idx_to_images(c);
  EXPECT_EQ(imgs.shape(), (std::vector<int>{2, 1, 2, 2}));
  EXPECT_FLOAT_EQ(imgs[0], 0.0f);
  EXPECT_NEAR(imgs[7], 7.0f / 255.0f, 1e-7);
}

TEST(Idx, RejectsBadTypeByte) {
  fs::path dir = temp_dir("idx_type");
  std::vector<std::uint8_t> raw = {0, 0, 0x0D, 1, 0, 0, 0, 2, 9, 9};
  write_raw(dir / "bad.idx", raw);
  try {
    read_idx((dir / "bad.idx").string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("0x0d"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset 2"), std::string::npos) << msg;
  }
}

TEST(Idx, RejectsBadMagicAndTruncation) {
  fs::path dir = temp_dir("idx_trunc");
  write_raw(dir / "magic.idx", {1, 0, 8, 1, 0, 0, 0, 1, 5});
  EXPECT_THROW(read_idx((dir / "magic.idx").string()), FormatError);

  // Declares 4 elements but carries 2.
  write_raw(dir / "short.idx", {0, 0, 8, 1, 0, 0, 0, 4, 1, 2});
  try {
    read_idx((dir / "short.idx").string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("expected 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("have 2"), std::string::npos) << msg;
  }

  write_raw(dir / "hdr.idx", {0, 0, 8});
  EXPECT_THROW(read_idx((dir / "hdr.idx").string()), FormatError);
}

TEST(Idx, WriteReadRoundTrip) {
  fs::path dir = temp_dir("idx_rt");
  std::vector<std::uint8_t> payload(3 * 4 * 5);
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<std::uint8_t>(i * 7 % 256);
  write_idx((dir / "rt.idx").string(), {3, 4, 5}, payload);
  IdxContent c = read_idx((dir / "rt.idx").string());
  EXPECT_EQ(c.dims, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(c.bytes, payload);

  std::vector<std::uint8_t> labels = {0, 2, 1};
  write_idx((dir / "lab.idx").string(), {3}, labels);
  EXPECT_EQ(idx_to_labels(read_idx((dir / "lab.idx").string())),
            (std::vector<int>{0, 2, 1}));
  // Images from a label file and vice versa are shape errors.
  EXPECT_THROW(idx_to_images(read_idx((dir / "lab.idx").string())), FormatError);
  EXPECT_THROW(idx_to_labels(read_idx((dir / "rt.idx").string())), FormatError);
}

TEST(Manifest, WriteLoadRoundTrip) {
  fs::path dir = temp_dir("manifest_rt");
  DatasetTriple t = generate_synthetic(3, 10, 8, 0.05, 99);
  std::map<std::string, Dataset> splits = {
      {"train", t.train}, {"val", t.val}, {"test", t.test}};
  write_manifest_dataset(dir.string(), "tiny", splits);

  auto loaded = load_manifest_dataset(dir.string());
  ASSERT_EQ(loaded.size(), 3u);
  for (const auto& [name, orig] : splits) {
    const Dataset& got = loaded.at(name);
    EXPECT_EQ(got.n(), orig.n());
    EXPECT_EQ(got.labels, orig.labels);
    EXPECT_EQ(got.num_classes, orig.num_classes);
    ASSERT_EQ(got.images.size(), orig.images.size());
    for (std::int64_t i = 0; i < got.images.size(); ++i)
      ASSERT_EQ(got.images[i], orig.images[i]) << name << " pixel " << i;
  }

  DatasetTriple rt = load_manifest_triple(dir.string());
  EXPECT_EQ(rt.train.n(), t.train.n());
  EXPECT_EQ(rt.test.labels, t.test.labels);
}

TEST(Manifest, RejectsLabelOutOfRange) {
  fs::path dir = temp_dir("manifest_label");
  DatasetTriple t = generate_synthetic(3, 4, 8, 0.0, 5);
  t.train.labels[0] = 7;  // outside [0,3)
  // Writing is a raw dump; validation happens on load.
  write_manifest_dataset(dir.string(), "bad", {{"train", t.train}});
  try {
    load_manifest_dataset(dir.string());
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("label 7"), std::string::npos);
  }
}

TEST(Manifest, RejectsCountMismatch) {
  fs::path dir = temp_dir("manifest_count");
  DatasetTriple t = generate_synthetic(2, 5, 8, 0.0, 5);
  write_manifest_dataset(dir.string(), "m", {{"train", t.train}});
  // Corrupt the declared count.
  std::ifstream in(dir / "dataset.json");
  json m = json::parse(in);
  in.close();
  m["splits"]["train"]["count"] = 99;
  std::ofstream out(dir / "dataset.json", std::ios::trunc);
  out << m.dump(2);
  out.close();
  EXPECT_THROW(load_manifest_dataset(dir.string()), IntegrityError);
}

TEST(Manifest, MissingSplitForTriple) {
  fs::path dir = temp_dir("manifest_missing");
  DatasetTriple t = generate_synthetic(2, 5, 8, 0.0, 5);
  write_manifest_dataset(dir.string(), "m", {{"train", t.train}});
  try {
    load_manifest_triple(dir.string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("test"), std::string::npos);
  }
}

TEST(Synthetic, NoiseZeroEqualsTemplate) {
  DatasetTriple t = generate_synthetic(6, 3, 12, 0.0, 1);
  ASSERT_EQ(t.train.n(), 18);
  for (int i = 0; i < t.train.n(); ++i) {
    Tensorf img = image_at(t.train.images, i);
    std::vector<float> tmpl = class_template(t.train.labels[static_cast<std::size_t>(i)], 12);
    for (std::size_t p = 0; p < tmpl.size(); ++p)
      ASSERT_FLOAT_EQ(img[static_cast<std::int64_t>(p)], tmpl[p]);
  }
}

TEST(Synthetic, NearestTemplateOracle) {
  // Noise-free: every sample classifies to its own template exactly.
  {
    DatasetTriple t = generate_synthetic(5, 4, 16, 0.0, 2);
    for (int i = 0; i < t.test.n(); ++i)
      ASSERT_EQ(nearest_template(image_at(t.test.images, i), 5, 16),
                t.test.labels[static_cast<std::size_t>(i)]);
  }
  // Moderate noise: at least 99% of samples stay nearest their template.
  {
    DatasetTriple t = generate_synthetic(3, 100, 16, 0.1, 3);
    int correct = 0;
    for (int i = 0; i < t.train.n(); ++i)
      correct += nearest_template(image_at(t.train.images, i), 3, 16) ==
                 t.train.labels[static_cast<std::size_t>(i)];
    EXPECT_GE(correct, static_cast<int>(0.99 * t.train.n()));
  }
}

TEST(Synthetic, SplitSizesAndDeterminism) {
  DatasetTriple t = generate_synthetic(3, 500, 16, 0.1, 42);
  EXPECT_EQ(t.train.n(), 1500);
  EXPECT_EQ(t.val.n(), 300);
  EXPECT_EQ(t.test.n(), 600);
  t.train.validate();
  t.val.validate();
  t.test.validate();

  DatasetTriple u = generate_synthetic(3, 500, 16, 0.1, 42);
  for (std::int64_t i = 0; i < t.train.images.size(); ++i)
    ASSERT_EQ(t.train.images[i], u.train.images[i]);

  // Different seed, different pixels; train and test streams differ too.
  DatasetTriple v = generate_synthetic(3, 500, 16, 0.1, 43);
  bool differs = false;
  for (std::int64_t i = 0; i < t.train.images.size() && !differs; ++i)
    differs = t.train.images[i] != v.train.images[i];
  EXPECT_TRUE(differs);
  bool split_differs = false;
  for (std::int64_t i = 0; i < t.test.images.size() && !split_differs; ++i)
    split_differs = t.train.images[i] != t.test.images[i];
  EXPECT_TRUE(split_differs);
}

TEST(Synthetic, RejectsBadConfig) {
  EXPECT_THROW(generate_synthetic(1, 10, 16, 0.1, 0), ConfigError);
  EXPECT_THROW(generate_synthetic(3, 0, 16, 0.1, 0), ConfigError);
  EXPECT_THROW(generate_synthetic(3, 10, 2, 0.1, 0), ConfigError);
}

TEST(Partition, InvariantsAcrossRatesAndSizes) {
  for (int n : {1, 10, 11959}) {
    for (double rate : {0.0, 0.1, 0.5, 1.0}) {
      ForgetPartition p = split_forget(n, rate, 7);
      const int k = static_cast<int>(std::floor(rate * n));
      EXPECT_EQ(static_cast<int>(p.forget.size()), k) << n << " " << rate;
      EXPECT_EQ(static_cast<int>(p.retain.size()), n - k);
      std::set<int> all(p.forget.begin(), p.forget.end());
      all.insert(p.retain.begin(), p.retain.end());
      EXPECT_EQ(static_cast<int>(all.size()), n);  // disjoint and complete
      if (n > 0) {
        EXPECT_EQ(*all.begin(), 0);
        EXPECT_EQ(*all.rbegin(), n - 1);
      }
      EXPECT_TRUE(std::is_sorted(p.forget.begin(), p.forget.end()));
      EXPECT_TRUE(std::is_sorted(p.retain.begin(), p.retain.end()));
    }
  }
  // Paper-scale check: 10% of 11,959 forgets 1,195 samples.
  EXPECT_EQ(split_forget(11959, 0.1, 0).forget.size(), 1195u);
}

TEST(Partition, SeedDeterminesSelection) {
  ForgetPartition a = split_forget(200, 0.3, 11);
  ForgetPartition b = split_forget(200, 0.3, 11);
  ForgetPartition c = split_forget(200, 0.3, 12);
  EXPECT_EQ(a.forget, b.forget);
  EXPECT_NE(a.forget, c.forget);
}

TEST(Partition, RejectsBadRate) {
  EXPECT_THROW(split_forget(10, -0.1, 0), ContractError);
  EXPECT_THROW(split_forget(10, 1.5, 0), ContractError);
}

TEST(SubsetOp, SelectsRows) {
  DatasetTriple t = generate_synthetic(3, 4, 8, 0.05, 9);
  Dataset s = subset(t.train, {0, 5, 11});
  EXPECT_EQ(s.n(), 3);
  EXPECT_EQ(s.labels[0], t.train.labels[0]);
  EXPECT_EQ(s.labels[1], t.train.labels[5]);
  EXPECT_EQ(s.labels[2], t.train.labels[11]);
  Tensorf a = image_at(s.images, 1), b = image_at(t.train.images, 5);
  for (std::int64_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);

  Dataset empty = subset(t.train, {});
  EXPECT_EQ(empty.n(), 0);
  EXPECT_TRUE(empty.labels.empty());
}
