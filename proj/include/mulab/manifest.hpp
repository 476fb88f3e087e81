#pragma once

// Manifest dataset directory format.
//
// A directory holds dataset.json plus one raw tensor file per split:
//   dataset.json:
//     { "name": str, "num_classes": int, "class_names": [str...],
//       "image_shape": [C, H, W], "dtype": "float32" | "uint8",
//       "splits": { "<split>": { "images": file, "labels": file,
//                                "count": N } } }
//   <split>_images file: count*C*H*W values, row-major; float32 files are
//     little-endian 32-bit floats in [0,1], uint8 files are raw bytes
//     scaled by 1/255 at load time.
//   <split>_labels file: count little-endian 32-bit signed ints.
//
// Invariants (label range, [0,1] pixels, size agreement) are enforced at
// load time.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mulab/dataset.hpp"
#include "mulab/errors.hpp"

namespace mulab {

using json = nlohmann::json;

namespace detail {

inline std::vector<char> read_file_bytes(const std::filesystem::path& p,
                                         const std::string& what) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw FormatError("missing file for " + what + ": " + p.string());
  return std::vector<char>((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
}

}  // namespace detail

inline std::map<std::string, Dataset> load_manifest_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path root(dir);
  fs::path mpath = root / "dataset.json";
  std::ifstream mf(mpath);
  if (!mf) throw FormatError("missing manifest: " + mpath.string());
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw FormatError("bad manifest JSON in " + mpath.string() + ": " + e.what());
  }

  const int num_classes = m.at("num_classes").get<int>();
  const std::vector<int> ishape = m.at("image_shape").get<std::vector<int>>();
  if (ishape.size() != 3) throw IntegrityError("image_shape must be [C,H,W]");
  const std::string dtype = m.value("dtype", "float32");
  if (dtype != "float32" && dtype != "uint8")
    throw FormatError("unsupported dtype '" + dtype + "' in " + mpath.string());
  const std::string name = m.value("name", root.filename().string());
  const std::int64_t per_image =
      static_cast<std::int64_t>(ishape[0]) * ishape[1] * ishape[2];

  std::map<std::string, Dataset> out;
  for (auto& [split, spec] : m.at("splits").items()) {
    const int count = spec.at("count").get<int>();
    auto ibytes = detail::read_file_bytes(
        root / spec.at("images").get<std::string>(), "split '" + split + "' images");
    auto lbytes = detail::read_file_bytes(
        root / spec.at("labels").get<std::string>(), "split '" + split + "' labels");

    const std::int64_t expect_vals = static_cast<std::int64_t>(count) * per_image;
    const std::int64_t have_vals = dtype == "float32"
                                       ? static_cast<std::int64_t>(ibytes.size()) / 4
                                       : static_cast<std::int64_t>(ibytes.size());
    if ((dtype == "float32" && ibytes.size() % 4 != 0) || have_vals != expect_vals)
      throw IntegrityError("split '" + split + "': image file holds " +
                           std::to_string(have_vals) + " values but manifest declares " +
                           std::to_string(expect_vals));
    if (static_cast<std::int64_t>(lbytes.size()) != static_cast<std::int64_t>(count) * 4)
      throw IntegrityError("split '" + split + "': label file holds " +
                           std::to_string(lbytes.size() / 4) +
                           " labels but manifest declares " + std::to_string(count));

    Dataset d;
    d.images = Tensorf({count, ishape[0], ishape[1], ishape[2]});
    if (dtype == "float32") {
      std::memcpy(d.images.data(), ibytes.data(), ibytes.size());
    } else {
      for (std::int64_t i = 0; i < expect_vals; ++i)
        d.images[i] = static_cast<float>(static_cast<std::uint8_t>(ibytes[i])) / 255.0f;
    }
    d.labels.resize(static_cast<std::size_t>(count));
    std::memcpy(d.labels.data(), lbytes.data(), lbytes.size());
    d.num_classes = num_classes;
    d.split = split;
    d.provenance = name;
    d.validate();
    out.emplace(split, std::move(d));
  }
  return out;
}

inline void write_manifest_dataset(const std::string& dir, const std::string& name,
                                   const std::map<std::string, Dataset>& splits) {
  namespace fs = std::filesystem;
  if (splits.empty()) throw ContractError("write_manifest_dataset: no splits");
  fs::create_directories(dir);
  const Dataset& first = splits.begin()->second;
  json m;
  m["name"] = name;
  m["num_classes"] = first.num_classes;
  m["image_shape"] = {first.channels(), first.height(), first.width()};
  m["dtype"] = "float32";
  m["splits"] = json::object();
  for (const auto& [split, d] : splits) {
    std::string ifile = split + "_images.bin";
    std::string lfile = split + "_labels.bin";
    {
      std::ofstream f(fs::path(dir) / ifile, std::ios::binary | std::ios::trunc);
      f.write(reinterpret_cast<const char*>(d.images.data()),
              static_cast<std::streamsize>(d.images.size() * 4));
      if (!f) throw FormatError("write failed: " + ifile);
    }
    {
      std::ofstream f(fs::path(dir) / lfile, std::ios::binary | std::ios::trunc);
      f.write(reinterpret_cast<const char*>(d.labels.data()),
              static_cast<std::streamsize>(d.labels.size() * 4));
      if (!f) throw FormatError("write failed: " + lfile);
    }
    m["splits"][split] = {{"images", ifile}, {"labels", lfile}, {"count", d.n()}};
  }
  std::ofstream f(fs::path(dir) / "dataset.json", std::ios::trunc);
  f << m.dump(2) << "\n";
  if (!f) throw FormatError("write failed: dataset.json");
}

inline DatasetTriple load_manifest_triple(const std::string& dir) {
  auto splits = load_manifest_dataset(dir);
  auto get = [&](const char* s) -> Dataset {
    auto it = splits.find(s);
    if (it == splits.end())
      throw FormatError(std::string("manifest dataset missing split '") + s + "'");
    return it->second;
  };
  DatasetTriple t;
  t.train = get("train");
  t.test = get("test");
  t.val = splits.count("val") ? splits["val"] : t.test;
  return t;
}

}  // namespace mulab
