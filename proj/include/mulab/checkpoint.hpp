#pragma once

// Model checkpoint format: a directory holding
//   manifest.json  architecture descriptor, seed, optional config object,
//                  ordered parameter and buffer tables (path + shape)
//   params.bin     one little-endian 32-bit-float blob per entry,
//                  concatenated in manifest order (parameters first, then
//                  batchnorm running-moment buffers)
// Round trips are bit-exact.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/model.hpp"

namespace mulab {

using json = nlohmann::json;

inline json arch_to_json(const ArchDescriptor& d) {
  return json{{"kind", arch_name(d.kind)},
              {"in_channels", d.in_channels},
              {"image_size", d.image_size},
              {"num_classes", d.num_classes},
              {"base_width", d.base_width},
              {"hidden", d.hidden}};
}

inline ArchDescriptor arch_from_json(const json& j) {
  ArchDescriptor d;
  d.kind = arch_from_name(j.at("kind").get<std::string>());
  d.in_channels = j.at("in_channels").get<int>();
  d.image_size = j.at("image_size").get<int>();
  d.num_classes = j.at("num_classes").get<int>();
  d.base_width = j.value("base_width", 16);
  if (j.contains("hidden")) d.hidden = j.at("hidden").get<std::vector<int>>();
  return d;
}

inline void save_checkpoint(const std::string& dir, Model<float>& model,
                            std::uint64_t seed, const json& config = json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json m;
  m["format_version"] = 1;
  m["architecture"] = arch_to_json(model.descriptor());
  m["seed"] = seed;
  m["config"] = config;
  m["blob"] = "params.bin";

  std::ofstream blob(fs::path(dir) / "params.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw FormatError("cannot write params.bin in " + dir);

  m["parameters"] = json::array();
  for (const auto& p : model.parameters()) {
    m["parameters"].push_back({{"path", p.path}, {"shape", p.tensor.shape()}});
    blob.write(reinterpret_cast<const char*>(p.tensor.data()),
               static_cast<std::streamsize>(p.tensor.size() * 4));
  }
  m["buffers"] = json::array();
  for (auto& [path, bn] : model.bn_states()) {
    const int c = static_cast<int>(bn->running_mean.size());
    m["buffers"].push_back({{"path", path + ".running_mean"}, {"shape", json::array({c})}});
    blob.write(reinterpret_cast<const char*>(bn->running_mean.data()),
               static_cast<std::streamsize>(c * 4));
    m["buffers"].push_back({{"path", path + ".running_var"}, {"shape", json::array({c})}});
    blob.write(reinterpret_cast<const char*>(bn->running_var.data()),
               static_cast<std::streamsize>(c * 4));
  }
  if (!blob) throw FormatError("write failed: params.bin in " + dir);
  blob.close();

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
  mf << m.dump(2) << "\n";
  if (!mf) throw FormatError("write failed: manifest.json in " + dir);
}

struct Checkpoint {
  std::unique_ptr<Model<float>> model;
  std::uint64_t seed = 0;
  json config;
};

inline Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw FormatError("missing manifest.json in " + dir);
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::parse_error& e) {
    throw FormatError("bad checkpoint manifest in " + dir + ": " + e.what());
  }
  Checkpoint ck;
  ck.seed = m.value("seed", std::uint64_t(0));
  ck.config = m.value("config", json::object());
  ck.model = build_model<float>(arch_from_json(m.at("architecture")), 0);

  std::ifstream blob(fs::path(dir) / m.value("blob", "params.bin"), std::ios::binary);
  if (!blob) throw FormatError("missing parameter blob in " + dir);

  auto read_into = [&](float* dst, std::int64_t count, const std::string& path) {
    blob.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * 4));
    if (blob.gcount() != static_cast<std::streamsize>(count * 4))
      throw FormatError("truncated blob while reading '" + path + "' in " + dir);
  };

  auto& params = ck.model->parameters();
  const json& ptable = m.at("parameters");
  if (ptable.size() != params.size())
    throw IntegrityError("checkpoint parameter count mismatch in " + dir);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& e = ptable[i];
    if (e.at("path").get<std::string>() != params[i].path ||
        e.at("shape").get<std::vector<int>>() != params[i].tensor.shape())
      throw IntegrityError("checkpoint parameter mismatch at '" +
                           e.at("path").get<std::string>() + "' in " + dir);
    read_into(params[i].tensor.data(), params[i].tensor.size(), params[i].path);
  }
  auto bns = ck.model->bn_states();
  const json& btable = m.at("buffers");
  if (btable.size() != bns.size() * 2)
    throw IntegrityError("checkpoint buffer count mismatch in " + dir);
  for (std::size_t i = 0; i < bns.size(); ++i) {
    read_into(bns[i].second->running_mean.data(),
              static_cast<std::int64_t>(bns[i].second->running_mean.size()),
              bns[i].first + ".running_mean");
    read_into(bns[i].second->running_var.data(),
              static_cast<std::int64_t>(bns[i].second->running_var.size()),
              bns[i].first + ".running_var");
  }
  return ck;
}

}  // namespace mulab
