#pragma once

// IDX file format (the MNIST-family container).
//
// Byte layout:
//   offset 0: 0x00 0x00          magic padding
//   offset 2: type byte          only 0x08 (unsigned byte) is supported
//   offset 3: rank byte          number of dimensions
//   offset 4: rank big-endian unsigned 32-bit dimension sizes
//   then:     row-major payload, one byte per element
//
// Pixel files (rank 3 or 4) scale by 1/255 into [0,1]; rank-3 files become
// [N x 1 x H x W], rank-4 [N x C x H x W]. Rank-1 files are label vectors.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

struct IdxContent {
  std::vector<int> dims;
  std::vector<std::uint8_t> bytes;  // row-major payload
};

inline IdxContent read_idx(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open IDX file: " + path);
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  if (raw.size() < 4)
    throw FormatError(path + ": truncated header at byte offset " +
                      std::to_string(raw.size()));
  if (raw[0] != 0 || raw[1] != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  if (raw[2] != 0x08)
    throw FormatError(path + ": unsupported type byte 0x" +
                      [](int v) {
                        const char* hex = "0123456789abcdef";
                        return std::string{hex[(v >> 4) & 0xf], hex[v & 0xf]};
                      }(raw[2]) +
                      " at byte offset 2 (only 0x08 unsigned byte is supported)");
  const int rank = raw[3];
  if (rank < 1 || rank > 4)
    throw FormatError(path + ": unsupported rank " + std::to_string(rank) +
                      " at byte offset 3");
  std::size_t off = 4;
  IdxContent c;
  std::int64_t total = 1;
  for (int d = 0; d < rank; ++d) {
    if (off + 4 > raw.size())
      throw FormatError(path + ": truncated dimension table at byte offset " +
                        std::to_string(off));
    std::uint32_t v = (std::uint32_t(raw[off]) << 24) | (std::uint32_t(raw[off + 1]) << 16) |
                      (std::uint32_t(raw[off + 2]) << 8) | std::uint32_t(raw[off + 3]);
    off += 4;
    c.dims.push_back(static_cast<int>(v));
    total *= v;
  }
  if (static_cast<std::int64_t>(raw.size() - off) != total)
    throw FormatError(path + ": truncated payload at byte offset " + std::to_string(off) +
                      " (expected " + std::to_string(total) + " bytes, have " +
                      std::to_string(raw.size() - off) + ")");
  c.bytes.assign(raw.begin() + static_cast<std::ptrdiff_t>(off), raw.end());
  return c;
}

inline void write_idx(const std::string& path, const std::vector<int>& dims,
                      const std::vector<std::uint8_t>& bytes) {
  std::int64_t total = 1;
  for (int d : dims) total *= d;
  if (total != static_cast<std::int64_t>(bytes.size()))
    throw FormatError("write_idx: payload size does not match dims");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open for write: " + path);
  std::uint8_t header[4] = {0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  f.write(reinterpret_cast<const char*>(header), 4);
  for (int d : dims) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>((d >> 24) & 0xff),
                         static_cast<std::uint8_t>((d >> 16) & 0xff),
                         static_cast<std::uint8_t>((d >> 8) & 0xff),
                         static_cast<std::uint8_t>(d & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
  }
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed: " + path);
}

// Pixels scaled by 1/255; rank 3 -> [N x 1 x H x W], rank 4 -> [N x C x H x W].
inline Tensorf idx_to_images(const IdxContent& c) {
  std::vector<int> shape;
  if (c.dims.size() == 3)
    shape = {c.dims[0], 1, c.dims[1], c.dims[2]};
  else if (c.dims.size() == 4)
    shape = {c.dims[0], c.dims[1], c.dims[2], c.dims[3]};
  else
    throw FormatError("IDX image file must have rank 3 or 4, got rank " +
                      std::to_string(c.dims.size()));
  Tensorf t(shape);
  for (std::size_t i = 0; i < c.bytes.size(); ++i)
    t[static_cast<std::int64_t>(i)] = static_cast<float>(c.bytes[i]) / 255.0f;
  return t;
}

inline std::vector<int> idx_to_labels(const IdxContent& c) {
  if (c.dims.size() != 1)
    throw FormatError("IDX label file must have rank 1, got rank " +
                      std::to_string(c.dims.size()));
  return std::vector<int>(c.bytes.begin(), c.bytes.end());
}

}  // namespace mulab
