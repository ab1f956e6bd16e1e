#include "ahip/taskdata/idx.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw IoError(path + ": empty file");
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::string& path) {
  if (at + 4 > b.size()) throw IoError(path + ": truncated header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Tensor<float> load_idx_images(const std::string& path) {
  const auto b = read_file(path);
  if (be32(b, 0, path) != 0x00000803u) throw FormatError(path + ": not an IDX image file");
  const Index n = be32(b, 4, path), rows = be32(b, 8, path), cols = be32(b, 12, path);
  const std::size_t need = 16 + static_cast<std::size_t>(n * rows * cols);
  if (b.size() < need) throw IoError(path + ": truncated payload");
  if (b.size() > need) throw FormatError(path + ": trailing bytes");
  Tensor<float> images(Shape{n, 1, rows, cols});
  for (Index i = 0; i < images.numel(); ++i) images[i] = static_cast<float>(b[16 + i]) / 255.0f;
  return images;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const auto b = read_file(path);
  if (be32(b, 0, path) != 0x00000801u) throw FormatError(path + ": not an IDX label file");
  const std::size_t n = be32(b, 4, path);
  if (b.size() < 8 + n) throw IoError(path + ": truncated payload");
  if (b.size() > 8 + n) throw FormatError(path + ": trailing bytes");
  return {b.begin() + 8, b.end()};
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  Dataset ds{load_idx_images(images_path), load_idx_labels(labels_path)};
  if (ds.images.dim(0) != ds.size()) throw FormatError("IDX image and label counts differ");
  return ds;
}

void write_idx_images(const std::string& path, const Tensor<float>& images) {
  if (images.rank() != 4 || images.dim(1) != 1) throw DimensionError("write_idx_images: need [n,1,H,W]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  put_be32(out, 0x00000803u);
  for (Index d : {images.dim(0), images.dim(2), images.dim(3)}) put_be32(out, static_cast<std::uint32_t>(d));
  for (Index i = 0; i < images.numel(); ++i) {
    const float v = std::clamp(images[i], 0.0f, 1.0f);
    out.put(static_cast<char>(static_cast<unsigned char>(v * 255.0f + 0.5f)));
  }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  put_be32(out, 0x00000801u);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) out.put(static_cast<char>(static_cast<unsigned char>(y)));
}

}  // namespace ahip
