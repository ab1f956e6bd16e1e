#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ahip/numerics/tensor.hpp"

namespace ahip {

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2, kBytes = 3 };

/// Self-describing binary container:
///
///   "AHIP" | u32 version | u8 precision bits | 3 reserved | u32 count
///   count x { u32 name_len | name | u8 dtype | u8 rank | u16 reserved |
///             u64 dims[rank] | u64 offset | u64 size }
///   payload bytes (offsets are relative to the payload start)
///
/// All integers and floats are little-endian. Entries are kept sorted by
/// name, so equal contents serialise to identical bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit Checkpoint(int precision_bits = 64) : precision_bits_(precision_bits) {}

  int precision_bits() const { return precision_bits_; }

  template <typename Scalar>
  void put(const std::string& name, const Tensor<Scalar>& t);
  void put_text(const std::string& name, const std::string& text);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  DType dtype(const std::string& name) const;
  Shape shape(const std::string& name) const;

  /// Reads a tensor; the stored dtype must match Scalar.
  template <typename Scalar>
  Tensor<Scalar> get(const std::string& name) const;
  std::string get_text(const std::string& name) const;

  std::vector<std::string> names() const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  struct Entry {
    DType dtype;
    Shape shape;
    std::vector<std::uint8_t> payload;
  };
  const Entry& at(const std::string& name) const;

  int precision_bits_;
  std::map<std::string, Entry> entries_;
};

}  // namespace ahip
