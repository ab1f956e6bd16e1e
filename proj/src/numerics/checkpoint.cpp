#include "ahip/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ahip {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as raw little-endian bytes");

namespace {

constexpr char kMagic[4] = {'A', 'H', 'I', 'P'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated data");
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

template <typename Scalar>
constexpr DType dtype_of() {
  return sizeof(Scalar) == 4 ? DType::kFloat32 : DType::kFloat64;
}

}  // namespace

template <typename Scalar>
void Checkpoint::put(const std::string& name, const Tensor<Scalar>& t) {
  Entry e{dtype_of<Scalar>(), t.shape(), {}};
  e.payload.resize(static_cast<std::size_t>(t.numel()) * sizeof(Scalar));
  if (!e.payload.empty()) std::memcpy(e.payload.data(), t.data(), e.payload.size());
  entries_[name] = std::move(e);
}

void Checkpoint::put_text(const std::string& name, const std::string& text) {
  Entry e{DType::kBytes, Shape{static_cast<Index>(text.size())}, {}};
  e.payload.assign(text.begin(), text.end());
  entries_[name] = std::move(e);
}

const Checkpoint::Entry& Checkpoint::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("checkpoint: missing entry '" + name + "'");
  return it->second;
}

DType Checkpoint::dtype(const std::string& name) const { return at(name).dtype; }
Shape Checkpoint::shape(const std::string& name) const { return at(name).shape; }

template <typename Scalar>
Tensor<Scalar> Checkpoint::get(const std::string& name) const {
  const Entry& e = at(name);
  if (e.dtype != dtype_of<Scalar>()) {
    throw FormatError("checkpoint: entry '" + name + "' has a different precision");
  }
  Tensor<Scalar> t(e.shape);
  if (!e.payload.empty()) std::memcpy(t.data(), e.payload.data(), e.payload.size());
  return t;
}

std::string Checkpoint::get_text(const std::string& name) const {
  const Entry& e = at(name);
  if (e.dtype != DType::kBytes) throw FormatError("checkpoint: entry '" + name + "' is not text");
  return std::string(e.payload.begin(), e.payload.end());
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(precision_bits_));
  for (int i = 0; i < 3; ++i) put_le<std::uint8_t>(out, 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, e] : entries_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.shape.size()));
    put_le<std::uint16_t>(out, 0);
    for (Index d : e.shape) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    put_le<std::uint64_t>(out, offset);
    put_le<std::uint64_t>(out, e.payload.size());
    offset += e.payload.size();
  }
  for (const auto& [_, e] : entries_) out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  Reader r(bytes);
  r.str(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kFormatVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const int precision = r.le<std::uint8_t>();
  if (precision != 32 && precision != 64) throw FormatError("checkpoint: bad precision flag");
  r.str(3);
  const auto count = r.le<std::uint32_t>();

  struct Pending {
    std::string name;
    Entry entry;
    std::uint64_t offset, size;
  };
  std::vector<Pending> pending;
  for (std::uint32_t i = 0; i < count; ++i) {
    Pending p;
    p.name = r.str(r.le<std::uint32_t>());
    const auto dt = r.le<std::uint8_t>();
    if (dt < 1 || dt > 3) throw FormatError("checkpoint: bad dtype for '" + p.name + "'");
    p.entry.dtype = static_cast<DType>(dt);
    const auto rank = r.le<std::uint8_t>();
    r.le<std::uint16_t>();
    for (int d = 0; d < rank; ++d) p.entry.shape.push_back(static_cast<Index>(r.le<std::uint64_t>()));
    p.offset = r.le<std::uint64_t>();
    p.size = r.le<std::uint64_t>();
    const std::uint64_t width = p.entry.dtype == DType::kFloat32   ? 4
                                : p.entry.dtype == DType::kFloat64 ? 8
                                                                   : 1;
    if (p.size != static_cast<std::uint64_t>(shape_numel(p.entry.shape)) * width) {
      throw FormatError("checkpoint: size/shape mismatch for '" + p.name + "'");
    }
    pending.push_back(std::move(p));
  }
  const std::size_t base = r.pos();
  Checkpoint ck(precision);
  for (auto& p : pending) {
    if (base + p.offset + p.size > bytes.size()) throw IoError("checkpoint: truncated payload");
    p.entry.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(base + p.offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(base + p.offset + p.size));
    ck.entries_[p.name] = std::move(p.entry);
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

template void Checkpoint::put<float>(const std::string&, const Tensor<float>&);
template void Checkpoint::put<double>(const std::string&, const Tensor<double>&);
template Tensor<float> Checkpoint::get<float>(const std::string&) const;
template Tensor<double> Checkpoint::get<double>(const std::string&) const;

}  // namespace ahip
