#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dllap/error.hpp"

namespace dllap {

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
  bool operator==(const TensorRecord&) const = default;
};

// Ordered named-tensor store ("DLAP" files).
//
// Layout, all little-endian:
//   "DLAP" | u32 version | u32 record count
//   per record: u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 data[prod(dims)]
class WeightArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> data) {
    if (find(name) != nullptr) throw InvalidArgument("WeightArchive: duplicate tensor name '" + name + "'");
    TensorRecord r{std::move(name), std::move(shape), std::move(data)};
    if (r.name.size() > 0xFFFF) throw InvalidArgument("WeightArchive: tensor name too long");
    if (r.shape.size() > 0xFF) throw InvalidArgument("WeightArchive: rank exceeds 255");
    if (r.data.size() != r.element_count()) {
      throw InvalidArgument("WeightArchive: tensor '" + r.name + "' data length does not match shape");
    }
    records_.push_back(std::move(r));
  }

  const TensorRecord* find(std::string_view name) const {
    for (const auto& r : records_) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  // Looks up a tensor and checks its shape.
  const TensorRecord& get(std::string_view name, const std::vector<std::uint32_t>& shape) const {
    const auto* r = find(name);
    if (r == nullptr) throw NotFound("weight archive has no tensor named '" + std::string(name) + "'");
    if (r->shape != shape) {
      throw InvalidArgument("tensor '" + std::string(name) + "' has shape " + shape_string(r->shape) +
                            ", expected " + shape_string(shape));
    }
    return *r;
  }

  const std::vector<TensorRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool operator==(const WeightArchive&) const = default;

  static std::string shape_string(const std::vector<std::uint32_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
    return out + "]";
  }

 private:
  std::vector<TensorRecord> records_;
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
  const auto u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(U(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(context_ + ": truncated (needs " + std::to_string(n) + " bytes at offset " +
                        std::to_string(pos_) + ", file has " + std::to_string(bytes_.size()) + ")");
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

}  // namespace detail

inline std::vector<unsigned char> encode_archive(const WeightArchive& a) {
  std::vector<unsigned char> out{'D', 'L', 'A', 'P'};
  detail::put_le(out, WeightArchive::kVersion);
  detail::put_le(out, static_cast<std::uint32_t>(a.size()));
  for (const auto& r : a.records()) {
    detail::put_le(out, static_cast<std::uint16_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    detail::put_le(out, static_cast<std::uint8_t>(r.shape.size()));
    for (auto d : r.shape) detail::put_le(out, d);
    for (float v : r.data) detail::put_le(out, v);
  }
  return out;
}

inline WeightArchive decode_archive(std::span<const unsigned char> bytes, const std::string& context = "archive") {
  detail::ByteReader rd(bytes, context);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DLAP", 4) != 0) {
    throw FormatError(context + ": bad magic, expected \"DLAP\"");
  }
  rd.bytes(4);
  const auto version = rd.get<std::uint32_t>();
  if (version != WeightArchive::kVersion) {
    throw FormatError(context + ": unsupported DLAP version " + std::to_string(version));
  }
  const auto count = rd.get<std::uint32_t>();
  WeightArchive a;
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto name_len = rd.get<std::uint16_t>();
    std::string name(rd.bytes(name_len));
    const auto rank = rd.get<std::uint8_t>();
    std::vector<std::uint32_t> shape(rank);
    std::uint64_t elems = 1;
    for (auto& d : shape) {
      d = rd.get<std::uint32_t>();
      elems *= d;
      if (elems > rd.remaining()) break;  // checked precisely below
    }
    if (elems * 4 > rd.remaining()) {
      throw FormatError(context + ": tensor '" + name + "' declares " + std::to_string(elems) +
                        " floats but only " + std::to_string(rd.remaining()) + " bytes remain");
    }
    std::vector<float> data(static_cast<std::size_t>(elems));
    for (auto& v : data) v = rd.get<float>();
    try {
      a.add(std::move(name), std::move(shape), std::move(data));
    } catch (const InvalidArgument& e) {
      throw FormatError(context + ": " + e.what());
    }
  }
  if (rd.remaining() != 0) {
    throw FormatError(context + ": " + std::to_string(rd.remaining()) + " trailing bytes after last record");
  }
  return a;
}

inline void save_archive(const WeightArchive& a, const std::filesystem::path& path) {
  detail::write_file(path, encode_archive(a));
}

inline WeightArchive load_archive(const std::filesystem::path& path) {
  return decode_archive(detail::read_file(path), path.string());
}

}  // namespace dllap
