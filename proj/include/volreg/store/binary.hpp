#pragma once

// Little-endian byte encoding shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volreg/common.hpp"

namespace volreg::store {

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void raw(std::span<const std::uint8_t> s) { out_.insert(out_.end(), s.begin(), s.end()); }

  /// Length-prefixed (u32) UTF-8 string.
  void string(std::string_view s);

  template <class T>
  void array(std::span<const T> values) {
    out_.reserve(out_.size() + values.size() * sizeof(T));
    for (T v : values) {
      if constexpr (sizeof(T) == 4) {
        put(std::bit_cast<std::uint32_t>(v));
      } else {
        put(std::bit_cast<std::uint64_t>(v));
      }
    }
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

/// Bounds-checked reader; every failure reports the offset where it occurred.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get<std::uint8_t>("u8")); }
  std::uint32_t u32() { return get<std::uint32_t>("u32"); }
  std::uint64_t u64() { return get<std::uint64_t>("u64"); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>("f32")); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>("f64")); }
  std::string raw(std::size_t n, const char* what);
  std::string string(const char* what);

  template <class T>
  void array(std::span<T> out, const char* what) {
    require(out.size() * sizeof(T), what);
    for (T& v : out) {
      if constexpr (sizeof(T) == 4) {
        v = std::bit_cast<T>(get<std::uint32_t>(what));
      } else {
        v = std::bit_cast<T>(get<std::uint64_t>(what));
      }
    }
  }

  void require(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(std::string("truncated data while reading ") + what + ": need " + std::to_string(n) +
                            " bytes, " + std::to_string(data_.size() - pos_) + " left",
                        pos_);
    }
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  template <class U>
  U get(const char* what) {
    require(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never observe a
/// half-written file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace volreg::store
