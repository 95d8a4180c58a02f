#pragma once

// VRCK tensor container, little-endian:
//   "VRCK" | u32 version
//   u32 tensor count, then per tensor: u32 name length | name | u32 dtype
//   (1 = f32, 2 = f64) | u32 rank | u32 extents[rank]
//   raw tensor data in manifest order
//   u32 metadata length | UTF-8 "key=value\n" lines
// Used for network checkpoints and fitted classical models.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "volreg/store/binary.hpp"
#include "volreg/tensor.hpp"

namespace volreg::store {

inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint32_t { F32 = 1, F64 = 2 };

struct NamedTensor {
  std::string name;
  std::variant<Tensor, Tensor64> value;

  bool operator==(const NamedTensor&) const = default;
};

class Container {
 public:
  void add(std::string name, Tensor t);
  void add(std::string name, Tensor64 t);

  bool contains(const std::string& name) const;
  const Tensor& f32(const std::string& name) const;
  const Tensor64& f64(const std::string& name) const;
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  /// Keys must be non-empty and free of '=' and newlines; values free of newlines.
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  /// Throws FormatError naming the key when absent.
  const std::string& require(const std::string& key) const;
  double require_number(const std::string& key) const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  bool operator==(const Container&) const = default;

 private:
  const NamedTensor& find(const std::string& name) const;

  std::vector<NamedTensor> tensors_;
  std::map<std::string, std::string> metadata_;
};

Bytes encode_container(const Container& c);
Container decode_container(std::span<const std::uint8_t> bytes);

void write_container(const Container& c, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_number(double v);
/// Full-string parse; nullopt unless the whole text is a number.
std::optional<double> parse_number(std::string_view text);

}  // namespace volreg::store
