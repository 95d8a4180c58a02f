#include "volreg/store/container.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace volreg::store {

namespace {

void check_name(const std::string& name) {
  if (name.empty()) throw InvalidArgument("container tensor names must be non-empty");
}

}  // namespace

void Container::add(std::string name, Tensor t) {
  check_name(name);
  if (contains(name)) throw InvalidArgument("duplicate container tensor '" + name + "'");
  tensors_.push_back({std::move(name), std::move(t)});
}

void Container::add(std::string name, Tensor64 t) {
  check_name(name);
  if (contains(name)) throw InvalidArgument("duplicate container tensor '" + name + "'");
  tensors_.push_back({std::move(name), std::move(t)});
}

bool Container::contains(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const NamedTensor& Container::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw FormatError("container has no tensor '" + name + "'", 0);
}

const Tensor& Container::f32(const std::string& name) const {
  const auto& t = find(name);
  if (!std::holds_alternative<Tensor>(t.value)) throw FormatError("tensor '" + name + "' is not f32", 0);
  return std::get<Tensor>(t.value);
}

const Tensor64& Container::f64(const std::string& name) const {
  const auto& t = find(name);
  if (!std::holds_alternative<Tensor64>(t.value)) throw FormatError("tensor '" + name + "' is not f64", 0);
  return std::get<Tensor64>(t.value);
}

void Container::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) {
    throw InvalidArgument("bad metadata key '" + key + "'");
  }
  if (value.find('\n') != std::string::npos) throw InvalidArgument("metadata value for '" + key + "' has a newline");
  metadata_[key] = value;
}

std::optional<std::string> Container::get(const std::string& key) const {
  const auto it = metadata_.find(key);
  if (it == metadata_.end()) return std::nullopt;
  return it->second;
}

const std::string& Container::require(const std::string& key) const {
  const auto it = metadata_.find(key);
  if (it == metadata_.end()) throw FormatError("container metadata lacks '" + key + "'", 0);
  return it->second;
}

double Container::require_number(const std::string& key) const {
  const std::string& text = require(key);
  const auto v = parse_number(text);
  if (!v) throw FormatError("metadata '" + key + "' is not a number: '" + text + "'", 0);
  return *v;
}

Bytes encode_container(const Container& c) {
  ByteWriter w;
  w.raw("VRCK");
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(c.tensors().size()));
  for (const auto& t : c.tensors()) {
    w.string(t.name);
    std::visit(
        [&](const auto& tensor) {
          using V = typename std::decay_t<decltype(tensor)>::value_type;
          w.u32(static_cast<std::uint32_t>(std::is_same_v<V, float> ? DType::F32 : DType::F64));
          w.u32(static_cast<std::uint32_t>(tensor.rank()));
          for (std::size_t e : tensor.shape()) w.u32(static_cast<std::uint32_t>(e));
        },
        t.value);
  }
  for (const auto& t : c.tensors()) {
    std::visit([&](const auto& tensor) { w.array(tensor.data()); }, t.value);
  }
  std::string meta;
  for (const auto& [k, v] : c.metadata()) meta += k + "=" + v + "\n";
  w.string(meta);
  return w.take();
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.raw(4, "magic") != "VRCK") throw FormatError("not a VRCK container (bad magic)", 0);
  const std::size_t version_at = r.offset();
  if (const std::uint32_t v = r.u32(); v != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(v), version_at);
  }
  struct Entry {
    std::string name;
    DType dtype;
    Shape shape;
  };
  const std::uint32_t count = r.u32();
  std::vector<Entry> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.string("tensor name");
    const std::size_t dtype_at = r.offset();
    const std::uint32_t code = r.u32();
    if (code != 1 && code != 2) throw FormatError("unknown dtype code " + std::to_string(code), dtype_at);
    e.dtype = static_cast<DType>(code);
    const std::uint32_t rank = r.u32();
    for (std::uint32_t a = 0; a < rank; ++a) {
      const std::size_t at = r.offset();
      const std::uint32_t ext = r.u32();
      if (ext == 0) throw FormatError("zero extent in tensor '" + e.name + "'", at);
      e.shape.push_back(ext);
    }
    if (rank == 0) throw FormatError("tensor '" + e.name + "' has rank 0", r.offset());
    manifest.push_back(std::move(e));
  }
  Container c;
  for (const auto& e : manifest) {
    const std::size_t n = shape_product(e.shape);
    const std::size_t width = e.dtype == DType::F32 ? 4 : 8;
    if (n > r.remaining() / width) r.require(n * width, "tensor data");
    if (e.dtype == DType::F32) {
      std::vector<float> data(n);
      r.array<float>(data, "tensor data");
      c.add(e.name, Tensor(e.shape, std::move(data)));
    } else {
      std::vector<double> data(n);
      r.array<double>(data, "tensor data");
      c.add(e.name, Tensor64(e.shape, std::move(data)));
    }
  }
  const std::size_t meta_at = r.offset();
  const std::string meta = r.string("metadata block");
  std::istringstream lines(meta);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw FormatError("malformed metadata line '" + line + "'", meta_at);
    c.set(line.substr(0, eq), line.substr(eq + 1));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after metadata", r.offset());
  return c;
}

void write_container(const Container& c, const std::filesystem::path& path) { write_file(path, encode_container(c)); }

Container read_container(const std::filesystem::path& path) { return decode_container(read_file(path)); }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

}  // namespace volreg::store
