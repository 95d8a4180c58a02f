#include "volreg/store/binary.hpp"

#include <fstream>
#include <iterator>
#include <limits>

namespace volreg::store {

void ByteWriter::string(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("string too long to encode");
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

std::string ByteReader::raw(std::size_t n, const char* what) {
  require(n, what);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::string(const char* what) {
  const std::uint32_t n = u32();
  return raw(n, what);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw InvalidArgument("error while reading '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidArgument("error while writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace volreg::store
