#include "volreg/store/octv.hpp"

#include <cmath>
#include <limits>

namespace volreg::store {

Bytes encode_volume(const Volume& vol) {
  validate_volume(vol);
  if (vol.scan_id.find('\t') != std::string::npos || vol.patient_id.find('\t') != std::string::npos) {
    throw InvalidArgument("scan and patient ids must not contain tabs");
  }
  ByteWriter w;
  w.raw("OCTV");
  w.u32(kOctvVersion);
  for (std::size_t e : vol.extents()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("volume extent too large for OCTV");
    w.u32(static_cast<std::uint32_t>(e));
  }
  for (float s : vol.spacing_mm) w.f32(s);
  w.u8(static_cast<std::uint8_t>(vol.laterality));
  w.u8(static_cast<std::uint8_t>(vol.region));
  w.string(vol.patient_id.empty() ? vol.scan_id : vol.scan_id + '\t' + vol.patient_id);
  // voxels are stored x fastest; the tensor keeps z fastest
  const auto [nx, ny, nz] = vol.extents();
  std::vector<float> xfast(vol.voxels.size());
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t z = 0; z < nz; ++z) xfast[(z * ny + y) * nx + x] = vol.voxels[(x * ny + y) * nz + z];
  w.array<float>(xfast);
  return w.take();
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.raw(4, "magic") != "OCTV") throw FormatError("not an OCTV file (bad magic)", 0);
  const std::size_t version_at = r.offset();
  if (const std::uint32_t v = r.u32(); v != kOctvVersion) {
    throw FormatError("unsupported OCTV version " + std::to_string(v), version_at);
  }
  Extents3 e{};
  for (auto& v : e) {
    const std::size_t at = r.offset();
    v = r.u32();
    if (v == 0) throw FormatError("OCTV extent must be >= 1", at);
  }
  Volume vol;
  for (auto& s : vol.spacing_mm) {
    const std::size_t at = r.offset();
    s = r.f32();
    if (!(s > 0.0) || !std::isfinite(s)) throw FormatError("OCTV spacing must be positive", at);
  }
  std::size_t at = r.offset();
  const std::uint8_t lat = r.u8();
  if (lat > 1) throw FormatError("bad laterality code " + std::to_string(lat), at);
  at = r.offset();
  const std::uint8_t reg = r.u8();
  if (reg > 1) throw FormatError("bad region code " + std::to_string(reg), at);
  vol.laterality = static_cast<Laterality>(lat);
  vol.region = static_cast<Region>(reg);
  const std::string id = r.string("id string");
  if (const auto tab = id.find('\t'); tab != std::string::npos) {
    vol.scan_id = id.substr(0, tab);
    vol.patient_id = id.substr(tab + 1);
  } else {
    vol.scan_id = id;
  }
  const std::size_t count = e[0] * e[1] * e[2];
  if (count > r.remaining() / sizeof(float)) {
    r.require(count * sizeof(float), "voxel data");
  }
  std::vector<float> xfast(count);
  r.array<float>(xfast, "voxel data");
  if (r.remaining() != 0) throw FormatError("trailing bytes after voxel data", r.offset());
  Tensor voxels({e[0], e[1], e[2]});
  for (std::size_t x = 0; x < e[0]; ++x)
    for (std::size_t y = 0; y < e[1]; ++y)
      for (std::size_t z = 0; z < e[2]; ++z) voxels[(x * e[1] + y) * e[2] + z] = xfast[(z * e[1] + y) * e[0] + x];
  vol.voxels = std::move(voxels);
  return vol;
}

void write_volume(const Volume& vol, const std::filesystem::path& path) { write_file(path, encode_volume(vol)); }

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }

}  // namespace volreg::store
