#include "volreg/cam/cam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volreg::cam {

std::size_t output_index(eval::Target target) {
  switch (target) {
    case eval::Target::VFI: return 0;
    case eval::Target::MD: return 1;
  }
  throw InvalidArgument("CAM target must be VFI or MD");
}

Tensor weighted_feature_sum(const Tensor& features, const Tensor& head_weight, std::size_t output) {
  if (features.rank() != 4) throw InvalidArgument("CAM features must be [C, x, y, z]");
  const std::size_t channels = features.extent(0);
  if (head_weight.rank() != 2 || head_weight.extent(0) != channels) {
    throw InvalidArgument("head weight " + shape_string(head_weight.shape()) + " does not match " +
                          std::to_string(channels) + " feature channels");
  }
  if (output >= head_weight.extent(1)) throw InvalidArgument("head has no output " + std::to_string(output));
  const std::size_t inner = features.size() / channels;
  std::vector<double> acc(inner, 0.0);
  for (std::size_t k = 0; k < channels; ++k) {
    const double w = head_weight(k, output);
    const float* f = features.raw() + k * inner;
    for (std::size_t i = 0; i < inner; ++i) acc[i] += w * f[i];
  }
  Tensor out({features.extent(1), features.extent(2), features.extent(3)});
  for (std::size_t i = 0; i < inner; ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

CamVolume compute_cam(const autonet::Checkpoint& ckpt, const Tensor& prepared, eval::Target target,
                      std::string scan_id) {
  const std::size_t output = output_index(target);
  const std::size_t idx = 0;
  const Tensor batch = autonet::stack_inputs({prepared}, std::span<const std::size_t>(&idx, 1));
  const Tensor feats = autonet::final_features(ckpt.spec, ckpt.params, batch);
  const Shape& s = feats.shape();
  const Tensor single({s[1], s[2], s[3], s[4]}, std::vector<float>(feats.data().begin(), feats.data().end()));
  return {weighted_feature_sum(single, ckpt.params.head_weight, output), target, std::move(scan_id)};
}

CamVolume compute_cam(const autonet::Checkpoint& ckpt, const Volume& vol, eval::Target target) {
  return compute_cam(ckpt, autonet::prepare_input(vol, ckpt.spec), target, vol.scan_id);
}

namespace {

Volume as_volume(const Tensor& values) {
  Volume v;
  v.voxels = values;
  return v;
}

}  // namespace

CamVolume upsample_cam(const CamVolume& cam, const Extents3& shape) {
  return {resample_trilinear(as_volume(cam.values), shape).voxels, cam.target, cam.source_scan_id};
}

Volume cam_to_scan(const CamVolume& cam, const Volume& scan) {
  validate_volume(scan);
  Volume out = scan;
  out.voxels = upsample_cam(cam, scan.extents()).values;
  if (scan.laterality == Laterality::Left) out.voxels = mirror_x(out.voxels);
  return out;
}

std::array<std::uint8_t, 3> Image::pixel(std::size_t col, std::size_t row) const {
  if (col >= width || row >= height) throw InvalidArgument("pixel outside the image");
  const std::size_t o = 3 * (row * width + col);
  return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

Image render_overlay(const Volume& vol, const Tensor& cam, std::size_t axis, std::size_t slice, double alpha) {
  validate_volume(vol);
  if (cam.shape() != vol.voxels.shape()) {
    throw InvalidArgument("CAM " + shape_string(cam.shape()) + " must match the scan " + shape_string(vol.voxels.shape()));
  }
  if (axis > 2) throw InvalidArgument("slice axis must be 0, 1 or 2");
  const Extents3 e = vol.extents();
  if (slice >= e[axis]) {
    throw InvalidArgument("slice " + std::to_string(slice) + " out of range for axis " + std::to_string(axis) +
                          " with extent " + std::to_string(e[axis]));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");

  const auto [vlo, vhi] = std::minmax_element(vol.voxels.data().begin(), vol.voxels.data().end());
  const double gray_lo = *vlo, gray_range = static_cast<double>(*vhi) - *vlo;
  double heat_lo = std::numeric_limits<double>::infinity(), heat_hi = 0.0;
  for (float c : cam.data()) {
    const double v = std::max(0.0, static_cast<double>(c));
    heat_lo = std::min(heat_lo, v);
    heat_hi = std::max(heat_hi, v);
  }
  const double heat_range = heat_hi - heat_lo;

  const std::size_t ua = axis == 0 ? 1 : 0;
  const std::size_t va = axis == 2 ? 1 : 2;
  Image img;
  img.width = e[ua];
  img.height = e[va];
  img.rgb.resize(3 * img.width * img.height);
  for (std::size_t row = 0; row < img.height; ++row) {
    for (std::size_t col = 0; col < img.width; ++col) {
      std::array<std::size_t, 3> idx{};
      idx[axis] = slice;
      idx[ua] = col;
      idx[va] = row;
      const std::size_t off = (idx[0] * e[1] + idx[1]) * e[2] + idx[2];
      const double gray = gray_range > 0.0 ? 255.0 * (vol.voxels[off] - gray_lo) / gray_range : 0.0;
      const double h = heat_range > 0.0 ? (std::max(0.0, static_cast<double>(cam[off])) - heat_lo) / heat_range : 0.0;
      const double a = alpha * h;
      const auto to_byte = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
      const std::size_t o = 3 * (row * img.width + col);
      img.rgb[o] = to_byte((1.0 - a) * gray + a * 255.0);
      img.rgb[o + 1] = to_byte((1.0 - a) * gray);
      img.rgb[o + 2] = to_byte((1.0 - a) * gray);
    }
  }
  return img;
}

store::Bytes encode_ppm(const Image& img) {
  if (img.width == 0 || img.height == 0 || img.rgb.size() != 3 * img.width * img.height) {
    throw InvalidArgument("image buffer does not match its dimensions");
  }
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  store::Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

void write_ppm(const Image& img, const std::filesystem::path& path) { store::write_file(path, encode_ppm(img)); }

}  // namespace volreg::cam
