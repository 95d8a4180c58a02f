#pragma once

// Class activation maps for the GAP + dense head: the head weights of one
// output applied voxelwise to the final feature maps. Because the head acts
// on spatial means, mean(CAM) + bias reproduces the pre-tanh output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "volreg/autonet/train.hpp"
#include "volreg/eval/results.hpp"
#include "volreg/store/binary.hpp"
#include "volreg/tensor.hpp"

namespace volreg::cam {

struct CamVolume {
  Tensor values;  // [x, y, z], signed
  eval::Target target = eval::Target::VFI;
  std::string source_scan_id;
};

/// Head output column of a target: VFI is 0, MD is 1.
std::size_t output_index(eval::Target target);

/// sum_k head_weight[k, output] * features[k, x, y, z] for [C, x, y, z] maps.
Tensor weighted_feature_sum(const Tensor& features, const Tensor& head_weight, std::size_t output);

/// CAM of an input already prepared for the network ([x, y, z]).
CamVolume compute_cam(const autonet::Checkpoint& ckpt, const Tensor& prepared, eval::Target target,
                      std::string scan_id = {});
/// Prepares the scan (mirror, resample, normalize) first.
CamVolume compute_cam(const autonet::Checkpoint& ckpt, const Volume& vol, eval::Target target);

/// Trilinear resample of the CAM values to another grid.
CamVolume upsample_cam(const CamVolume& cam, const Extents3& shape);

/// The CAM on the scan's own grid and orientation: upsampled to the scan
/// extents and mirrored back for left eyes. Spacing, ids and tags come from
/// the scan.
Volume cam_to_scan(const CamVolume& cam, const Volume& scan);

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> pixel(std::size_t col, std::size_t row) const;
};

/// One slice of the scan in gray (per-volume min-max) blended with the CAM in
/// red: h is max(cam, 0) min-max normalized over the whole CAM, and each pixel
/// is (1 - alpha h) gray + alpha h (255, 0, 0). The image plane spans the two
/// remaining axes in order: the first is the width, the second the height.
Image render_overlay(const Volume& vol, const Tensor& cam, std::size_t axis, std::size_t slice, double alpha);

/// Binary PPM (P6, maxval 255).
store::Bytes encode_ppm(const Image& img);
void write_ppm(const Image& img, const std::filesystem::path& path);

}  // namespace volreg::cam
