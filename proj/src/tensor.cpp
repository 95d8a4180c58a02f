#include "volreg/tensor.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace volreg {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string to_string(Laterality l) { return l == Laterality::Left ? "L" : "R"; }
std::string to_string(Region r) { return r == Region::ONH ? "ONH" : "Macula"; }

Laterality parse_laterality(const std::string& s) {
  if (s == "L" || s == "Left" || s == "left" || s == "OS") return Laterality::Left;
  if (s == "R" || s == "Right" || s == "right" || s == "OD") return Laterality::Right;
  throw InvalidArgument("unknown laterality '" + s + "'");
}

Region parse_region(const std::string& s) {
  if (s == "ONH" || s == "onh") return Region::ONH;
  if (s == "Macula" || s == "macula" || s == "MAC" || s == "mac") return Region::Macula;
  throw InvalidArgument("unknown region '" + s + "'");
}

void validate_volume(const Volume& vol) {
  if (vol.voxels.rank() != 3) throw InvalidArgument("volume voxels must be rank 3, got " + shape_string(vol.voxels.shape()));
  for (double s : vol.spacing_mm) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("volume spacing must be positive");
  }
}

double corner_aligned_coordinate(std::size_t i, std::size_t source_extent, std::size_t target_extent) {
  if (target_extent == 1) return (static_cast<double>(source_extent) - 1.0) / 2.0;
  return static_cast<double>(i) * (static_cast<double>(source_extent) - 1.0) /
         (static_cast<double>(target_extent) - 1.0);
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;
  std::vector<double> w_hi;
};

AxisTaps axis_taps(std::size_t source, std::size_t target) {
  AxisTaps taps;
  taps.lo.resize(target);
  taps.hi.resize(target);
  taps.w_hi.resize(target);
  for (std::size_t i = 0; i < target; ++i) {
    const double c = corner_aligned_coordinate(i, source, target);
    auto lo = static_cast<std::size_t>(std::floor(c));
    if (lo >= source) lo = source - 1;
    const std::size_t hi = std::min(lo + 1, source - 1);
    taps.lo[i] = lo;
    taps.hi[i] = hi;
    taps.w_hi[i] = c - static_cast<double>(lo);
  }
  return taps;
}

}  // namespace

Volume resample_trilinear(const Volume& vol, const Extents3& target) {
  validate_volume(vol);
  for (std::size_t e : target) {
    if (e == 0) throw InvalidArgument("resample target extents must be >= 1");
  }
  const Extents3 src = vol.extents();
  const AxisTaps tx = axis_taps(src[0], target[0]);
  const AxisTaps ty = axis_taps(src[1], target[1]);
  const AxisTaps tz = axis_taps(src[2], target[2]);

  Volume out;
  out.voxels = Tensor({target[0], target[1], target[2]});
  for (int a = 0; a < 3; ++a) {
    out.spacing_mm[a] = static_cast<float>(vol.spacing_mm[a] * static_cast<double>(src[a]) / static_cast<double>(target[a]));
  }
  out.laterality = vol.laterality;
  out.region = vol.region;
  out.scan_id = vol.scan_id;
  out.patient_id = vol.patient_id;

  const float* in = vol.voxels.raw();
  float* dst = out.voxels.raw();
  const std::size_t sy = src[2];
  const std::size_t sx = src[1] * src[2];
  parallel_for(target[0], [&](std::size_t i) {
    const double wx1 = tx.w_hi[i], wx0 = 1.0 - wx1;
    for (std::size_t j = 0; j < target[1]; ++j) {
      const double wy1 = ty.w_hi[j], wy0 = 1.0 - wy1;
      const float* p00 = in + tx.lo[i] * sx + ty.lo[j] * sy;
      const float* p01 = in + tx.lo[i] * sx + ty.hi[j] * sy;
      const float* p10 = in + tx.hi[i] * sx + ty.lo[j] * sy;
      const float* p11 = in + tx.hi[i] * sx + ty.hi[j] * sy;
      float* row = dst + (i * target[1] + j) * target[2];
      for (std::size_t k = 0; k < target[2]; ++k) {
        const std::size_t z0 = tz.lo[k], z1 = tz.hi[k];
        const double wz1 = tz.w_hi[k], wz0 = 1.0 - wz1;
        const double c00 = p00[z0] * wz0 + p00[z1] * wz1;
        const double c01 = p01[z0] * wz0 + p01[z1] * wz1;
        const double c10 = p10[z0] * wz0 + p10[z1] * wz1;
        const double c11 = p11[z0] * wz0 + p11[z1] * wz1;
        const double c0 = c00 * wy0 + c01 * wy1;
        const double c1 = c10 * wy0 + c11 * wy1;
        row[k] = static_cast<float>(c0 * wx0 + c1 * wx1);
      }
    }
  });
  return out;
}

Tensor mirror_x(const Tensor& voxels) {
  if (voxels.rank() != 3) throw InvalidArgument("mirror_x expects a rank-3 tensor");
  const std::size_t nx = voxels.extent(0);
  const std::size_t plane = voxels.extent(1) * voxels.extent(2);
  Tensor out(voxels.shape());
  for (std::size_t x = 0; x < nx; ++x) {
    std::copy_n(voxels.raw() + x * plane, plane, out.raw() + (nx - 1 - x) * plane);
  }
  return out;
}

Volume flip_laterality(const Volume& vol) {
  if (vol.laterality == Laterality::Right) return vol;
  Volume out = vol;
  out.voxels = mirror_x(vol.voxels);
  out.laterality = Laterality::Right;
  return out;
}

template <class T>
BasicTensor<T> reduce(const BasicTensor<T>& t, std::vector<std::size_t> axes, ReduceKind kind) {
  std::set<std::size_t> axis_set;
  for (std::size_t a : axes) {
    if (a >= t.rank()) {
      throw InvalidArgument("reduce axis " + std::to_string(a) + " invalid for rank " + std::to_string(t.rank()));
    }
    axis_set.insert(a);
  }
  if (axis_set.empty()) return t;

  Shape out_shape;
  for (std::size_t a = 0; a < t.rank(); ++a) {
    if (!axis_set.count(a)) out_shape.push_back(t.extent(a));
  }
  const bool full = out_shape.empty();
  const std::size_t out_size = full ? 1 : shape_product(out_shape);

  std::vector<double> acc(out_size, kind == ReduceKind::Max ? -std::numeric_limits<double>::infinity() : 0.0);
  std::vector<std::size_t> idx(t.rank(), 0);
  const auto& shape = t.shape();
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t a = 0; a < t.rank(); ++a) {
      if (!axis_set.count(a)) o = o * shape[a] + idx[a];
    }
    const double v = static_cast<double>(t[flat]);
    if (kind == ReduceKind::Max) {
      acc[o] = std::max(acc[o], v);
    } else {
      acc[o] += v;
    }
    for (std::size_t a = t.rank(); a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  const double count = static_cast<double>(t.size() / out_size);
  std::vector<T> data(out_size);
  for (std::size_t i = 0; i < out_size; ++i) {
    data[i] = static_cast<T>(kind == ReduceKind::Mean ? acc[i] / count : acc[i]);
  }
  return BasicTensor<T>(full ? Shape{1} : out_shape, std::move(data));
}

template Tensor reduce<float>(const Tensor&, std::vector<std::size_t>, ReduceKind);
template Tensor64 reduce<double>(const Tensor64&, std::vector<std::size_t>, ReduceKind);

Tensor normalize_unit_range(const Tensor& t) {
  if (t.empty()) return t;
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  const double min = *lo, range = static_cast<double>(*hi) - *lo;
  Tensor out(t.shape(), 0.0f);
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>((t[i] - min) / range);
  return out;
}

}  // namespace volreg
