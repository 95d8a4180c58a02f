#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "volreg/common.hpp"

namespace volreg {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array, last axis fastest. A default-constructed tensor is
/// empty (no shape, no data); every other tensor has extents >= 1.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_product(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (shape_product(shape_) != data_.size()) {
      throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
  }

  template <class U>
  static BasicTensor cast_from(const BasicTensor<U>& other) {
    std::vector<T> data(other.data().begin(), other.data().end());
    if (other.empty()) return {};
    return BasicTensor(other.shape(), std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <class... Idx>
  T& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const BasicTensor&) const = default;

 private:
  void validate_shape() const {
    for (std::size_t e : shape_) {
      if (e == 0) throw InvalidArgument("tensor extents must be >= 1, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

enum class Laterality : std::uint8_t { Right = 0, Left = 1 };
enum class Region : std::uint8_t { ONH = 0, Macula = 1 };

std::string to_string(Laterality l);
std::string to_string(Region r);
Laterality parse_laterality(const std::string& s);
Region parse_region(const std::string& s);

using Extents3 = std::array<std::size_t, 3>;

/// A scan: rank-3 voxel grid indexed (x, y, z) with z fastest. x runs
/// temporal to nasal in right-eye orientation, z is depth.
struct Volume {
  Tensor voxels;
  std::array<float, 3> spacing_mm{1.0f, 1.0f, 1.0f};  // 32-bit, as stored on disk
  Laterality laterality = Laterality::Right;
  Region region = Region::ONH;
  std::string scan_id;
  std::string patient_id;

  Extents3 extents() const { return {voxels.extent(0), voxels.extent(1), voxels.extent(2)}; }
  bool operator==(const Volume&) const = default;
};

/// Throws unless the volume is rank 3 with positive spacing.
void validate_volume(const Volume& vol);

/// Corner-aligned trilinear resampling: target index i samples source
/// coordinate i*(S-1)/(T-1), or the centre (S-1)/2 when T == 1. Spacing is
/// rescaled so that extent*spacing is preserved. No anti-alias prefilter.
Volume resample_trilinear(const Volume& vol, const Extents3& target);

/// Source coordinate sampled by target index i under the rule above.
double corner_aligned_coordinate(std::size_t i, std::size_t source_extent, std::size_t target_extent);

/// Left eyes are mirrored along x and relabelled Right; Right eyes pass through.
Volume flip_laterality(const Volume& vol);

/// Mirror of voxel data along x regardless of laterality.
Tensor mirror_x(const Tensor& voxels);

enum class ReduceKind { Mean, Sum, Max };

/// Reduces over the given axes; reduced extents are removed (a full reduction
/// yields shape {1}). Mean and sum accumulate in double.
template <class T>
BasicTensor<T> reduce(const BasicTensor<T>& t, std::vector<std::size_t> axes, ReduceKind kind);

/// Per-volume linear map of intensities to [0, 1]; constant volumes map to 0.
Tensor normalize_unit_range(const Tensor& t);

}  // namespace volreg
