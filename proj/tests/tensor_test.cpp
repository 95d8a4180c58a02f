#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "volreg/rng.hpp"
#include "volreg/tensor.hpp"

using namespace volreg;

namespace {

Volume make_volume(Extents3 e, std::vector<float> data) {
  Volume v;
  v.voxels = Tensor({e[0], e[1], e[2]}, std::move(data));
  v.spacing_mm = {0.5f, 0.25f, 2.0f};
  v.scan_id = "S1";
  v.patient_id = "P1";
  return v;
}

Volume random_volume(Extents3 e, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> d(e[0] * e[1] * e[2]);
  for (auto& x : d) x = static_cast<float>(rng.uniform(-3, 3));
  return make_volume(e, std::move(d));
}

// Scalar trilinear interpolation written independently of the library: the
// sample at continuous source coordinates (cx, cy, cz) with edge clamping.
double trilinear_oracle(const Tensor& t, double cx, double cy, double cz) {
  const auto lerp_axis = [](double c, std::size_t n, std::size_t& i0, std::size_t& i1) {
    i0 = static_cast<std::size_t>(std::floor(c));
    if (i0 > n - 1) i0 = n - 1;
    i1 = i0 + 1 < n ? i0 + 1 : i0;
    return c - static_cast<double>(i0);
  };
  std::size_t x0, x1, y0, y1, z0, z1;
  const double fx = lerp_axis(cx, t.extent(0), x0, x1);
  const double fy = lerp_axis(cy, t.extent(1), y0, y1);
  const double fz = lerp_axis(cz, t.extent(2), z0, z1);
  double acc = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy) * (c ? fz : 1 - fz);
        acc += w * t(a ? x1 : x0, b ? y1 : y0, c ? z1 : z0);
      }
  return acc;
}

double source_coord(std::size_t i, std::size_t s, std::size_t t) {
  return t == 1 ? (s - 1) / 2.0 : static_cast<double>(i) * (s - 1) / static_cast<double>(t - 1);
}

}  // namespace

TEST(TensorShape, ProductMatchesDataLength) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(shape_product(t.shape()), t.size());
  EXPECT_THROW(Tensor({2, 0, 4}), InvalidArgument);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), InvalidArgument);
}

TEST(TensorShape, RowMajorLastAxisFastest) {
  Tensor t({2, 3});
  t(1, 2) = 7.0f;
  EXPECT_EQ(t[5], 7.0f);
  t(0, 1) = 3.0f;
  EXPECT_EQ(t[1], 3.0f);
}

TEST(Resample, IdentityShapeIsBitIdentical) {
  const Volume v = random_volume({5, 4, 7}, 11);
  const Volume r = resample_trilinear(v, v.extents());
  EXPECT_EQ(r.voxels, v.voxels);
  EXPECT_EQ(r.spacing_mm, v.spacing_mm);
}

TEST(Resample, ConstantStaysConstant) {
  const Volume v = make_volume({3, 4, 5}, std::vector<float>(60, 5.0f));
  for (Extents3 e : {Extents3{1, 1, 1}, Extents3{7, 2, 9}, Extents3{6, 8, 10}}) {
    const Volume r = resample_trilinear(v, e);
    for (float x : r.voxels.data()) EXPECT_EQ(x, 5.0f);
  }
}

TEST(Resample, RampDownsampleMatchesScalarOracle) {
  const Volume v = make_volume({4, 1, 1}, {0, 1, 2, 3});
  const Volume r = resample_trilinear(v, {2, 1, 1});
  ASSERT_EQ(r.voxels.shape(), (Shape{2, 1, 1}));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(r.voxels(i, 0, 0), trilinear_oracle(v.voxels, source_coord(i, 4, 2), 0, 0));
  }
  EXPECT_FLOAT_EQ(r.voxels(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(r.voxels(1, 0, 0), 3.0f);
}

TEST(Resample, RandomCasesMatchScalarOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Extents3 src{1 + rng.index(6), 1 + rng.index(6), 1 + rng.index(6)};
    const Extents3 dst{1 + rng.index(8), 1 + rng.index(8), 1 + rng.index(8)};
    const Volume v = random_volume(src, 100 + trial);
    const Volume r = resample_trilinear(v, dst);
    for (std::size_t i = 0; i < dst[0]; ++i)
      for (std::size_t j = 0; j < dst[1]; ++j)
        for (std::size_t k = 0; k < dst[2]; ++k) {
          const double expect = trilinear_oracle(v.voxels, source_coord(i, src[0], dst[0]),
                                                 source_coord(j, src[1], dst[1]), source_coord(k, src[2], dst[2]));
          EXPECT_NEAR(r.voxels(i, j, k), expect, 1e-5);
        }
  }
}

TEST(Resample, ExactOnTrilinearFunctions) {
  const Extents3 src{6, 5, 9};
  const double a = 1.5, b = -0.25, c = 0.75, d = 2.0;
  std::vector<float> data;
  for (std::size_t i = 0; i < src[0]; ++i)
    for (std::size_t j = 0; j < src[1]; ++j)
      for (std::size_t k = 0; k < src[2]; ++k) data.push_back(static_cast<float>(a + b * i + c * j + d * k));
  const Volume v = make_volume(src, data);
  const Extents3 dst{11, 3, 17};
  const Volume r = resample_trilinear(v, dst);
  for (std::size_t i = 0; i < dst[0]; ++i)
    for (std::size_t j = 0; j < dst[1]; ++j)
      for (std::size_t k = 0; k < dst[2]; ++k) {
        const double f = a + b * source_coord(i, src[0], dst[0]) + c * source_coord(j, src[1], dst[1]) +
                         d * source_coord(k, src[2], dst[2]);
        EXPECT_LE(std::abs(r.voxels(i, j, k) - f), 1e-5 * std::max(1.0, std::abs(f)));
      }
}

TEST(Resample, SpacingPreservesPhysicalExtentAndCopiesTags) {
  Volume v = random_volume({8, 4, 16}, 3);
  v.laterality = Laterality::Left;
  v.region = Region::Macula;
  const Volume r = resample_trilinear(v, {4, 8, 4});
  EXPECT_FLOAT_EQ(r.spacing_mm[0] * 4, v.spacing_mm[0] * 8);
  EXPECT_FLOAT_EQ(r.spacing_mm[1] * 8, v.spacing_mm[1] * 4);
  EXPECT_FLOAT_EQ(r.spacing_mm[2] * 4, v.spacing_mm[2] * 16);
  EXPECT_EQ(r.laterality, Laterality::Left);
  EXPECT_EQ(r.region, Region::Macula);
  EXPECT_EQ(r.scan_id, "S1");
  EXPECT_EQ(r.patient_id, "P1");
}

TEST(Resample, ZeroExtentIsRejected) {
  const Volume v = random_volume({2, 2, 2}, 1);
  EXPECT_THROW(resample_trilinear(v, {0, 2, 2}), InvalidArgument);
}

TEST(Flip, RightEyeUnchanged) {
  const Volume v = random_volume({3, 2, 2}, 7);
  EXPECT_EQ(flip_laterality(v), v);
}

TEST(Flip, LeftTwoVoxelsSwap) {
  Volume v = make_volume({2, 1, 1}, {1.0f, 2.0f});
  v.laterality = Laterality::Left;
  const Volume f = flip_laterality(v);
  EXPECT_EQ(f.laterality, Laterality::Right);
  EXPECT_EQ(f.voxels[0], 2.0f);
  EXPECT_EQ(f.voxels[1], 1.0f);
}

TEST(Flip, SecondCallIsNoOp) {
  Volume v = random_volume({4, 3, 2}, 9);
  v.laterality = Laterality::Left;
  const Volume once = flip_laterality(v);
  EXPECT_EQ(flip_laterality(once), once);
  EXPECT_NE(once.voxels, v.voxels);
}

TEST(Flip, MirrorPreservesMultisetAndIsInvolution) {
  const Volume v = random_volume({5, 3, 4}, 13);
  const Tensor m = mirror_x(v.voxels);
  EXPECT_EQ(mirror_x(m), v.voxels);
  std::vector<float> a(v.voxels.data().begin(), v.voxels.data().end()), b(m.data().begin(), m.data().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Reduce, MeanOverAllAxes) {
  const Tensor t({4}, {1, 2, 3, 4});
  EXPECT_FLOAT_EQ(reduce(t, {0}, ReduceKind::Mean)[0], 2.5f);
}

TEST(Reduce, SumOverFirstAxis) {
  const Tensor t({2, 2}, {1, 2, 3, 4});
  const Tensor s = reduce(t, {0}, ReduceKind::Sum);
  EXPECT_EQ(s.shape(), (Shape{2}));
  EXPECT_EQ(s[0], 4.0f);
  EXPECT_EQ(s[1], 6.0f);
}

TEST(Reduce, MaxOfEqualValues) {
  const Tensor t({3, 2}, 1.25f);
  EXPECT_EQ(reduce(t, {0, 1}, ReduceKind::Max)[0], 1.25f);
}

TEST(Reduce, EmptyAxesCopyAndInvalidAxisThrows) {
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(reduce(t, {}, ReduceKind::Sum), t);
  EXPECT_THROW(reduce(t, {2}, ReduceKind::Sum), InvalidArgument);
}

TEST(Reduce, MiddleAxisKeepsOrder) {
  Tensor t({2, 3, 2});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  const Tensor s = reduce(t, {1}, ReduceKind::Max);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s(0, 0), 4.0f);
  EXPECT_EQ(s(1, 1), 11.0f);
}

TEST(Reduce, MeanIsPermutationInvariant) {
  Rng rng(21);
  std::vector<double> d(10007);
  for (auto& x : d) x = rng.uniform(-1e3, 1e3) * std::pow(10.0, rng.uniform(-3, 3));
  const Tensor64 t({d.size()}, d);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(d);
    const Tensor64 p({d.size()}, d);
    EXPECT_NEAR(reduce(p, {0}, ReduceKind::Mean)[0], reduce(t, {0}, ReduceKind::Mean)[0], 1e-9);
  }
}

TEST(Normalize, MapsToUnitRange) {
  const Tensor t({4}, {2, 4, 6, 10});
  const Tensor n = normalize_unit_range(t);
  EXPECT_FLOAT_EQ(n[0], 0.0f);
  EXPECT_FLOAT_EQ(n[1], 0.25f);
  EXPECT_FLOAT_EQ(n[3], 1.0f);
  EXPECT_EQ(normalize_unit_range(Tensor({3}, 7.0f)), Tensor({3}, 0.0f));
}
