#include <algorithm>
#include <cmath>

#include "volreg/rng.hpp"
#include "volreg/synth/phantom.hpp"

namespace volreg::synth {

namespace {

constexpr double kSurfaceDepthMm = 0.5;
constexpr double kGciplUm = 70.0;
constexpr double kOuterRetinaUm = 150.0;
constexpr double kRpeUm = 30.0;
constexpr double kChoroidUm = 200.0;

// Intensity above the surface, of each layer between consecutive
// boundaries, and below the last boundary.
constexpr std::array<double, 7> kIntensity{0.05, 0.9, 0.5, 0.3, 1.0, 0.6, 0.1};

double gaussian(double r, double sigma) { return std::exp(-r * r / (2.0 * sigma * sigma)); }

// Integral of the piecewise-constant depth profile over [z0, z1].
double integrate(const std::array<double, 6>& b, double z0, double z1) {
  double total = 0.0;
  double lo = z0;
  for (std::size_t seg = 0; seg <= b.size() && lo < z1; ++seg) {
    const double end = seg < b.size() ? b[seg] : z1;
    const double hi = std::min(end, z1);
    if (hi > lo) {
      total += (hi - lo) * kIntensity[seg];
      lo = hi;
    }
  }
  return total;
}

std::array<double, 6> boundaries(const ScanTruth& t, double x, double y) {
  const double thick = sample_map(t.thickness_map, x, y);
  double surface = kSurfaceDepthMm;
  double rnfl_um = thick;
  double gcipl_um = kGciplUm;
  if (t.region == Region::ONH) {
    surface += sample_map(t.cup_depth_map, x, y);
  } else {
    const double r = std::hypot(x, y);
    surface += 0.15 * gaussian(r, 0.4);
    rnfl_um = 0.4 * thick * (1.0 - gaussian(r, 0.5));
    const double ratio = std::clamp(thick / (t.model.base_thickness_um > 0.0 ? t.model.base_thickness_um : 1.0), 0.0, 1.5);
    gcipl_um = kGciplUm * ratio * (1.0 - 0.85 * gaussian(r, 0.3));
  }
  std::array<double, 6> b{};
  b[0] = surface;
  b[1] = b[0] + rnfl_um * 1e-3;
  b[2] = b[1] + gcipl_um * 1e-3;
  b[3] = b[2] + kOuterRetinaUm * 1e-3;
  b[4] = b[3] + kRpeUm * 1e-3;
  b[5] = b[4] + kChoroidUm * 1e-3;
  return b;
}

}  // namespace

std::vector<double> layer_boundaries(const ScanTruth& t, double x_mm, double y_mm) {
  const auto b = boundaries(t, x_mm, y_mm);
  return {b.begin(), b.end()};
}

Volume render_volume(const ScanTruth& t, const RenderOptions& opts) {
  const auto [nx, ny, nz] = opts.shape;
  if (nx == 0 || ny == 0 || nz == 0) throw InvalidArgument("render shape extents must be >= 1");
  if (opts.supersample == 0) throw InvalidArgument("supersample must be >= 1");
  if (!(opts.depth_mm > 0.0)) throw InvalidArgument("render depth must be positive");
  if (t.thickness_map.rank() != 2 || t.cup_depth_map.shape() != t.thickness_map.shape()) {
    throw InvalidArgument("truth maps must share one square grid");
  }

  Volume vol;
  vol.voxels = Tensor({nx, ny, nz});
  const double width = 2.0 * kFieldHalfWidthMm;
  const double dx = width / static_cast<double>(nx);
  const double dy = width / static_cast<double>(ny);
  const double dz = opts.depth_mm / static_cast<double>(nz);
  const std::size_t ss = opts.supersample;
  const double weight = 1.0 / (static_cast<double>(ss * ss) * dz);

  parallel_for(nx, [&](std::size_t i) {
    Rng rng(derive_seed(t.render_seed, i));
    std::vector<double> column(nz);
    for (std::size_t j = 0; j < ny; ++j) {
      std::fill(column.begin(), column.end(), 0.0);
      for (std::size_t a = 0; a < ss; ++a) {
        const double x = -kFieldHalfWidthMm + (static_cast<double>(i) + (a + 0.5) / ss) * dx;
        for (std::size_t c = 0; c < ss; ++c) {
          const double y = -kFieldHalfWidthMm + (static_cast<double>(j) + (c + 0.5) / ss) * dy;
          const auto b = boundaries(t, x, y);
          for (std::size_t k = 0; k < nz; ++k) {
            column[k] += integrate(b, static_cast<double>(k) * dz, static_cast<double>(k + 1) * dz);
          }
        }
      }
      float* out = &vol.voxels(i, j, 0);
      for (std::size_t k = 0; k < nz; ++k) {
        double v = column[k] * weight;
        if (opts.speckle_sd > 0.0) v *= std::max(0.0, 1.0 + opts.speckle_sd * rng.normal());
        out[k] = static_cast<float>(v);
      }
    }
  });

  vol.spacing_mm = {static_cast<float>(dx), static_cast<float>(dy), static_cast<float>(dz)};
  vol.region = t.region;
  vol.scan_id = t.scan_id;
  vol.patient_id = t.patient_id;
  if (t.eye == Laterality::Left) {
    vol.voxels = mirror_x(vol.voxels);
    vol.laterality = Laterality::Left;
  }
  return vol;
}

}  // namespace volreg::synth
