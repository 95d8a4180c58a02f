#include <algorithm>
#include <cmath>
#include <numbers>

#include "volreg/rng.hpp"
#include "volreg/synth/phantom.hpp"

namespace volreg::synth {

std::string to_string(Diagnosis d) { return d == Diagnosis::Healthy ? "Healthy" : "POAG"; }

Diagnosis parse_diagnosis(const std::string& s) {
  if (s == "Healthy") return Diagnosis::Healthy;
  if (s == "POAG") return Diagnosis::POAG;
  throw InvalidArgument("unknown diagnosis '" + s + "'");
}

double grid_coordinate(std::size_t i, std::size_t grid) {
  return -kFieldHalfWidthMm + 2.0 * kFieldHalfWidthMm * static_cast<double>(i) / static_cast<double>(grid - 1);
}

namespace {

void check_grid(std::size_t grid) {
  if (grid < 2) throw InvalidArgument("en-face grid needs at least 2 points per side");
}

double defect_profile(double rho) {
  if (rho <= 0.5) return 1.0;
  if (rho >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (rho - 0.5) / 0.5));
}

}  // namespace

Tensor64 build_thickness_map(const EyeModel& m, std::size_t grid) {
  check_grid(grid);
  Tensor64 map({grid, grid});
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = grid_coordinate(i, grid);
    for (std::size_t j = 0; j < grid; ++j) {
      const double y = grid_coordinate(j, grid);
      const double theta = std::atan2(y, x);
      double t = m.base_thickness_um * (1.0 - m.modulation * std::cos(2.0 * theta)) * m.diffuse_factor;
      for (const Defect& d : m.defects) {
        const double rho = std::hypot(x - d.center_x_mm, y - d.center_y_mm) / d.radius_mm;
        t *= 1.0 - d.depth_fraction * defect_profile(rho);
      }
      map(i, j) = std::max(0.0, t);
    }
  }
  return map;
}

Tensor64 build_cup_depth_map(const EyeModel& m, std::size_t grid) {
  check_grid(grid);
  Tensor64 map({grid, grid});
  const double a = m.cdr_horizontal * m.disc_radius_mm;
  const double b = m.cdr_vertical * m.disc_radius_mm;
  if (a <= 0.0 || b <= 0.0) return map;
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = grid_coordinate(i, grid) / a;
    for (std::size_t j = 0; j < grid; ++j) {
      const double y = grid_coordinate(j, grid) / b;
      map(i, j) = m.cup_depth_mm * std::max(0.0, 1.0 - x * x - y * y);
    }
  }
  return map;
}

void rebuild_maps(ScanTruth& t, std::size_t grid) {
  t.thickness_map = build_thickness_map(t.model, grid);
  t.cup_depth_map = build_cup_depth_map(t.model, grid);
}

double sample_map(const Tensor64& map, double x_mm, double y_mm) {
  const std::size_t n = map.extent(0);
  const double scale = static_cast<double>(n - 1) / (2.0 * kFieldHalfWidthMm);
  const double u = std::clamp((x_mm + kFieldHalfWidthMm) * scale, 0.0, static_cast<double>(n - 1));
  const double v = std::clamp((y_mm + kFieldHalfWidthMm) * scale, 0.0, static_cast<double>(n - 1));
  const std::size_t i0 = std::min(static_cast<std::size_t>(u), n - 2);
  const std::size_t j0 = std::min(static_cast<std::size_t>(v), n - 2);
  const double fu = u - static_cast<double>(i0);
  const double fv = v - static_cast<double>(j0);
  const double a = map(i0, j0) + fv * (map(i0, j0 + 1) - map(i0, j0));
  const double b = map(i0 + 1, j0) + fv * (map(i0 + 1, j0 + 1) - map(i0 + 1, j0));
  return a + fu * (b - a);
}

bool qc_filter(const ScanRecord& rec) {
  const VftQuality& q = rec.quality;
  return q.pupil_mm >= 2.5 && q.fixation_loss <= 0.20 && q.false_pos <= 0.20 && q.false_neg <= 0.20;
}

double sensitivity(double thickness_um) {
  return std::pow(std::clamp(thickness_um / kNominalThicknessUm, 0.0, 1.0), 0.7);
}

Labels truth_to_labels(const ScanTruth& t, const LabelOptions& opts) {
  const Tensor64& map = t.thickness_map;
  if (map.rank() != 2 || map.extent(0) != map.extent(1)) throw InvalidArgument("thickness map must be square");
  const std::size_t n = map.extent(0);
  double sum_s = 0.0;
  double sum_log = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid_coordinate(i, n);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = grid_coordinate(j, n);
      if (std::hypot(x, y) < t.model.disc_radius_mm) continue;
      const double s = sensitivity(map(i, j));
      sum_s += s;
      sum_log += 10.0 * std::log10(s + 0.01);
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("visual field has no points outside the disc");
  Labels out;
  out.vfi = std::clamp(100.0 * sum_s / static_cast<double>(count), 0.0, 100.0);
  double md = 1.6 * sum_log / static_cast<double>(count) + 0.5;
  if (opts.md_noise_sd > 0.0) {
    Rng rng(t.label_seed);
    md += opts.md_noise_sd * rng.normal();
  }
  out.md = std::clamp(md, -35.0, 5.0);
  return out;
}

FeatureOptions FeatureOptions::noiseless() {
  FeatureOptions o;
  o.thickness_noise_um = 0.0;
  o.area_noise_mm2 = 0.0;
  o.ratio_noise = 0.0;
  o.volume_noise_mm3 = 0.0;
  return o;
}

double clock_hour_angle_deg(int hour) {
  if (hour < 1 || hour > 12) throw InvalidArgument("clock hour must be in 1..12");
  return 90.0 - 30.0 * hour;
}

regress::FeatureRow truth_to_features(const ScanTruth& t, const FeatureOptions& opts) {
  constexpr int kRadii = 6;
  constexpr int kAngles = 15;
  const Tensor64& thick = t.thickness_map;
  const Tensor64& cup = t.cup_depth_map;
  if (thick.rank() != 2 || cup.shape() != thick.shape()) throw InvalidArgument("truth maps must share one square grid");

  std::array<double, 12> clock{};
  for (int h = 1; h <= 12; ++h) {
    const double centre = clock_hour_angle_deg(h) * std::numbers::pi / 180.0;
    double sum = 0.0;
    for (int a = 0; a < kAngles; ++a) {
      const double phi = centre + (std::numbers::pi / 6.0) * ((a + 0.5) / kAngles - 0.5);
      for (int r = 0; r < kRadii; ++r) {
        const double rad = opts.annulus_inner_mm + (opts.annulus_outer_mm - opts.annulus_inner_mm) * (r + 0.5) / kRadii;
        sum += sample_map(thick, rad * std::cos(phi), rad * std::sin(phi));
      }
    }
    clock[h - 1] = sum / (kRadii * kAngles);
  }
  const auto quadrant = [&](int a, int b, int c) { return (clock[a - 1] + clock[b - 1] + clock[c - 1]) / 3.0; };
  double avg = 0.0;
  for (double c : clock) avg += c;
  avg /= 12.0;

  const std::size_t n = cup.extent(0);
  const double h = 2.0 * kFieldHalfWidthMm / static_cast<double>(n - 1);
  double cup_area = 0.0;
  double cup_volume = 0.0;
  for (double d : cup.data()) {
    if (d > 0.0) {
      cup_area += h * h;
      cup_volume += d * h * h;
    }
  }
  const double rd = t.model.disc_radius_mm;
  const double disc_area = std::numbers::pi * rd * rd;
  cup_area = std::min(cup_area, disc_area);
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (double y = -rd; y <= rd; y += 0.005) {
    if (sample_map(cup, 0.0, y) > 0.0) {
      if (!any) lo = y;
      hi = y;
      any = true;
    }
  }
  const double cdr_vertical = any && rd > 0.0 ? (hi - lo) / (2.0 * rd) : 0.0;
  const double cdr_avg = disc_area > 0.0 ? std::sqrt(cup_area / disc_area) : 0.0;

  std::array<double, regress::kFeatureCount> v{};
  std::copy(clock.begin(), clock.end(), v.begin());
  v[12] = quadrant(11, 12, 1);
  v[13] = quadrant(5, 6, 7);
  v[14] = quadrant(2, 3, 4);
  v[15] = quadrant(8, 9, 10);
  v[16] = avg;
  v[17] = disc_area - cup_area;
  v[18] = disc_area;
  v[19] = cdr_avg;
  v[20] = cdr_vertical;
  v[21] = cup_volume;

  Rng rng(t.feature_seed);
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double sd = k <= 16   ? opts.thickness_noise_um
                      : k <= 18 ? opts.area_noise_mm2
                      : k <= 20 ? opts.ratio_noise
                                : opts.volume_noise_mm3;
    const double noise = rng.normal();
    v[k] = std::max(0.0, v[k] + sd * noise);
  }
  v[19] = std::min(v[19], 1.5);
  v[20] = std::min(v[20], 1.5);
  return {t.scan_id, v};
}

}  // namespace volreg::synth
