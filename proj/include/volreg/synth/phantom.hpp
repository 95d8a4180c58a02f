#pragma once

// Synthetic eyes with a known structure-function link. Every en-face map is
// stored in right-eye orientation on a square grid spanning [-3, 3] mm in
// both directions: axis 0 is x (temporal to nasal), axis 1 is y (inferior to
// superior), and grid point i sits at -3 + 6 i / (n - 1). Polar angles are
// measured from +x towards superior.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "volreg/regress/features.hpp"
#include "volreg/store/table.hpp"
#include "volreg/tensor.hpp"

namespace volreg::synth {

inline constexpr double kFieldHalfWidthMm = 3.0;
inline constexpr double kNominalThicknessUm = 100.0;

enum class Diagnosis { Healthy, POAG };

std::string to_string(Diagnosis d);
Diagnosis parse_diagnosis(const std::string& s);

/// Focal RNFL loss. Inside half the radius the thickness is scaled by
/// (1 - depth_fraction); a cosine taper restores it at the full radius.
struct Defect {
  double center_x_mm = 0.0;
  double center_y_mm = 0.0;
  double radius_mm = 1.0;
  double depth_fraction = 1.0;
};

/// Parameters from which the en-face maps are built.
struct EyeModel {
  double base_thickness_um = 125.0;
  double modulation = 0.1;      // amplitude of the cos(2 theta) double hump
  double diffuse_factor = 1.0;  // global multiplicative loss
  std::vector<Defect> defects;
  double disc_radius_mm = 0.9;
  double cdr_horizontal = 0.3;  // cup semi-axes relative to the disc radius
  double cdr_vertical = 0.35;
  double cup_depth_mm = 0.3;
};

struct ScanTruth {
  std::string scan_id;
  std::string patient_id;
  Laterality eye = Laterality::Right;
  Region region = Region::ONH;
  Diagnosis diagnosis = Diagnosis::Healthy;
  double severity = 0.0;
  EyeModel model;
  Tensor64 thickness_map;  // RNFL thickness in um, [n, n]
  Tensor64 cup_depth_map;  // cup depression below the disc surface in mm, [n, n]
  std::uint64_t render_seed = 0;
  std::uint64_t feature_seed = 0;
  std::uint64_t label_seed = 0;
};

Tensor64 build_thickness_map(const EyeModel& m, std::size_t grid);
Tensor64 build_cup_depth_map(const EyeModel& m, std::size_t grid);
/// Rebuilds both maps of the truth from its model.
void rebuild_maps(ScanTruth& t, std::size_t grid);

/// Bilinear lookup in millimetres; positions outside the field are clamped.
double sample_map(const Tensor64& map, double x_mm, double y_mm);
double grid_coordinate(std::size_t i, std::size_t grid);

struct VftQuality {
  double pupil_mm = 4.0;
  double fixation_loss = 0.0;
  double false_pos = 0.0;
  double false_neg = 0.0;

  bool operator==(const VftQuality&) const = default;
};

struct ScanRecord {
  std::string scan_id;
  std::string patient_id;
  Laterality eye = Laterality::Right;
  Region region = Region::ONH;
  double vfi = 100.0;
  double md = 0.0;
  Diagnosis diagnosis = Diagnosis::Healthy;
  VftQuality quality;

  bool operator==(const ScanRecord&) const = default;
};

/// Visual-field reliability: pupil >= 2.5 mm and fixation loss, false
/// positive and false negative rates all <= 0.20.
bool qc_filter(const ScanRecord& rec);

// ---- labels ----

/// s(t) = clamp(t / 100, 0, 1)^0.7
double sensitivity(double thickness_um);

struct LabelOptions {
  double md_noise_sd = 0.8;  // 0 disables the label noise
};

struct Labels {
  double vfi = 0.0;
  double md = 0.0;
};

/// VFI is 100 times the mean sensitivity over grid points outside the disc.
/// MD is 1.6 * mean(10 log10(s + 0.01)) + 0.5 plus Gaussian noise drawn from
/// label_seed, clipped to [-35, 5].
Labels truth_to_labels(const ScanTruth& t, const LabelOptions& opts = {});

// ---- features ----

struct FeatureOptions {
  double thickness_noise_um = 2.0;
  double area_noise_mm2 = 0.03;
  double ratio_noise = 0.02;
  double volume_noise_mm3 = 0.01;
  double annulus_inner_mm = 1.4;
  double annulus_outer_mm = 2.1;

  static FeatureOptions noiseless();
};

/// Clock hour h (1..12) is centred at 90 - 30 h degrees. Quadrants group
/// S = {11, 12, 1}, N = {2, 3, 4}, I = {5, 6, 7}, T = {8, 9, 10}.
double clock_hour_angle_deg(int hour);

regress::FeatureRow truth_to_features(const ScanTruth& t, const FeatureOptions& opts = {});

// ---- rendering ----

struct RenderOptions {
  Extents3 shape{64, 64, 128};
  double depth_mm = 2.0;
  double speckle_sd = 0.25;  // 0 renders noise free
  std::size_t supersample = 2;
};

/// Layered intensity phantom with partial-volume integration in depth.
/// Left eyes are rendered in right-eye orientation and then mirrored in x.
Volume render_volume(const ScanTruth& t, const RenderOptions& opts = {});

/// Depths (mm) of the layer boundaries at an en-face position, from the
/// retinal surface down to the bottom of the choroid.
std::vector<double> layer_boundaries(const ScanTruth& t, double x_mm, double y_mm);

// ---- cohorts ----

struct CohortOptions {
  std::size_t n_patients = 100;
  double healthy_fraction = 0.12;
  std::uint64_t seed = 1;
  std::size_t grid = 64;
  double second_eye_probability = 0.8;
  std::vector<Region> regions{Region::ONH, Region::Macula};
  LabelOptions labels;
};

struct ScanCase {
  ScanTruth truth;
  ScanRecord record;
};

/// Patients P0001.. with one or two eyes, one scan per requested region.
/// Scans of the same eye share the eye model, labels and test quality.
std::vector<ScanCase> generate_cohort(const CohortOptions& opts);

// ---- tables ----

const store::Schema& record_schema();
store::Table records_to_table(std::span<const ScanRecord> rows);
std::vector<ScanRecord> records_from_table(const store::Table& t);
void write_records(std::span<const ScanRecord> rows, const std::filesystem::path& path);
std::vector<ScanRecord> read_records(const std::filesystem::path& path);

}  // namespace volreg::synth
