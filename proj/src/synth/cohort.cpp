#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "volreg/rng.hpp"
#include "volreg/synth/phantom.hpp"

namespace volreg::synth {

namespace {

std::string patient_name(std::size_t p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%04zu", p + 1);
  return buf;
}

EyeModel draw_eye(Rng& rng, bool healthy, double& severity) {
  EyeModel m;
  m.base_thickness_um = rng.uniform(115.0, 135.0);
  m.modulation = 0.1;
  m.disc_radius_mm = rng.uniform(0.8, 1.0);
  severity = 0.0;
  if (!healthy) {
    // Mostly mild damage with a uniform tail towards total loss.
    severity = rng.bernoulli(0.7) ? rng.uniform(0.0, 0.25) : rng.uniform(0.0, 1.0);
    const int count = 1 + static_cast<int>(rng.index(4));
    for (int k = 0; k < count; ++k) {
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double angle = (sign * 130.0 + rng.uniform(-25.0, 25.0)) * std::numbers::pi / 180.0;
      const double r = rng.uniform(1.2, 2.4);
      Defect d;
      d.center_x_mm = r * std::cos(angle);
      d.center_y_mm = r * std::sin(angle);
      d.radius_mm = 0.4 + 1.6 * severity * rng.uniform(0.7, 1.3);
      d.depth_fraction = std::clamp(0.35 + 0.65 * std::sqrt(severity) * rng.uniform(0.8, 1.2), 0.0, 1.0);
      m.defects.push_back(d);
    }
    m.diffuse_factor = std::max(0.0, 1.0 - severity * severity);
  }
  m.cdr_horizontal = std::min(0.95, rng.uniform(0.2, 0.45) + 0.4 * severity);
  m.cdr_vertical = std::min(0.98, m.cdr_horizontal * rng.uniform(1.05, 1.25));
  m.cup_depth_mm = 0.3 + 0.5 * severity;
  return m;
}

VftQuality draw_quality(Rng& rng) {
  VftQuality q;
  q.pupil_mm = std::clamp(rng.normal(4.0, 0.8), 1.0, 9.0);
  q.fixation_loss = rng.uniform(0.0, 0.21);
  q.false_pos = rng.uniform(0.0, 0.21);
  q.false_neg = rng.uniform(0.0, 0.21);
  return q;
}

std::vector<ScanCase> generate_patient(const CohortOptions& opts, std::size_t p) {
  const std::uint64_t pseed = derive_seed(opts.seed, p + 1);
  Rng prng(pseed);
  const bool healthy = prng.uniform() < opts.healthy_fraction;
  std::vector<Laterality> eyes;
  if (prng.bernoulli(opts.second_eye_probability)) {
    eyes = {Laterality::Right, Laterality::Left};
  } else {
    eyes = {prng.bernoulli(0.5) ? Laterality::Left : Laterality::Right};
  }
  const std::string pid = patient_name(p);
  std::vector<ScanCase> out;
  for (Laterality eye : eyes) {
    const std::uint64_t eseed = derive_seed(pseed, 100 + static_cast<std::uint64_t>(eye));
    Rng erng(eseed);
    ScanTruth base;
    base.patient_id = pid;
    base.eye = eye;
    base.diagnosis = healthy ? Diagnosis::Healthy : Diagnosis::POAG;
    base.model = draw_eye(erng, healthy, base.severity);
    base.feature_seed = derive_seed(eseed, 1);
    base.label_seed = derive_seed(eseed, 2);
    rebuild_maps(base, opts.grid);
    const VftQuality quality = draw_quality(erng);
    const Labels labels = truth_to_labels(base, opts.labels);
    for (Region region : opts.regions) {
      ScanCase c{base, {}};
      c.truth.region = region;
      c.truth.scan_id = pid + (eye == Laterality::Right ? "-OD-" : "-OS-") + (region == Region::ONH ? "ONH" : "MAC");
      c.truth.render_seed = derive_seed(eseed, 10 + static_cast<std::uint64_t>(region));
      c.record = {c.truth.scan_id, pid, eye, region, labels.vfi, labels.md, base.diagnosis, quality};
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace

std::vector<ScanCase> generate_cohort(const CohortOptions& opts) {
  if (opts.n_patients == 0) throw InvalidArgument("cohort needs at least one patient");
  if (!(opts.healthy_fraction >= 0.0 && opts.healthy_fraction <= 1.0)) {
    throw InvalidArgument("healthy_fraction must lie in [0, 1]");
  }
  if (opts.regions.empty()) throw InvalidArgument("cohort needs at least one region");
  std::vector<std::vector<ScanCase>> per_patient(opts.n_patients);
  parallel_for(opts.n_patients, [&](std::size_t p) { per_patient[p] = generate_patient(opts, p); });
  std::vector<ScanCase> out;
  for (auto& cases : per_patient) {
    for (auto& c : cases) out.push_back(std::move(c));
  }
  return out;
}

const store::Schema& record_schema() {
  using store::CellKind;
  static const store::Schema schema = {
      {"scan_id", CellKind::Text},
      {"patient_id", CellKind::Text},
      {"eye", CellKind::Text},
      {"region", CellKind::Text},
      {"vfi", CellKind::Real, 0.0, 100.0},
      {"md", CellKind::Real, -35.0, 5.0},
      {"diagnosis", CellKind::Text},
      {"pupil_mm", CellKind::Real, 0.0, 20.0},
      {"fixation_loss", CellKind::Real, 0.0, 1.0},
      {"false_pos", CellKind::Real, 0.0, 1.0},
      {"false_neg", CellKind::Real, 0.0, 1.0},
  };
  return schema;
}

store::Table records_to_table(std::span<const ScanRecord> rows) {
  store::Table t{record_schema(), {}};
  for (const ScanRecord& r : rows) {
    t.add_row({r.scan_id, r.patient_id, to_string(r.eye), to_string(r.region), r.vfi, r.md, to_string(r.diagnosis),
               r.quality.pupil_mm, r.quality.fixation_loss, r.quality.false_pos, r.quality.false_neg});
  }
  return t;
}

std::vector<ScanRecord> records_from_table(const store::Table& t) {
  std::vector<ScanRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto enum_cell = [&](std::size_t col, auto parse) {
      try {
        return parse(t.text(i, col));
      } catch (const InvalidArgument& e) {
        throw SchemaError(e.what(), static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(col));
      }
    };
    ScanRecord r;
    r.scan_id = t.text(i, 0);
    r.patient_id = t.text(i, 1);
    r.eye = enum_cell(2, parse_laterality);
    r.region = enum_cell(3, parse_region);
    r.vfi = t.real(i, 4);
    r.md = t.real(i, 5);
    r.diagnosis = enum_cell(6, parse_diagnosis);
    r.quality = {t.real(i, 7), t.real(i, 8), t.real(i, 9), t.real(i, 10)};
    out.push_back(std::move(r));
  }
  return out;
}

void write_records(std::span<const ScanRecord> rows, const std::filesystem::path& path) {
  store::write_table(records_to_table(rows), path);
}

std::vector<ScanRecord> read_records(const std::filesystem::path& path) {
  return records_from_table(store::read_table(path, record_schema()));
}

}  // namespace volreg::synth
