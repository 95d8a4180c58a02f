#pragma once

#include <algorithm>
#include <utility>

namespace volreg::autonet {

/// Affine map between clinical label ranges and the tanh output range.
/// VFI in [0, 100] maps to VFI/50 - 1; MD in [-35, 5] maps to (MD + 15)/20.
struct LabelScaling {
  double vfi_mid = 50.0;
  double vfi_half = 50.0;
  double md_mid = -15.0;
  double md_half = 20.0;

  double vfi_min() const { return vfi_mid - vfi_half; }
  double vfi_max() const { return vfi_mid + vfi_half; }
  double md_min() const { return md_mid - md_half; }
  double md_max() const { return md_mid + md_half; }

  bool operator==(const LabelScaling&) const = default;
};

struct EncodedLabels {
  double vfi;
  double md;
};

struct DecodedLabels {
  double vfi;
  double md;
};

/// Out-of-range inputs are clipped before scaling.
inline EncodedLabels encode_labels(double vfi, double md, const LabelScaling& s = {}) {
  vfi = std::clamp(vfi, s.vfi_min(), s.vfi_max());
  md = std::clamp(md, s.md_min(), s.md_max());
  return {(vfi - s.vfi_mid) / s.vfi_half, (md - s.md_mid) / s.md_half};
}

inline DecodedLabels decode_labels(double y_vfi, double y_md, const LabelScaling& s = {}) {
  y_vfi = std::clamp(y_vfi, -1.0, 1.0);
  y_md = std::clamp(y_md, -1.0, 1.0);
  return {std::clamp(s.vfi_mid + s.vfi_half * y_vfi, s.vfi_min(), s.vfi_max()),
          std::clamp(s.md_mid + s.md_half * y_md, s.md_min(), s.md_max())};
}

}  // namespace volreg::autonet
