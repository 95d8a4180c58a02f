#include <algorithm>
#include <map>

#include "app.hpp"
#include "volreg/store/binary.hpp"
#include "volreg/store/container.hpp"
#include "volreg/store/octv.hpp"

namespace volreg::cli {

std::string RunContext::require_path(const std::string& key) const {
  if (!config.contains(key)) throw InvalidArgument("missing required setting '" + key + "'");
  return config.at(key).get<std::string>();
}

std::filesystem::path RunContext::output(const std::string& name) {
  outputs.push_back(name);
  const std::filesystem::path p = out_dir / name;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

void RunContext::write_manifest() const {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["module_versions"] = {{"octv", store::kOctvVersion}, {"vrck", store::kContainerVersion}};
  m["config"] = config;
  m["seed"] = seed();
  m["deterministic"] = true;
  m["outputs"] = outputs;
  m["timings_s"] = timings;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  store::write_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

std::filesystem::path volume_file(const std::filesystem::path& root, const std::string& scan_id) {
  return root / "volumes" / (scan_id + ".octv");
}

DataDir DataDir::load(const std::filesystem::path& root) {
  DataDir d;
  d.root = root;
  d.records = synth::read_records(root / "records.csv");
  const std::vector<regress::FeatureRow> features = regress::read_features(root / "features.csv");
  std::map<std::string, const regress::FeatureRow*> by_id;
  for (const auto& f : features) by_id[f.scan_id] = &f;
  for (const auto& r : d.records) {
    const auto it = by_id.find(r.scan_id);
    if (it == by_id.end()) throw InvalidArgument("features.csv has no row for scan '" + r.scan_id + "'");
    d.features.push_back(*it->second);
  }
  return d;
}

std::filesystem::path DataDir::volume_path(const std::string& scan_id) const { return volume_file(root, scan_id); }

std::vector<std::size_t> DataDir::select(Region region, bool qc) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].region == region && (!qc || synth::qc_filter(records[i]))) out.push_back(i);
  }
  if (out.empty()) throw InvalidArgument("dataset has no usable " + to_string(region) + " records");
  return out;
}

}  // namespace volreg::cli
