#include "shredder/planner.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "shredder/error.hpp"
#include "shredder/wire.hpp"

namespace shredder {

namespace {

double positive(const YAML::Node& node, const std::string& what) {
  if (!node) throw FormatError("profile: missing " + what);
  double v = 0.0;
  try {
    v = node.as<double>();
  } catch (const YAML::Exception&) {
    throw FormatError("profile: " + what + " is not a number");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw FormatError("profile: " + what + " must be strictly positive");
  return v;
}

}  // namespace

DeviceProfile parse_profile(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("profile: ") + e.what());
  }
  if (!root.IsMap()) throw FormatError("profile: top level must be a mapping");
  DeviceProfile p;
  const auto link = root["link"];
  if (!link || !link.IsMap()) throw FormatError("profile: missing 'link' block");
  p.bandwidth_bytes_per_s = positive(link["bandwidth_bytes_per_s"], "link.bandwidth_bytes_per_s");
  p.latency_ms = positive(link["latency_ms"], "link.latency_ms");
  const auto layers = root["layers"];
  if (!layers || !layers.IsMap()) throw FormatError("profile: missing 'layers' block");
  for (const auto& kv : layers) {
    const auto name = kv.first.as<std::string>();
    p.layers[name] = {positive(kv.second["edge_ms"], name + ".edge_ms"),
                      positive(kv.second["cloud_ms"], name + ".cloud_ms")};
  }
  return p;
}

DeviceProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

CostTable build_cost_table(const NetworkSpec& spec, const DeviceProfile& profile) {
  if (!(profile.bandwidth_bytes_per_s > 0.0) || !(profile.latency_ms > 0.0)) {
    throw ConfigError("profile: link bandwidth and latency must be strictly positive");
  }
  const std::size_t k = spec.layers.size();
  std::vector<LayerTiming> timing(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto it = profile.layers.find(spec.layers[i].name);
    if (it == profile.layers.end()) throw ConfigError("profile: no timing for layer '" + spec.layers[i].name + "'");
    if (!(it->second.edge_ms > 0.0) || !(it->second.cloud_ms > 0.0)) {
      throw ConfigError("profile: timings for layer '" + spec.layers[i].name + "' must be strictly positive");
    }
    timing[i] = it->second;
  }

  auto row = [&](std::size_t cut) {
    CutCost c;
    c.cut = cut;
    for (std::size_t i = 0; i < cut; ++i) c.edge_ms += timing[i].edge_ms;
    for (std::size_t i = cut; i < k; ++i) c.cloud_ms += timing[i].cloud_ms;
    const Shape& shape = cut == 0 ? spec.input_shape : spec.layers[cut].input_shape;
    c.transmit_bytes = wire::activation_frame_size(shape);
    c.transmit_ms = 1000.0 * static_cast<double>(c.transmit_bytes) / profile.bandwidth_bytes_per_s;
    c.latency_ms = profile.latency_ms;
    c.total_ms = c.edge_ms + c.transmit_ms + c.latency_ms + c.cloud_ms;
    return c;
  };

  CostTable table;
  table.input_only = row(0);
  for (auto cut : valid_cuts(spec)) table.rows.push_back(row(cut));
  return table;
}

std::size_t choose_cut(const CostTable& table) {
  if (table.rows.empty()) throw ConfigError("no valid cut exists for this topology");
  const CutCost* best = &table.rows.front();
  for (const auto& r : table.rows) {
    if (r.total_ms < best->total_ms || (r.total_ms == best->total_ms && r.cut > best->cut)) best = &r;
  }
  return best->cut;
}

Split choose_split(std::shared_ptr<const Network> network, const DeviceProfile& profile) {
  const auto cut = choose_cut(build_cost_table(network->spec(), profile));
  return Split(std::move(network), cut);
}

}  // namespace shredder
