#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "shredder/network.hpp"

namespace shredder {

struct LayerTiming {
  double edge_ms = 0.0;
  double cloud_ms = 0.0;
};

// Per-layer compute times on both sides plus link parameters. Every value
// is strictly positive.
struct DeviceProfile {
  std::map<std::string, LayerTiming> layers;
  double bandwidth_bytes_per_s = 0.0;
  double latency_ms = 0.0;
};

DeviceProfile parse_profile(const std::string& yaml_text);
DeviceProfile load_profile(const std::filesystem::path& path);

struct CutCost {
  std::size_t cut = 0;
  double edge_ms = 0.0;
  std::size_t transmit_bytes = 0;
  double transmit_ms = 0.0;
  double latency_ms = 0.0;
  double cloud_ms = 0.0;
  double total_ms = 0.0;
};

struct CostTable {
  // Valid cuts only, shallowest first.
  std::vector<CutCost> rows;
  // Cloud-only execution (raw input shipped). Reported for comparison and
  // never chosen.
  CutCost input_only;
};

CostTable build_cost_table(const NetworkSpec& spec, const DeviceProfile& profile);

// Argmin of total cost; ties go to the deeper cut. Throws when empty.
std::size_t choose_cut(const CostTable& table);
Split choose_split(std::shared_ptr<const Network> network, const DeviceProfile& profile);

}  // namespace shredder
