#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sls {

// One manifest per artifact-producing command, written beside its outputs.
// Wall time lives here (not in the CSVs), so reruns with identical inputs
// keep every CSV byte-identical.
struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version;
  double wall_ms = 0.0;
};

void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace sls
