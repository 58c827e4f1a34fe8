#include "sls/manifest.hpp"

#include <fstream>

#include "sls/csv.hpp"
#include "sls/errors.hpp"

namespace sls {

void write_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  out << "command=" << m.command << "\n";
  out << "config_hash=" << m.config_hash << "\n";
  out << "seed=" << m.seed << "\n";
  std::string inputs;
  for (const auto& p : m.inputs) {
    if (!inputs.empty()) inputs += ";";
    inputs += p;
  }
  out << "inputs=" << inputs << "\n";
  std::string outputs;
  for (const auto& p : m.outputs) {
    if (!outputs.empty()) outputs += ";";
    outputs += p;
  }
  out << "outputs=" << outputs << "\n";
  out << "version=" << m.version << "\n";
  out << "wall_ms=" << fmt_full(m.wall_ms) << "\n";
  if (!out) throw IoError("failed writing manifest: " + path);
}

}  // namespace sls
