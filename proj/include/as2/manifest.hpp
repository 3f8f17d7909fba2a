#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace as2 {

// Everything needed to reproduce a command bit-exactly: the resolved config,
// the input files with content hashes, the seeds, and the artifacts written.
struct RunManifest {
  std::string command;
  std::string config_json;  // fully resolved (defaults included)
  std::vector<std::pair<std::string, std::string>> inputs;  // path, fnv64 hex
  std::vector<std::string> artifacts;
  std::uint64_t seed = 0;
  std::string started_at;
  double wall_seconds = 0.0;
};

std::uint64_t fnv1a64_file(const std::string& path);
std::string fnv1a64_hex(const std::string& path);

void write_manifest(const RunManifest& m, const std::string& path);

}  // namespace as2
