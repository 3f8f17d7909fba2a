#include "as2/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "as2/errors.hpp"
#include "json.hpp"

namespace as2 {

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot hash missing file " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string fnv1a64_hex(const std::string& path) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64_file(path);
  return os.str();
}

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = nlohmann::json::parse(m.config_json.empty() ? "{}"
                                                            : m.config_json);
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, h] : m.inputs)
    inputs.push_back({{"path", p}, {"fnv1a64", h}});
  j["inputs"] = inputs;
  j["artifacts"] = m.artifacts;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["wall_seconds"] = m.wall_seconds;
  std::ofstream out(path);
  if (!out) throw input_error("cannot write manifest " + path);
  out << j.dump(2) << "\n";
}

}  // namespace as2
