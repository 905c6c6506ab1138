#pragma once

#include "ofkit/sim.hpp"

namespace ofkit::sim {

struct ScenarioResult {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, bool>> assertions;
  std::string transcript;  // JSON lines {t, actor, action, detail}
  std::string scan_log;    // JSON lines, captured radio traffic
  nlohmann::ordered_json artifacts;  // scenario-specific outputs

  bool ok() const;
  std::string summary() const;  // one PASS/FAIL line per assertion
};

class UnknownScenario : public std::runtime_error {
 public:
  explicit UnknownScenario(const std::string& name)
      : std::runtime_error("unknown scenario: " + name) {}
};

const std::vector<std::string>& scenario_names();

/// Deterministic in (name, seed, params): identical inputs produce
/// byte-identical transcripts and scan logs.
ScenarioResult run_scenario(
    const std::string& name, std::uint64_t seed,
    const nlohmann::json& params = nlohmann::json::object());

}  // namespace ofkit::sim
