// SPDX-License-Identifier: Apache-2.0
//
// Generic turning-point scenarios, one JSON record per line:
//   {"id": "...", "category": "ConflictAndRepair", "synopsis": "...", "tags": [...]}

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relate/domain.hpp"

namespace relate::scene {

struct Scenario {
  std::string id;
  TurningPointCategory category = TurningPointCategory::InitialFormation;
  std::string synopsis;
  std::vector<std::string> tags;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

Json to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j, const std::string& path = {});

class ScenarioBank {
 public:
  ScenarioBank() = default;
  /// Throws std::invalid_argument on duplicate or empty ids.
  explicit ScenarioBank(std::vector<Scenario> scenarios);

  /// Parses one record per line; blank lines are skipped. Errors name the
  /// line number.
  static ScenarioBank parse(std::string_view text, const std::string& source = "bank");
  static ScenarioBank load(const std::filesystem::path& file);

  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  std::size_t size() const { return scenarios_.size(); }
  bool empty() const { return scenarios_.empty(); }
  const Scenario* find(std::string_view id) const;
  /// Scenarios of one category, in file order.
  std::vector<const Scenario*> pool(TurningPointCategory category) const;

  std::string serialize() const;

 private:
  std::vector<Scenario> scenarios_;
};

/// Combinatorial generator for larger banks: `per_category` scenarios in each
/// of the six categories, seeded.
std::vector<Scenario> generate_bank(std::size_t per_category, std::uint64_t seed);

}  // namespace relate::scene
