// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures: a scripted "world" that answers every pipeline role so
// whole runs can be driven without a network, plus small builders.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/llm/scripted_backend.hpp"
#include "relate/scenario_bank.hpp"
#include "relate/scene_master.hpp"

namespace relate::fixture {

inline std::string n_words(std::size_t n, std::string_view first = "You") {
  std::string out(first);
  for (std::size_t i = 1; i < n; ++i) out += " calm";
  return out;
}

inline Persona make_persona(const std::string& tag, std::size_t words = 220, std::size_t rules = 5) {
  Persona p;
  p.narrative = n_words(words - 1, "You") + " " + tag;
  for (std::size_t i = 0; i < rules; ++i) {
    p.playbook.push_back({fmt::format("if {} cue {}", tag, i), "then talk it through"});
  }
  return p;
}

inline Dyad make_dyad(const std::string& id) {
  Dyad d;
  d.dyad_id = id;
  d.a = make_persona(id + "-alpha");
  d.b = make_persona(id + "-beta");
  return d;
}

inline Json full_state(std::string_view conflict = "none", std::string_view breakup = "none",
                       std::string_view clarity = "tacit") {
  return Json{{"conflict", conflict},     {"repair_outcome", "none"}, {"clarity", clarity},
              {"constraints", "none"},    {"alternatives", "quiet"},  {"transition", "none"},
              {"network", "neutral"},     {"breakup_marker", breakup}, {"category", nullptr}};
}

/// Scene index from the transcript event ids ("[s2e3] ...") in a prompt.
inline int scene_of(const llm::PromptSpec& spec) {
  static const std::regex id_re(R"(\[s(\d+)e\d+\])");
  const auto* t = spec.section("Transcript");
  std::smatch m;
  if (t && std::regex_search(*t, m, id_re)) return std::stoi(m[1].str());
  return -1;
}

struct WorldOptions {
  /// State reply for a scene index.
  std::function<Json(int)> state = [](int) { return full_state(); };
  /// Commitment score for a scene index.
  std::function<double(int)> commitment = [](int s) { return 3.0 - 0.1 * s; };
  /// Option id the agent picks.
  std::string pick = "o1";
  std::size_t option_count = 3;
};

/// One decision point per scene, for partner A on even scenes and B on odd.
inline std::vector<llm::ScriptRule> world_rules(WorldOptions o = {}) {
  using llm::PromptSpec;
  std::vector<llm::ScriptRule> rules;
  auto add = [&](std::string role, std::function<std::string(const PromptSpec&)> fn) {
    llm::ScriptRule r;
    r.role_tag = std::move(role);
    r.responder = std::move(fn);
    rules.push_back(std::move(r));
  };
  const Json affect = {{"joy", 0.2}, {"sadness", 0.1}, {"fear", 0.1}, {"surprise", 0.0},
                       {"anger", 0.1}, {"disgust", 0.0}, {"trust", 0.6}, {"anticipation", 0.3}};
  add("appraisal", [affect](const PromptSpec&) {
    Json j = affect;
    j["internal_thought"] = "I want this to go well.";
    return j.dump();
  });
  add("affect_embed", [affect](const PromptSpec&) { return affect.dump(); });
  add("scenario_selection", [](const PromptSpec& spec) {
    const auto* c = spec.section("Candidates");
    return Json{{"scenario_id", c->substr(0, c->find(' '))}}.dump();
  });
  add("scene_expansion", [](const PromptSpec&) {
    return Json{{"theme", "trust"},
                {"setting", "a small kitchen"},
                {"NPC", Json::array({"a neighbor"})},
                {"current_scene", "Dinner is getting cold."},
                {"character_1_goal", "be heard"},
                {"character_2_goal", "keep the peace"},
                {"scene_conflict", "who cancels the trip"},
                {"stakes", "the weekend"},
                {"third_party", nullptr}}
        .dump();
  });
  add("narration", [](const PromptSpec& spec) {
    const auto* t = spec.section("Transcript");
    const bool decided = t && t->find(" chose ") != std::string::npos;
    const bool started = t && t->find("(no events yet)") == std::string::npos;
    if (decided) return Json{{"narration", "The evening winds down."}, {"stop", true}, {"acting_partner", nullptr}}.dump();
    if (!started) return Json{{"narration", "The phone buzzes on the table."}, {"stop", false}, {"acting_partner", nullptr}}.dump();
    const int s = scene_of(spec);
    return Json{{"narration", "A silence falls."}, {"stop", true}, {"acting_partner", s % 2 == 0 ? "A" : "B"}}.dump();
  });
  add("options", [n = o.option_count](const PromptSpec& spec) {
    const auto actor = *spec.section("Acting Partner");
    const std::vector<std::string> texts = {"Apologizes and asks what would help", "Changes the subject",
                                            "Leaves the room", "Proposes a shared plan", "Raises their voice"};
    Json opts = Json::array();
    for (std::size_t i = 0; i < n; ++i) opts.push_back({{"description", texts[i]}, {"actor", actor}});
    return Json{{"options", opts}}.dump();
  });
  add("decision", [pick = o.pick](const PromptSpec&) {
    return Json{{"action", pick}, {"reasoning", "It fits who I am."}, {"confidence", 0.8}}.dump();
  });
  add("state_inference", [state = o.state](const PromptSpec& spec) { return state(scene_of(spec)).dump(); });
  add("commitment", [c = o.commitment](const PromptSpec& spec) {
    const int s = scene_of(spec);
    return Json{{"score", c(s)}, {"rationale", fmt::format("scene {} held", s)},
                {"evidence_refs", Json::array({fmt::format("s{}e1", s)})}}
        .dump();
  });
  add("summary", [](const PromptSpec& spec) {
    return Json{{"summary", fmt::format("Scene {} passed quietly.", scene_of(spec))}}.dump();
  });
  return rules;
}

inline std::shared_ptr<llm::ScriptedBackend> world(WorldOptions o = {}) {
  return std::make_shared<llm::ScriptedBackend>(world_rules(std::move(o)));
}

inline llm::GatewayConfig fast_gateway() {
  llm::GatewayConfig c;
  c.backoff_base = std::chrono::milliseconds(1);
  return c;
}

/// `per_category` scenarios in each category, ids like "cr-1".
inline scene::ScenarioBank small_bank(std::size_t per_category = 2) {
  const std::map<TurningPointCategory, std::string> prefix = {
      {TurningPointCategory::InitialFormation, "if"},      {TurningPointCategory::RelationshipDevelopment, "rd"},
      {TurningPointCategory::ChallengesOrTests, "ct"},     {TurningPointCategory::ConflictAndRepair, "cr"},
      {TurningPointCategory::DeepeningOrMilestones, "dm"}, {TurningPointCategory::OtherModernTurningPoints, "om"}};
  std::vector<scene::Scenario> out;
  for (const auto& [category, p] : prefix) {
    for (std::size_t i = 1; i <= per_category; ++i) {
      out.push_back({fmt::format("{}-{}", p, i), category, fmt::format("A {} moment number {}.", p, i), {}});
    }
  }
  return scene::ScenarioBank(std::move(out));
}

inline SimulationConfig small_config(int scenes = 3) {
  SimulationConfig c;
  c.num_scenes = scenes;
  return c;
}

/// A valid trace produced by the scripted world.
inline SimulationTrace sample_trace(int scenes = 2) {
  static const auto bank = small_bank();
  llm::Gateway gateway(world(), fast_gateway());
  return scene::run_simulation(gateway, bank, make_dyad("d1"), small_config(scenes), 42);
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "relate-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, std::string_view text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace relate::fixture
