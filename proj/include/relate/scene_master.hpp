// SPDX-License-Identifier: Apache-2.0
//
// The Scene Master: picks the next turning point from the relationship
// state, frames it, narrates until a partner must act, curates the option
// menu, then scores state and commitment once the scene closes.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relate/agent.hpp"
#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/memory.hpp"
#include "relate/rubrics.hpp"
#include "relate/scenario_bank.hpp"

namespace relate::scene {

/// A step could not produce a valid record after its retries.
class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Priority list, primary category first; every category appears once.
std::vector<TurningPointCategory> select_category(const RelationshipState& state, int scene_index);

/// Uniform sample without replacement of min(n, pool) scenarios, seeded.
std::vector<Scenario> sample_candidates(const ScenarioBank& bank, TurningPointCategory category,
                                        std::size_t n, std::uint64_t seed);

struct CandidateDraw {
  TurningPointCategory category;
  std::vector<Scenario> candidates;
};

/// Walks the priority list until a category has scenarios. Throws SceneError
/// when every pool is empty.
CandidateDraw sample_with_fallback(const ScenarioBank& bank,
                                   const std::vector<TurningPointCategory>& priority,
                                   std::size_t n, std::uint64_t seed);

Scenario select_scenario(llm::Gateway& gateway, const std::vector<Scenario>& candidates,
                         const Dyad& dyad, std::string_view previous_summary,
                         const RelationshipState& state, Warnings& warnings);

struct ExpandedScene {
  SceneState scene_state;
  std::string stakes;
  std::optional<std::string> third_party;
  std::string source_scenario_id;
  TurningPointCategory category = TurningPointCategory::InitialFormation;
};

ExpandedScene expand_scene(llm::Gateway& gateway, const Scenario& scenario, const Dyad& dyad,
                           std::string_view previous_summary);

struct NarrationStep {
  std::string narration;
  bool stop = false;
  std::optional<Partner> acting_partner;
};

struct NarrationProgress {
  int decision_points = 0;
  int max_decision_points = 4;
  int steps_since_decision = 0;
  int max_steps = 12;
};

NarrationStep advance_narrative(llm::Gateway& gateway, const ExpandedScene& scene,
                                const std::vector<SceneEvent>& transcript,
                                const NarrationProgress& progress);

OptionSet generate_options(llm::Gateway& gateway, const ExpandedScene& scene,
                           const std::vector<SceneEvent>& transcript,
                           const RelationshipState& state, Partner acting_partner);

struct StateInference {
  RelationshipState state;
  std::optional<TurningPointCategory> confirmed_category;
};

StateInference infer_states(llm::Gateway& gateway, const ExpandedScene& scene,
                            const std::vector<SceneEvent>& transcript,
                            const RelationshipState& previous, Warnings& warnings);

/// Evidence refs that do not name a transcript event are dropped with a warning.
CommitmentEstimate score_commitment(llm::Gateway& gateway, const ExpandedScene& scene,
                                    const std::vector<SceneEvent>& transcript,
                                    const RelationshipState& state,
                                    const std::optional<CommitmentEstimate>& previous,
                                    Warnings& warnings);

/// Rolling summary capped at `word_cap` words (truncated with a warning).
std::string update_summary(llm::Gateway& gateway, std::string_view previous_summary,
                           const ExpandedScene& scene, const std::vector<SceneEvent>& transcript,
                           std::size_t word_cap, Warnings& warnings);

/// Situation text handed to agents: framing, stakes, goals and transcript.
std::string render_scene_context(const ExpandedScene& scene,
                                 const std::vector<SceneEvent>& transcript);

std::string render_transcript(const std::vector<SceneEvent>& transcript);

// ---------------------------------------------------------------------------
// Runs

/// Everything needed to continue a run after scene `trace.scenes.size() - 1`.
struct Checkpoint {
  static constexpr int kVersion = 1;
  SimulationTrace trace;
  RelationshipState state;
  std::array<agent::AgentState, 2> agents;
  Json affect_cache = Json::object();
};

Json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const Json& j, const std::string& path = {});

struct HumanChoice {
  std::string option_id;
  std::string rationale;
};

/// Offered to the decision hook when a human controls the acting partner.
struct DecisionPoint {
  int scene_index = 0;
  OptionSet options;
  std::vector<SceneEvent> transcript;
  Decision shadow;
};

struct RunHooks {
  /// Partner under human control, if any.
  std::optional<Partner> human_controls;
  /// Blocks until a human choice is available. Must return an id in the set.
  std::function<HumanChoice(const DecisionPoint&)> on_decision;
  /// Called after each completed scene with the resumable state.
  std::function<void(const Checkpoint&)> on_scene_complete;
  /// Called for every transcript event as it happens.
  std::function<void(int scene_index, const SceneEvent&)> on_event;
  /// Called when a scene is framed, before narration.
  std::function<void(int scene_index, const ExpandedScene&)> on_scene_start;
};

/// Runs scenes until config.num_scenes or a hard breakup marker. Errors do
/// not escape: the returned trace is flagged invalid with the message, and
/// holds every scene completed before the failure.
SimulationTrace run_simulation(llm::Gateway& gateway, const ScenarioBank& bank, const Dyad& dyad,
                               const SimulationConfig& config, std::uint64_t run_seed,
                               int run_index = 0, const RunHooks& hooks = {},
                               std::optional<Checkpoint> resume = std::nullopt);

}  // namespace relate::scene
