// SPDX-License-Identifier: Apache-2.0
//
// Persona-aligned relationship agent. At each decision point the agent
// appraises the situation, retrieves memories, and picks exactly one of the
// options the Scene Master offered in a single constrained chat call.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/memory.hpp"

namespace relate::agent {

struct AgentState {
  Partner partner = Partner::A;
  Persona persona;
  memory::MemoryStore memory{1};
  /// Events this agent has witnessed, append-only within a run.
  std::vector<SceneEvent> history;
  AffectVector affect;
  RelationshipMetrics metrics;
  std::string last_internal_thought;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

Json to_json(const AgentState& agent);
AgentState agent_from_json(const Json& j, const std::string& path = {});

/// Identity memories derived from a persona: narrative in two-sentence chunks,
/// one entry per playbook rule, then any extra dyad-supplied memories.
std::vector<std::string> identity_texts(const Persona& persona,
                                        const std::vector<std::string>& extra);

/// Builds an agent with its identity layer preloaded.
AgentState make_agent(llm::Gateway& gateway, memory::AffectEmbedder& embedder, Partner partner,
                      const Persona& persona, const std::vector<std::string>& extra_memories,
                      Warnings& warnings);

/// Decision prompt in the fixed section order: Role, Instructions, Selection
/// Criteria, Most Recent Internal Thought, Your Persona, Scene History,
/// Relevant Memories, Action Options, Output.
llm::PromptSpec assemble_decision_prompt(const Persona& persona, std::string_view scene_history,
                                         const memory::RetrievalResult& retrieved,
                                         std::string_view internal_thought,
                                         const OptionSet& options);

/// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

/// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty.
double token_jaccard(std::string_view a, std::string_view b);

inline constexpr double kOptionMatchThreshold = 0.6;

/// Exact id (optionally followed by ':' or text) first, then the best
/// description overlap at or above the threshold; earlier options win ties.
std::optional<std::string> match_option(const OptionSet& options, std::string_view action,
                                        double threshold = kOptionMatchThreshold);

class DecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecideParams {
  std::size_t k = 5;
  double lambda = 0.5;
  bool log_prompt = true;
};

/// appraise -> retrieve_top_k -> assemble prompt -> one decision call. An
/// unmatched action gets one corrective retry; if that also fails,
/// DecisionError is thrown. Updates the agent's affect and internal thought.
Decision decide(llm::Gateway& gateway, AgentState& agent, std::string_view scene_context,
                const OptionSet& options, const DecideParams& params, Warnings& warnings);

/// Per-scene proxies for dedication, alternatives and investments.
RelationshipMetrics update_metrics(const RelationshipMetrics& previous, double commitment_score,
                                   const AffectVector& affect, const RelationshipState& state);

}  // namespace relate::agent
