// SPDX-License-Identifier: Apache-2.0
//
// Shared value types for dyad simulation: enums, scene records, traces and
// their canonical JSON form. Everything that reaches disk or the wire is
// defined here.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace relate {

using Json = nlohmann::ordered_json;

/// Thrown when a document does not match the canonical schema. `path()` is a
/// JSON-pointer-like location of the offending value.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// Closed vocabularies

enum class TurningPointCategory {
  InitialFormation,
  RelationshipDevelopment,
  ChallengesOrTests,
  ConflictAndRepair,
  DeepeningOrMilestones,
  OtherModernTurningPoints,
};

enum class Conflict { None, Brewing, Active, Unresolved, Repaired, Unknown };
enum class RepairOutcome { None, Attempted, Successful, Failed, Unknown };
enum class Clarity { Unclear, Tacit, Explicit, Unknown };
enum class Constraints { None, Emerging, Accrued, Unknown };
enum class Alternatives { Quiet, Salient, Hot, Unknown };
enum class Transition { None, Upcoming, Underway, Unknown };
enum class Network { Supportive, Neutral, Opposed, Mixed, Unknown };
enum class BreakupMarker { None, Soft, Hard, Unknown };

enum class Partner { A, B };
enum class MemoryLayer { Identity, Simulation, Scene };
enum class OutcomeLabel { BrokenUpOrDivorced, Dating, Engaged, Married };
enum class InstrumentKind { Ctss, Ersi, Rpd, Self, Sfn, Vplst, Other };
enum class Reporter { Self, Partner };
enum class EventKind { Narration, Options, Decision };

template <typename E>
struct EnumTokens;

#define RELATE_ENUM_TOKENS(E, ...)                                   \
  template <>                                                        \
  struct EnumTokens<E> {                                             \
    static constexpr std::string_view name = #E;                     \
    static constexpr std::array values = {__VA_ARGS__};              \
  };

using namespace std::string_view_literals;

RELATE_ENUM_TOKENS(TurningPointCategory, "InitialFormation"sv, "RelationshipDevelopment"sv,
                   "ChallengesOrTests"sv, "ConflictAndRepair"sv, "DeepeningOrMilestones"sv,
                   "OtherModernTurningPoints"sv)
RELATE_ENUM_TOKENS(Conflict, "none"sv, "brewing"sv, "active"sv, "unresolved"sv, "repaired"sv,
                   "unknown"sv)
RELATE_ENUM_TOKENS(RepairOutcome, "none"sv, "attempted"sv, "successful"sv, "failed"sv,
                   "unknown"sv)
RELATE_ENUM_TOKENS(Clarity, "unclear"sv, "tacit"sv, "explicit"sv, "unknown"sv)
RELATE_ENUM_TOKENS(Constraints, "none"sv, "emerging"sv, "accrued"sv, "unknown"sv)
RELATE_ENUM_TOKENS(Alternatives, "quiet"sv, "salient"sv, "hot"sv, "unknown"sv)
RELATE_ENUM_TOKENS(Transition, "none"sv, "upcoming"sv, "underway"sv, "unknown"sv)
RELATE_ENUM_TOKENS(Network, "supportive"sv, "neutral"sv, "opposed"sv, "mixed"sv, "unknown"sv)
RELATE_ENUM_TOKENS(BreakupMarker, "none"sv, "soft"sv, "hard"sv, "unknown"sv)
RELATE_ENUM_TOKENS(Partner, "A"sv, "B"sv)
RELATE_ENUM_TOKENS(MemoryLayer, "identity"sv, "simulation"sv, "scene"sv)
RELATE_ENUM_TOKENS(OutcomeLabel, "broken_up_or_divorced"sv, "dating"sv, "engaged"sv, "married"sv)
RELATE_ENUM_TOKENS(InstrumentKind, "ctss"sv, "ersi"sv, "rpd"sv, "self"sv, "sfn"sv, "vplst"sv,
                   "other"sv)
RELATE_ENUM_TOKENS(Reporter, "self"sv, "partner"sv)
RELATE_ENUM_TOKENS(EventKind, "narration"sv, "options"sv, "decision"sv)

#undef RELATE_ENUM_TOKENS

template <typename E>
constexpr std::size_t enum_size() {
  return EnumTokens<E>::values.size();
}

template <typename E>
constexpr std::string_view to_token(E value) {
  return EnumTokens<E>::values[static_cast<std::size_t>(value)];
}

template <typename E>
constexpr std::optional<E> parse_token(std::string_view token) {
  const auto& values = EnumTokens<E>::values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == token) return static_cast<E>(i);
  }
  return std::nullopt;
}

/// Strict parse; the error names the enum and the rejected token.
template <typename E>
E parse_token_or_throw(std::string_view token, std::string path = {}) {
  if (auto value = parse_token<E>(token)) return *value;
  throw SchemaError(std::move(path), "unknown " + std::string(EnumTokens<E>::name) + " token '" +
                                         std::string(token) + "'");
}

template <typename E>
constexpr std::array<E, enum_size<E>()> all_values() {
  std::array<E, enum_size<E>()> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<E>(i);
  return out;
}

constexpr Partner other(Partner p) { return p == Partner::A ? Partner::B : Partner::A; }

// ---------------------------------------------------------------------------
// Relationship state

struct RelationshipState {
  Conflict conflict = Conflict::Unknown;
  RepairOutcome repair_outcome = RepairOutcome::Unknown;
  Clarity clarity = Clarity::Unknown;
  Constraints constraints = Constraints::Unknown;
  Alternatives alternatives = Alternatives::Unknown;
  Transition transition = Transition::Unknown;
  Network network = Network::Unknown;
  BreakupMarker breakup_marker = BreakupMarker::Unknown;

  bool all_unknown() const { return *this == RelationshipState{}; }
  friend bool operator==(const RelationshipState&, const RelationshipState&) = default;
};

/// Field names of RelationshipState, in canonical order.
inline constexpr std::array<std::string_view, 8> kStateFields = {
    "conflict", "repair_outcome", "clarity", "constraints",
    "alternatives", "transition", "network", "breakup_marker"};

/// Closed token set for one state field; empty span for an unknown field name.
std::vector<std::string_view> state_vocabulary(std::string_view field);

/// Token currently held by `field`.
std::string_view state_field_token(const RelationshipState& state, std::string_view field);

/// Sets `field` from `token`; returns false (state untouched) if the token is
/// outside the field's vocabulary or the field does not exist.
bool set_state_field(RelationshipState& state, std::string_view field, std::string_view token);

// ---------------------------------------------------------------------------
// Scene state (scene state dictionary)

struct SceneState {
  std::string theme;
  std::string setting;
  std::vector<std::string> npcs;
  std::string current_scene;
  std::string previous_summary;
  std::string character_1_goal;
  std::string character_2_goal;
  std::string scene_conflict;

  friend bool operator==(const SceneState&, const SceneState&) = default;
};

// ---------------------------------------------------------------------------
// Affect

inline constexpr std::size_t kAffectDims = 8;
inline constexpr std::array<std::string_view, kAffectDims> kAffectNames = {
    "joy", "sadness", "fear", "surprise", "anger", "disgust", "trust", "anticipation"};

std::optional<std::size_t> affect_index(std::string_view name);

/// Fixed K=8 intensity vector, every component in [0,1].
class AffectVector {
 public:
  AffectVector() = default;
  /// Throws std::invalid_argument if any component is outside [0,1] or not finite.
  explicit AffectVector(const std::array<double, kAffectDims>& values);

  /// Clamps each component into [0,1]; NaN becomes 0.
  static AffectVector clamped(std::array<double, kAffectDims> values);

  double operator[](std::size_t i) const { return values_[i]; }
  double get(std::string_view name) const;
  const std::array<double, kAffectDims>& values() const { return values_; }
  /// Index of the largest component (first on ties).
  std::size_t dominant() const;

  friend bool operator==(const AffectVector&, const AffectVector&) = default;

 private:
  std::array<double, kAffectDims> values_{};
};

// ---------------------------------------------------------------------------
// Persona

struct PlaybookRule {
  std::string condition;
  std::string action;
  friend bool operator==(const PlaybookRule&, const PlaybookRule&) = default;
};

struct InstrumentSynopsis {
  InstrumentKind kind = InstrumentKind::Other;
  Reporter reporter = Reporter::Self;
  std::string text;
  std::vector<std::string> evidence;
  friend bool operator==(const InstrumentSynopsis&, const InstrumentSynopsis&) = default;
};

struct Persona {
  std::string narrative;
  std::vector<PlaybookRule> playbook;
  std::vector<InstrumentSynopsis> source_synopses;
  friend bool operator==(const Persona&, const Persona&) = default;
};

inline constexpr std::size_t kMinPersonaWords = 200;
inline constexpr std::size_t kMaxPersonaWords = 300;
inline constexpr std::size_t kMinPlaybookRules = 5;
inline constexpr std::size_t kMaxPlaybookRules = 7;

/// Whitespace-delimited token count; "long-term" is one word.
std::size_t word_count(std::string_view text);

/// Copy without leading and trailing whitespace.
std::string trim(std::string_view text);

// ---------------------------------------------------------------------------
// Memory and agent bookkeeping

struct MemoryEntry {
  std::string id;
  MemoryLayer layer = MemoryLayer::Identity;
  std::string text;
  std::vector<double> semantic_embedding;
  AffectVector affect_embedding;
  std::optional<int> created_at_scene;
  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

struct RelationshipMetrics {
  double dedication = 0.0;
  double alternatives = 0.0;
  double investments = 0.0;

  RelationshipMetrics clamped() const;
  friend bool operator==(const RelationshipMetrics&, const RelationshipMetrics&) = default;
};

// ---------------------------------------------------------------------------
// Scene artefacts

struct Option {
  std::string id;
  std::string description;
  Partner actor = Partner::A;
  friend bool operator==(const Option&, const Option&) = default;
};

inline constexpr std::size_t kMinOptions = 3;
inline constexpr std::size_t kMaxOptions = 4;

struct OptionSet {
  std::vector<Option> options;
  Partner acting_partner = Partner::A;

  const Option* find(std::string_view id) const;
  friend bool operator==(const OptionSet&, const OptionSet&) = default;
};

/// Problems with an option set (count, actor, distinctness, id uniqueness).
std::vector<std::string> option_set_problems(const OptionSet& set);

inline constexpr double kMinCommitment = 1.0;
inline constexpr double kMaxCommitment = 5.0;

struct CommitmentEstimate {
  double score = 3.0;
  std::string rationale;
  std::vector<std::string> evidence_refs;
  friend bool operator==(const CommitmentEstimate&, const CommitmentEstimate&) = default;
};

struct SceneEvent {
  std::string id;
  EventKind kind = EventKind::Narration;
  std::optional<Partner> actor;
  std::string text;
  friend bool operator==(const SceneEvent&, const SceneEvent&) = default;
};

struct Decision {
  Partner actor = Partner::A;
  std::string chosen_option_id;
  std::string action_text;
  std::string reasoning;
  std::optional<double> confidence;
  std::optional<std::vector<std::string>> emotion_tags;
  bool by_human = false;
  /// Agent's own pick when a human made the choice.
  std::optional<std::string> shadow_option_id;
  /// Rendered decision prompt, kept for audit. Empty when prompt logging is off.
  std::string prompt;
  friend bool operator==(const Decision&, const Decision&) = default;
};

struct SceneRecord {
  int index = 0;
  TurningPointCategory category = TurningPointCategory::InitialFormation;
  std::optional<TurningPointCategory> confirmed_category;
  std::string scenario_id;
  SceneState scene_state;
  std::string stakes;
  std::optional<std::string> third_party;
  std::vector<SceneEvent> transcript;
  std::vector<OptionSet> option_sets;
  std::vector<Decision> decisions;
  RelationshipState inferred_state;
  CommitmentEstimate commitment;
  std::string rolling_summary;
  int llm_call_count = 0;
  std::array<RelationshipMetrics, 2> metrics{};
  std::vector<std::string> warnings;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

/// Knobs that shape one simulation run; snapshotted into every trace.
struct SimulationConfig {
  int num_scenes = 8;
  std::size_t candidates_per_scene = 30;
  std::size_t retrieval_k = 5;
  double affect_lambda = 0.5;
  int max_narration_steps = 12;
  int max_decisions_per_scene = 4;
  std::size_t summary_word_cap = 150;
  bool log_prompts = true;
  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct Dyad {
  std::string dyad_id;
  Persona a;
  Persona b;
  std::vector<std::string> identity_memories_a;
  std::vector<std::string> identity_memories_b;

  const Persona& persona(Partner p) const { return p == Partner::A ? a : b; }
  const std::vector<std::string>& identity_memories(Partner p) const {
    return p == Partner::A ? identity_memories_a : identity_memories_b;
  }
  friend bool operator==(const Dyad&, const Dyad&) = default;
};

struct SimulationTrace {
  std::string dyad_id;
  int run_index = 0;
  std::uint64_t run_seed = 0;
  SimulationConfig config;
  Persona persona_a;
  Persona persona_b;
  std::vector<SceneRecord> scenes;
  std::optional<CommitmentEstimate> final_commitment;
  bool terminated_early = false;
  std::string termination_reason;
  bool valid = true;
  std::string error;
  friend bool operator==(const SimulationTrace&, const SimulationTrace&) = default;
};

// ---------------------------------------------------------------------------
// Canonical JSON

Json to_json(const RelationshipState& v);
Json to_json(const SceneState& v);
Json to_json(const AffectVector& v);
Json to_json(const PlaybookRule& v);
Json to_json(const InstrumentSynopsis& v);
Json to_json(const Persona& v);
Json to_json(const MemoryEntry& v);
Json to_json(const RelationshipMetrics& v);
Json to_json(const Option& v);
Json to_json(const OptionSet& v);
Json to_json(const CommitmentEstimate& v);
Json to_json(const SceneEvent& v);
Json to_json(const Decision& v);
Json to_json(const SceneRecord& v);
Json to_json(const SimulationConfig& v);
Json to_json(const Dyad& v);

template <typename T>
T from_json(const Json& j, const std::string& path = {});

template <>
RelationshipState from_json<RelationshipState>(const Json& j, const std::string& path);
template <>
SceneState from_json<SceneState>(const Json& j, const std::string& path);
template <>
AffectVector from_json<AffectVector>(const Json& j, const std::string& path);
template <>
PlaybookRule from_json<PlaybookRule>(const Json& j, const std::string& path);
template <>
InstrumentSynopsis from_json<InstrumentSynopsis>(const Json& j, const std::string& path);
template <>
Persona from_json<Persona>(const Json& j, const std::string& path);
template <>
MemoryEntry from_json<MemoryEntry>(const Json& j, const std::string& path);
template <>
RelationshipMetrics from_json<RelationshipMetrics>(const Json& j, const std::string& path);
template <>
Option from_json<Option>(const Json& j, const std::string& path);
template <>
OptionSet from_json<OptionSet>(const Json& j, const std::string& path);
template <>
CommitmentEstimate from_json<CommitmentEstimate>(const Json& j, const std::string& path);
template <>
SceneEvent from_json<SceneEvent>(const Json& j, const std::string& path);
template <>
Decision from_json<Decision>(const Json& j, const std::string& path);
template <>
SceneRecord from_json<SceneRecord>(const Json& j, const std::string& path);
template <>
SimulationConfig from_json<SimulationConfig>(const Json& j, const std::string& path);
template <>
Dyad from_json<Dyad>(const Json& j, const std::string& path);

/// Compact single-line dump used for every canonical file.
std::string canonical_dump(const Json& j);

/// One header line, one line per scene, one footer line.
std::string serialize_trace(const SimulationTrace& trace);
SimulationTrace parse_trace(std::string_view text);

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string path;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Violation> warnings;
  bool ok() const { return violations.empty(); }
};

/// Checks every type invariant reachable from the trace. Violations are data.
ValidationReport validate_trace(const SimulationTrace& trace);

/// Parses then validates; a parse failure is reported as a single violation.
ValidationReport validate_trace_text(std::string_view text);

}  // namespace relate
