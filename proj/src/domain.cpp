// SPDX-License-Identifier: Apache-2.0

#include "relate/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace relate {

// ---------------------------------------------------------------------------
// Relationship state field access

namespace {

template <typename E>
std::vector<std::string_view> tokens_of() {
  const auto& values = EnumTokens<E>::values;
  return {values.begin(), values.end()};
}

template <typename E>
bool assign(E& slot, std::string_view token) {
  if (auto v = parse_token<E>(token)) {
    slot = *v;
    return true;
  }
  return false;
}

}  // namespace

std::vector<std::string_view> state_vocabulary(std::string_view field) {
  if (field == "conflict") return tokens_of<Conflict>();
  if (field == "repair_outcome") return tokens_of<RepairOutcome>();
  if (field == "clarity") return tokens_of<Clarity>();
  if (field == "constraints") return tokens_of<Constraints>();
  if (field == "alternatives") return tokens_of<Alternatives>();
  if (field == "transition") return tokens_of<Transition>();
  if (field == "network") return tokens_of<Network>();
  if (field == "breakup_marker") return tokens_of<BreakupMarker>();
  return {};
}

std::string_view state_field_token(const RelationshipState& s, std::string_view field) {
  if (field == "conflict") return to_token(s.conflict);
  if (field == "repair_outcome") return to_token(s.repair_outcome);
  if (field == "clarity") return to_token(s.clarity);
  if (field == "constraints") return to_token(s.constraints);
  if (field == "alternatives") return to_token(s.alternatives);
  if (field == "transition") return to_token(s.transition);
  if (field == "network") return to_token(s.network);
  if (field == "breakup_marker") return to_token(s.breakup_marker);
  throw std::invalid_argument("unknown relationship state field '" + std::string(field) + "'");
}

bool set_state_field(RelationshipState& s, std::string_view field, std::string_view token) {
  if (field == "conflict") return assign(s.conflict, token);
  if (field == "repair_outcome") return assign(s.repair_outcome, token);
  if (field == "clarity") return assign(s.clarity, token);
  if (field == "constraints") return assign(s.constraints, token);
  if (field == "alternatives") return assign(s.alternatives, token);
  if (field == "transition") return assign(s.transition, token);
  if (field == "network") return assign(s.network, token);
  if (field == "breakup_marker") return assign(s.breakup_marker, token);
  return false;
}

// ---------------------------------------------------------------------------
// Affect

std::optional<std::size_t> affect_index(std::string_view name) {
  for (std::size_t i = 0; i < kAffectNames.size(); ++i) {
    if (kAffectNames[i] == name) return i;
  }
  return std::nullopt;
}

AffectVector::AffectVector(const std::array<double, kAffectDims>& values) : values_(values) {
  for (std::size_t i = 0; i < kAffectDims; ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("affect component '" + std::string(kAffectNames[i]) +
                                  "' outside [0,1]");
    }
  }
}

AffectVector AffectVector::clamped(std::array<double, kAffectDims> values) {
  for (double& v : values) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return AffectVector(values);
}

double AffectVector::get(std::string_view name) const {
  auto idx = affect_index(name);
  if (!idx) throw std::invalid_argument("unknown affect dimension '" + std::string(name) + "'");
  return values_[*idx];
}

std::size_t AffectVector::dominant() const {
  return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) -
                                  values_.begin());
}

// ---------------------------------------------------------------------------

std::string trim(std::string_view text) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

std::size_t word_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string token; in >> token;) ++n;
  return n;
}

RelationshipMetrics RelationshipMetrics::clamped() const {
  return {std::clamp(dedication, 0.0, 1.0), std::clamp(alternatives, 0.0, 1.0),
          std::clamp(investments, 0.0, 1.0)};
}

const Option* OptionSet::find(std::string_view id) const {
  auto it = std::find_if(options.begin(), options.end(), [&](const Option& o) { return o.id == id; });
  return it == options.end() ? nullptr : &*it;
}

std::vector<std::string> option_set_problems(const OptionSet& set) {
  std::vector<std::string> out;
  const auto n = set.options.size();
  if (n < kMinOptions || n > kMaxOptions) {
    out.push_back("options length " + std::to_string(n) + " ∉ [3,4]");
  }
  std::set<std::string> ids;
  std::set<std::string> descriptions;
  for (const auto& o : set.options) {
    if (o.actor != set.acting_partner) {
      out.push_back("option " + o.id + " actor " + std::string(to_token(o.actor)) +
                    " differs from acting partner " + std::string(to_token(set.acting_partner)));
    }
    if (o.id.empty()) out.push_back("option with empty id");
    if (!ids.insert(o.id).second) out.push_back("duplicate option id " + o.id);
    if (o.description.empty()) out.push_back("option " + o.id + " has empty description");
    if (!descriptions.insert(o.description).second) {
      out.push_back("duplicate option description '" + o.description + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename E>
Json token_json(E v) {
  return std::string(to_token(v));
}

template <typename T, typename F>
Json array_of(const std::vector<T>& items, F&& f) {
  Json arr = Json::array();
  for (const auto& item : items) arr.push_back(f(item));
  return arr;
}

Json strings_json(const std::vector<std::string>& items) {
  return array_of(items, [](const std::string& s) { return Json(s); });
}

std::string child(const std::string& path, std::string_view key) {
  return path + "/" + std::string(key);
}

std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

const Json& require(const Json& j, std::string_view key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  auto it = j.find(std::string(key));
  if (it == j.end()) throw SchemaError(child(path, key), "missing field");
  return *it;
}

std::string get_string(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_string()) throw SchemaError(child(path, key), "expected string");
  return v.get<std::string>();
}

double get_number(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number()) throw SchemaError(child(path, key), "expected number");
  return v.get<double>();
}

std::int64_t get_int(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number_integer()) throw SchemaError(child(path, key), "expected integer");
  return v.get<std::int64_t>();
}

bool get_bool(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_boolean()) throw SchemaError(child(path, key), "expected boolean");
  return v.get<bool>();
}

const Json& get_array(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_array()) throw SchemaError(child(path, key), "expected array");
  return v;
}

std::vector<std::string> get_strings(const Json& j, std::string_view key, const std::string& path) {
  const auto& arr = get_array(j, key, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) throw SchemaError(child(child(path, key), i), "expected string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

template <typename E>
E get_token(const Json& j, std::string_view key, const std::string& path) {
  return parse_token_or_throw<E>(get_string(j, key, path), child(path, key));
}

template <typename T>
std::vector<T> get_list(const Json& j, std::string_view key, const std::string& path) {
  const auto& arr = get_array(j, key, path);
  std::vector<T> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(from_json<T>(arr[i], child(child(path, key), i)));
  }
  return out;
}

template <typename T>
std::optional<T> get_optional(const Json& j, std::string_view key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (v.is_null()) return std::nullopt;
  return from_json<T>(v, child(path, key));
}

}  // namespace

Json to_json(const RelationshipState& v) {
  Json j = Json::object();
  j["conflict"] = token_json(v.conflict);
  j["repair_outcome"] = token_json(v.repair_outcome);
  j["clarity"] = token_json(v.clarity);
  j["constraints"] = token_json(v.constraints);
  j["alternatives"] = token_json(v.alternatives);
  j["transition"] = token_json(v.transition);
  j["network"] = token_json(v.network);
  j["breakup_marker"] = token_json(v.breakup_marker);
  return j;
}

Json to_json(const SceneState& v) {
  Json j = Json::object();
  j["theme"] = v.theme;
  j["setting"] = v.setting;
  j["NPC"] = strings_json(v.npcs);
  j["current_scene"] = v.current_scene;
  j["previous_summary"] = v.previous_summary;
  j["character_1_goal"] = v.character_1_goal;
  j["character_2_goal"] = v.character_2_goal;
  j["scene_conflict"] = v.scene_conflict;
  return j;
}

Json to_json(const AffectVector& v) {
  Json j = Json::object();
  for (std::size_t i = 0; i < kAffectDims; ++i) j[std::string(kAffectNames[i])] = v[i];
  return j;
}

Json to_json(const PlaybookRule& v) {
  return Json{{"condition", v.condition}, {"action", v.action}};
}

Json to_json(const InstrumentSynopsis& v) {
  Json j = Json::object();
  j["kind"] = token_json(v.kind);
  j["reporter"] = token_json(v.reporter);
  j["text"] = v.text;
  j["evidence"] = strings_json(v.evidence);
  return j;
}

Json to_json(const Persona& v) {
  Json j = Json::object();
  j["narrative"] = v.narrative;
  j["playbook"] = array_of(v.playbook, [](const PlaybookRule& r) { return to_json(r); });
  j["source_synopses"] =
      array_of(v.source_synopses, [](const InstrumentSynopsis& s) { return to_json(s); });
  return j;
}

Json to_json(const MemoryEntry& v) {
  Json j = Json::object();
  j["id"] = v.id;
  j["layer"] = token_json(v.layer);
  j["text"] = v.text;
  j["semantic_embedding"] = v.semantic_embedding;
  j["affect_embedding"] = to_json(v.affect_embedding);
  j["created_at_scene"] = v.created_at_scene ? Json(*v.created_at_scene) : Json(nullptr);
  return j;
}

Json to_json(const RelationshipMetrics& v) {
  return Json{{"dedication", v.dedication},
              {"alternatives", v.alternatives},
              {"investments", v.investments}};
}

Json to_json(const Option& v) {
  return Json{{"id", v.id}, {"description", v.description}, {"actor", token_json(v.actor)}};
}

Json to_json(const OptionSet& v) {
  Json j = Json::object();
  j["acting_partner"] = token_json(v.acting_partner);
  j["options"] = array_of(v.options, [](const Option& o) { return to_json(o); });
  return j;
}

Json to_json(const CommitmentEstimate& v) {
  Json j = Json::object();
  j["score"] = v.score;
  j["rationale"] = v.rationale;
  j["evidence_refs"] = strings_json(v.evidence_refs);
  return j;
}

Json to_json(const SceneEvent& v) {
  Json j = Json::object();
  j["id"] = v.id;
  j["kind"] = token_json(v.kind);
  j["actor"] = v.actor ? token_json(*v.actor) : Json(nullptr);
  j["text"] = v.text;
  return j;
}

Json to_json(const Decision& v) {
  Json j = Json::object();
  j["actor"] = token_json(v.actor);
  j["chosen_option_id"] = v.chosen_option_id;
  j["action_text"] = v.action_text;
  j["reasoning"] = v.reasoning;
  j["confidence"] = v.confidence ? Json(*v.confidence) : Json(nullptr);
  j["emotion_tags"] = v.emotion_tags ? strings_json(*v.emotion_tags) : Json(nullptr);
  j["by_human"] = v.by_human;
  j["shadow_option_id"] = v.shadow_option_id ? Json(*v.shadow_option_id) : Json(nullptr);
  j["prompt"] = v.prompt;
  return j;
}

Json to_json(const SceneRecord& v) {
  Json j = Json::object();
  j["index"] = v.index;
  j["category"] = token_json(v.category);
  j["confirmed_category"] = v.confirmed_category ? token_json(*v.confirmed_category) : Json(nullptr);
  j["scenario_id"] = v.scenario_id;
  j["scene_state"] = to_json(v.scene_state);
  j["stakes"] = v.stakes;
  j["third_party"] = v.third_party ? Json(*v.third_party) : Json(nullptr);
  j["transcript"] = array_of(v.transcript, [](const SceneEvent& e) { return to_json(e); });
  j["option_sets"] = array_of(v.option_sets, [](const OptionSet& o) { return to_json(o); });
  j["decisions"] = array_of(v.decisions, [](const Decision& d) { return to_json(d); });
  j["inferred_state"] = to_json(v.inferred_state);
  j["commitment"] = to_json(v.commitment);
  j["rolling_summary"] = v.rolling_summary;
  j["llm_call_count"] = v.llm_call_count;
  j["metrics"] = Json{{"A", to_json(v.metrics[0])}, {"B", to_json(v.metrics[1])}};
  j["warnings"] = strings_json(v.warnings);
  return j;
}

Json to_json(const SimulationConfig& v) {
  Json j = Json::object();
  j["num_scenes"] = v.num_scenes;
  j["candidates_per_scene"] = v.candidates_per_scene;
  j["retrieval_k"] = v.retrieval_k;
  j["affect_lambda"] = v.affect_lambda;
  j["max_narration_steps"] = v.max_narration_steps;
  j["max_decisions_per_scene"] = v.max_decisions_per_scene;
  j["summary_word_cap"] = v.summary_word_cap;
  j["log_prompts"] = v.log_prompts;
  return j;
}

Json to_json(const Dyad& v) {
  Json j = Json::object();
  j["dyad_id"] = v.dyad_id;
  j["a"] = to_json(v.a);
  j["b"] = to_json(v.b);
  j["identity_memories_a"] = strings_json(v.identity_memories_a);
  j["identity_memories_b"] = strings_json(v.identity_memories_b);
  return j;
}

template <>
RelationshipState from_json<RelationshipState>(const Json& j, const std::string& path) {
  RelationshipState s;
  s.conflict = get_token<Conflict>(j, "conflict", path);
  s.repair_outcome = get_token<RepairOutcome>(j, "repair_outcome", path);
  s.clarity = get_token<Clarity>(j, "clarity", path);
  s.constraints = get_token<Constraints>(j, "constraints", path);
  s.alternatives = get_token<Alternatives>(j, "alternatives", path);
  s.transition = get_token<Transition>(j, "transition", path);
  s.network = get_token<Network>(j, "network", path);
  s.breakup_marker = get_token<BreakupMarker>(j, "breakup_marker", path);
  return s;
}

template <>
SceneState from_json<SceneState>(const Json& j, const std::string& path) {
  SceneState s;
  s.theme = get_string(j, "theme", path);
  s.setting = get_string(j, "setting", path);
  s.npcs = get_strings(j, "NPC", path);
  s.current_scene = get_string(j, "current_scene", path);
  s.previous_summary = get_string(j, "previous_summary", path);
  s.character_1_goal = get_string(j, "character_1_goal", path);
  s.character_2_goal = get_string(j, "character_2_goal", path);
  s.scene_conflict = get_string(j, "scene_conflict", path);
  return s;
}

template <>
AffectVector from_json<AffectVector>(const Json& j, const std::string& path) {
  std::array<double, kAffectDims> values{};
  for (std::size_t i = 0; i < kAffectDims; ++i) {
    values[i] = get_number(j, kAffectNames[i], path);
  }
  try {
    return AffectVector(values);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
}

template <>
PlaybookRule from_json<PlaybookRule>(const Json& j, const std::string& path) {
  return {get_string(j, "condition", path), get_string(j, "action", path)};
}

template <>
InstrumentSynopsis from_json<InstrumentSynopsis>(const Json& j, const std::string& path) {
  InstrumentSynopsis s;
  s.kind = get_token<InstrumentKind>(j, "kind", path);
  s.reporter = get_token<Reporter>(j, "reporter", path);
  s.text = get_string(j, "text", path);
  s.evidence = get_strings(j, "evidence", path);
  return s;
}

template <>
Persona from_json<Persona>(const Json& j, const std::string& path) {
  Persona p;
  p.narrative = get_string(j, "narrative", path);
  p.playbook = get_list<PlaybookRule>(j, "playbook", path);
  p.source_synopses = get_list<InstrumentSynopsis>(j, "source_synopses", path);
  return p;
}

template <>
MemoryEntry from_json<MemoryEntry>(const Json& j, const std::string& path) {
  MemoryEntry m;
  m.id = get_string(j, "id", path);
  m.layer = get_token<MemoryLayer>(j, "layer", path);
  m.text = get_string(j, "text", path);
  const auto& emb = get_array(j, "semantic_embedding", path);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (!emb[i].is_number()) {
      throw SchemaError(child(child(path, "semantic_embedding"), i), "expected number");
    }
    m.semantic_embedding.push_back(emb[i].get<double>());
  }
  m.affect_embedding = from_json<AffectVector>(require(j, "affect_embedding", path),
                                               child(path, "affect_embedding"));
  const auto& scene = require(j, "created_at_scene", path);
  if (!scene.is_null()) m.created_at_scene = static_cast<int>(get_int(j, "created_at_scene", path));
  return m;
}

template <>
RelationshipMetrics from_json<RelationshipMetrics>(const Json& j, const std::string& path) {
  return {get_number(j, "dedication", path), get_number(j, "alternatives", path),
          get_number(j, "investments", path)};
}

template <>
Option from_json<Option>(const Json& j, const std::string& path) {
  return {get_string(j, "id", path), get_string(j, "description", path),
          get_token<Partner>(j, "actor", path)};
}

template <>
OptionSet from_json<OptionSet>(const Json& j, const std::string& path) {
  OptionSet s;
  s.acting_partner = get_token<Partner>(j, "acting_partner", path);
  s.options = get_list<Option>(j, "options", path);
  return s;
}

template <>
CommitmentEstimate from_json<CommitmentEstimate>(const Json& j, const std::string& path) {
  CommitmentEstimate c;
  c.score = get_number(j, "score", path);
  c.rationale = get_string(j, "rationale", path);
  c.evidence_refs = get_strings(j, "evidence_refs", path);
  return c;
}

template <>
SceneEvent from_json<SceneEvent>(const Json& j, const std::string& path) {
  SceneEvent e;
  e.id = get_string(j, "id", path);
  e.kind = get_token<EventKind>(j, "kind", path);
  if (!require(j, "actor", path).is_null()) e.actor = get_token<Partner>(j, "actor", path);
  e.text = get_string(j, "text", path);
  return e;
}

template <>
Decision from_json<Decision>(const Json& j, const std::string& path) {
  Decision d;
  d.actor = get_token<Partner>(j, "actor", path);
  d.chosen_option_id = get_string(j, "chosen_option_id", path);
  d.action_text = get_string(j, "action_text", path);
  d.reasoning = get_string(j, "reasoning", path);
  if (!require(j, "confidence", path).is_null()) d.confidence = get_number(j, "confidence", path);
  if (!require(j, "emotion_tags", path).is_null()) d.emotion_tags = get_strings(j, "emotion_tags", path);
  d.by_human = get_bool(j, "by_human", path);
  if (!require(j, "shadow_option_id", path).is_null()) {
    d.shadow_option_id = get_string(j, "shadow_option_id", path);
  }
  d.prompt = get_string(j, "prompt", path);
  return d;
}

template <>
SceneRecord from_json<SceneRecord>(const Json& j, const std::string& path) {
  SceneRecord r;
  r.index = static_cast<int>(get_int(j, "index", path));
  r.category = get_token<TurningPointCategory>(j, "category", path);
  if (!require(j, "confirmed_category", path).is_null()) {
    r.confirmed_category = get_token<TurningPointCategory>(j, "confirmed_category", path);
  }
  r.scenario_id = get_string(j, "scenario_id", path);
  r.scene_state = from_json<SceneState>(require(j, "scene_state", path), child(path, "scene_state"));
  r.stakes = get_string(j, "stakes", path);
  if (!require(j, "third_party", path).is_null()) r.third_party = get_string(j, "third_party", path);
  r.transcript = get_list<SceneEvent>(j, "transcript", path);
  r.option_sets = get_list<OptionSet>(j, "option_sets", path);
  r.decisions = get_list<Decision>(j, "decisions", path);
  r.inferred_state =
      from_json<RelationshipState>(require(j, "inferred_state", path), child(path, "inferred_state"));
  r.commitment =
      from_json<CommitmentEstimate>(require(j, "commitment", path), child(path, "commitment"));
  r.rolling_summary = get_string(j, "rolling_summary", path);
  r.llm_call_count = static_cast<int>(get_int(j, "llm_call_count", path));
  const auto& metrics = require(j, "metrics", path);
  const auto mpath = child(path, "metrics");
  r.metrics[0] = from_json<RelationshipMetrics>(require(metrics, "A", mpath), child(mpath, "A"));
  r.metrics[1] = from_json<RelationshipMetrics>(require(metrics, "B", mpath), child(mpath, "B"));
  r.warnings = get_strings(j, "warnings", path);
  return r;
}

template <>
SimulationConfig from_json<SimulationConfig>(const Json& j, const std::string& path) {
  SimulationConfig c;
  c.num_scenes = static_cast<int>(get_int(j, "num_scenes", path));
  c.candidates_per_scene = static_cast<std::size_t>(get_int(j, "candidates_per_scene", path));
  c.retrieval_k = static_cast<std::size_t>(get_int(j, "retrieval_k", path));
  c.affect_lambda = get_number(j, "affect_lambda", path);
  c.max_narration_steps = static_cast<int>(get_int(j, "max_narration_steps", path));
  c.max_decisions_per_scene = static_cast<int>(get_int(j, "max_decisions_per_scene", path));
  c.summary_word_cap = static_cast<std::size_t>(get_int(j, "summary_word_cap", path));
  c.log_prompts = get_bool(j, "log_prompts", path);
  return c;
}

template <>
Dyad from_json<Dyad>(const Json& j, const std::string& path) {
  Dyad d;
  d.dyad_id = get_string(j, "dyad_id", path);
  d.a = from_json<Persona>(require(j, "a", path), child(path, "a"));
  d.b = from_json<Persona>(require(j, "b", path), child(path, "b"));
  if (j.contains("identity_memories_a")) d.identity_memories_a = get_strings(j, "identity_memories_a", path);
  if (j.contains("identity_memories_b")) d.identity_memories_b = get_strings(j, "identity_memories_b", path);
  return d;
}

std::string canonical_dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

inline constexpr std::string_view kTraceFormat = "relate-trace/1";

std::string serialize_trace(const SimulationTrace& t) {
  std::string out;
  Json header = Json::object();
  header["record"] = "header";
  header["format"] = kTraceFormat;
  header["dyad_id"] = t.dyad_id;
  header["run_index"] = t.run_index;
  header["run_seed"] = t.run_seed;
  header["config"] = to_json(t.config);
  header["persona_a"] = to_json(t.persona_a);
  header["persona_b"] = to_json(t.persona_b);
  out += canonical_dump(header);
  out += '\n';
  for (const auto& scene : t.scenes) {
    Json line = Json::object();
    line["record"] = "scene";
    const Json body = to_json(scene);
    for (const auto& [key, value] : body.items()) line[key] = value;
    out += canonical_dump(line);
    out += '\n';
  }
  Json footer = Json::object();
  footer["record"] = "footer";
  footer["final_commitment"] = t.final_commitment ? to_json(*t.final_commitment) : Json(nullptr);
  footer["terminated_early"] = t.terminated_early;
  footer["termination_reason"] = t.termination_reason;
  footer["valid"] = t.valid;
  footer["error"] = t.error;
  out += canonical_dump(footer);
  out += '\n';
  return out;
}

SimulationTrace parse_trace(std::string_view text) {
  std::vector<Json> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty()) {
      const auto path = "/line/" + std::to_string(lines.size() + 1);
      try {
        lines.push_back(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw SchemaError(path, std::string("invalid JSON: ") + e.what());
      }
    }
    start = end + 1;
  }
  if (lines.size() < 2) throw SchemaError("", "trace needs a header and a footer line");

  const auto record_of = [](const Json& j, const std::string& path) {
    return get_string(j, "record", path);
  };

  SimulationTrace t;
  const Json& header = lines.front();
  if (record_of(header, "/line/1") != "header") throw SchemaError("/line/1", "expected header record");
  if (get_string(header, "format", "/line/1") != kTraceFormat) {
    throw SchemaError("/line/1/format", "unsupported trace format");
  }
  t.dyad_id = get_string(header, "dyad_id", "/line/1");
  t.run_index = static_cast<int>(get_int(header, "run_index", "/line/1"));
  const auto& seed = require(header, "run_seed", "/line/1");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw SchemaError("/line/1/run_seed", "expected integer");
  }
  t.run_seed = seed.get<std::uint64_t>();
  t.config = from_json<SimulationConfig>(require(header, "config", "/line/1"), "/line/1/config");
  t.persona_a = from_json<Persona>(require(header, "persona_a", "/line/1"), "/line/1/persona_a");
  t.persona_b = from_json<Persona>(require(header, "persona_b", "/line/1"), "/line/1/persona_b");

  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const auto path = "/line/" + std::to_string(i + 1);
    if (record_of(lines[i], path) != "scene") throw SchemaError(path, "expected scene record");
    t.scenes.push_back(from_json<SceneRecord>(lines[i], path));
  }

  const auto fpath = "/line/" + std::to_string(lines.size());
  const Json& footer = lines.back();
  if (record_of(footer, fpath) != "footer") throw SchemaError(fpath, "expected footer record");
  t.final_commitment = get_optional<CommitmentEstimate>(footer, "final_commitment", fpath);
  t.terminated_early = get_bool(footer, "terminated_early", fpath);
  t.termination_reason = get_string(footer, "termination_reason", fpath);
  t.valid = get_bool(footer, "valid", fpath);
  t.error = get_string(footer, "error", fpath);
  return t;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_persona(const Persona& p, const std::string& path, ValidationReport& report) {
  const auto n = p.playbook.size();
  if (n < kMinPlaybookRules || n > kMaxPlaybookRules) {
    report.violations.push_back(
        {path + "/playbook", "playbook length " + std::to_string(n) + " ∉ [5,7]"});
  }
  for (std::size_t i = 0; i < p.playbook.size(); ++i) {
    if (p.playbook[i].condition.empty() || p.playbook[i].action.empty()) {
      report.violations.push_back({child(path + "/playbook", i), "rule with empty condition or action"});
    }
  }
}

bool in_commitment_range(double score) {
  return std::isfinite(score) && score >= kMinCommitment && score <= kMaxCommitment;
}

}  // namespace

ValidationReport validate_trace(const SimulationTrace& t) {
  ValidationReport report;
  auto violation = [&](std::string path, std::string message) {
    report.violations.push_back({std::move(path), std::move(message)});
  };

  if (!t.valid) violation("/valid", "run aborted: " + t.error);
  if (t.dyad_id.empty()) violation("/dyad_id", "empty dyad id");
  check_persona(t.persona_a, "/persona_a", report);
  check_persona(t.persona_b, "/persona_b", report);

  std::string previous_summary;
  const RelationshipState* previous_state = nullptr;
  for (std::size_t si = 0; si < t.scenes.size(); ++si) {
    const auto& scene = t.scenes[si];
    const auto path = child("/scenes", si);

    if (scene.index != static_cast<int>(si)) {
      violation(path + "/index", "scene index " + std::to_string(scene.index) + " out of sequence");
    }
    if (scene.scene_state.scene_conflict.empty()) {
      violation(path + "/scene_state/scene_conflict", "empty scene conflict");
    }
    if (scene.scene_state.previous_summary != previous_summary) {
      violation(path + "/scene_state/previous_summary",
                si == 0 ? "first scene must start with an empty summary"
                        : "does not match previous scene's rolling summary");
    }
    previous_summary = scene.rolling_summary;

    for (std::size_t oi = 0; oi < scene.option_sets.size(); ++oi) {
      for (auto& problem : option_set_problems(scene.option_sets[oi])) {
        violation(child(path + "/option_sets", oi) + "/options", std::move(problem));
      }
    }
    if (scene.decisions.size() != scene.option_sets.size()) {
      violation(path + "/decisions", "decision count " + std::to_string(scene.decisions.size()) +
                                         " differs from option set count " +
                                         std::to_string(scene.option_sets.size()));
    }
    const auto paired = std::min(scene.decisions.size(), scene.option_sets.size());
    for (std::size_t di = 0; di < paired; ++di) {
      const auto& d = scene.decisions[di];
      const auto& set = scene.option_sets[di];
      const auto dpath = child(path + "/decisions", di);
      if (!set.find(d.chosen_option_id)) {
        violation(dpath + "/chosen_option_id",
                  "chosen option '" + d.chosen_option_id + "' not in presented option set");
      }
      if (d.actor != set.acting_partner) violation(dpath + "/actor", "decision actor is not the acting partner");
      if (d.confidence && (*d.confidence < 0.0 || *d.confidence > 1.0)) {
        violation(dpath + "/confidence", "confidence outside [0,1]");
      }
      if (d.emotion_tags) {
        for (const auto& tag : *d.emotion_tags) {
          if (!affect_index(tag)) violation(dpath + "/emotion_tags", "unknown emotion tag '" + tag + "'");
        }
      }
    }
    if (!in_commitment_range(scene.commitment.score)) {
      violation(path + "/commitment/score", "commitment outside [1,5]");
    }
    for (std::size_t p = 0; p < 2; ++p) {
      const auto& m = scene.metrics[p];
      if (!(m == m.clamped())) violation(path + "/metrics", "relationship metrics outside [0,1]");
    }
    if (scene.llm_call_count < 0) violation(path + "/llm_call_count", "negative call count");

    if (previous_state && previous_state->constraints == Constraints::Accrued &&
        scene.inferred_state.constraints == Constraints::None &&
        scene.inferred_state.breakup_marker == BreakupMarker::None) {
      report.warnings.push_back({path + "/inferred_state/constraints",
                                 "constraints stepped back from accrued to none without a breakup marker"});
    }
    previous_state = &scene.inferred_state;
  }

  if (!t.scenes.empty()) {
    if (!t.final_commitment) {
      violation("/final_commitment", "missing final commitment");
    } else if (!(*t.final_commitment == t.scenes.back().commitment)) {
      violation("/final_commitment", "final commitment differs from last scene's estimate");
    }
  } else if (t.valid) {
    violation("/scenes", "trace has no scenes");
  }
  if (t.final_commitment && !in_commitment_range(t.final_commitment->score)) {
    violation("/final_commitment/score", "commitment outside [1,5]");
  }
  return report;
}

ValidationReport validate_trace_text(std::string_view text) {
  try {
    return validate_trace(parse_trace(text));
  } catch (const SchemaError& e) {
    ValidationReport report;
    report.violations.push_back({e.path(), e.what()});
    return report;
  }
}

}  // namespace relate
