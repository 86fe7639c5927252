// SPDX-License-Identifier: Apache-2.0

#include "relate/llm/schemas.hpp"

#include "relate/llm/gateway.hpp"

namespace relate::llm {

namespace {

using Check = std::optional<std::string>;

Check need_object(const Json& v) {
  if (!v.is_object()) return "expected a JSON object";
  return std::nullopt;
}

Check need_string(const Json& v, const char* key, bool non_empty = false) {
  auto it = v.find(key);
  if (it == v.end()) return std::string("missing field '") + key + "'";
  if (!it->is_string()) return std::string("field '") + key + "' must be a string";
  if (non_empty && it->get<std::string>().empty()) return std::string("field '") + key + "' is empty";
  return std::nullopt;
}

Check need_number(const Json& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end()) return std::string("missing field '") + key + "'";
  if (!it->is_number()) return std::string("field '") + key + "' must be a number";
  return std::nullopt;
}

Check need_bool(const Json& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end()) return std::string("missing field '") + key + "'";
  if (!it->is_boolean()) return std::string("field '") + key + "' must be a boolean";
  return std::nullopt;
}

Check optional_string_array(const Json& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) return std::string("field '") + key + "' must be an array";
  for (const auto& item : *it) {
    if (!item.is_string()) return std::string("field '") + key + "' must hold strings";
  }
  return std::nullopt;
}

Check need_string_array(const Json& v, const char* key) {
  if (!v.contains(key)) return std::string("missing field '") + key + "'";
  return optional_string_array(v, key);
}

Check optional_partner(const Json& v, const char* key) {
  auto it = v.find(key);
  if (it == v.end() || it->is_null()) return std::nullopt;
  if (!it->is_string() || !parse_token<Partner>(it->get<std::string>())) {
    return std::string("field '") + key + "' must be \"A\", \"B\" or null";
  }
  return std::nullopt;
}

template <typename... Checks>
Check first_problem(Checks... checks) {
  Check out;
  ((out = out ? out : checks), ...);
  return out;
}

Check affect_fields(const Json& v) {
  for (auto name : kAffectNames) {
    auto it = v.find(std::string(name));
    if (it != v.end() && !it->is_number()) {
      return "affect field '" + std::string(name) + "' must be a number";
    }
  }
  return std::nullopt;
}

}  // namespace

std::shared_ptr<const SchemaRegistry> SchemaRegistry::standard() {
  static const std::shared_ptr<const SchemaRegistry> registry = [] {
    auto r = std::make_shared<SchemaRegistry>();
    r->add(std::string(schema::kSynopsis), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return first_problem(need_string(v, "synopsis", true), need_string_array(v, "evidence"));
    });
    r->add(std::string(schema::kPersona), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      if (auto e = need_string(v, "narrative", true)) return e;
      auto it = v.find("playbook");
      if (it == v.end() || !it->is_array()) return "field 'playbook' must be an array";
      for (const auto& rule : *it) {
        if (!rule.is_object()) return "playbook rules must be objects";
        if (auto e = first_problem(need_string(rule, "condition"), need_string(rule, "action"))) return e;
      }
      return std::nullopt;
    });
    r->add(std::string(schema::kCommitment), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return first_problem(need_number(v, "score"), need_string(v, "rationale"),
                           optional_string_array(v, "evidence_refs"));
    });
    r->add(std::string(schema::kAffect), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return first_problem(affect_fields(v), need_string(v, "internal_thought"));
    });
    r->add(std::string(schema::kAffectScores), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return affect_fields(v);
    });
    r->add(std::string(schema::kScenarioChoice), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return need_string(v, "scenario_id", true);
    });
    r->add(std::string(schema::kSceneExpansion), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      if (auto e = first_problem(need_string(v, "theme"), need_string(v, "setting"),
                                 need_string_array(v, "NPC"), need_string(v, "current_scene", true),
                                 need_string(v, "character_1_goal", true),
                                 need_string(v, "character_2_goal", true),
                                 need_string(v, "scene_conflict", true), need_string(v, "stakes"))) {
        return e;
      }
      auto it = v.find("third_party");
      if (it != v.end() && !it->is_null() && !it->is_string()) return "field 'third_party' must be a string or null";
      return std::nullopt;
    });
    r->add(std::string(schema::kNarration), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return first_problem(need_string(v, "narration", true), need_bool(v, "stop"),
                           optional_partner(v, "acting_partner"));
    });
    r->add(std::string(schema::kOptions), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      auto it = v.find("options");
      if (it == v.end() || !it->is_array()) return "field 'options' must be an array";
      for (const auto& o : *it) {
        if (!o.is_object()) return "options must be objects";
        if (auto e = need_string(o, "description", true)) return e;
        if (auto e = optional_partner(o, "actor")) return e;
        if (!o.contains("actor") || o["actor"].is_null()) return "every option needs an actor";
      }
      return std::nullopt;
    });
    r->add(std::string(schema::kDecision), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      if (auto e = first_problem(need_string(v, "action", true), need_string(v, "reasoning"),
                                 optional_string_array(v, "emotion_tags"))) {
        return e;
      }
      auto it = v.find("confidence");
      if (it != v.end() && !it->is_null() && !it->is_number()) return "field 'confidence' must be a number";
      return std::nullopt;
    });
    r->add(std::string(schema::kStateInference), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      for (auto field : kStateFields) {
        const std::string key(field);
        if (auto e = need_string(v, key.c_str())) return e;
      }
      auto it = v.find("category");
      if (it != v.end() && !it->is_null() && !it->is_string()) return "field 'category' must be a string";
      return std::nullopt;
    });
    r->add(std::string(schema::kSummary), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      return need_string(v, "summary", true);
    });
    r->add(std::string(schema::kEndState), [](const Json& v) -> Check {
      if (auto e = need_object(v)) return e;
      if (auto e = need_string(v, "label")) return e;
      if (!parse_token<OutcomeLabel>(v["label"].get<std::string>())) {
        return "label must be one of broken_up_or_divorced, dating, engaged, married";
      }
      return std::nullopt;
    });
    return std::shared_ptr<const SchemaRegistry>(std::move(r));
  }();
  return registry;
}

}  // namespace relate::llm
