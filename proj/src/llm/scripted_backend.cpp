// SPDX-License-Identifier: Apache-2.0

#include "relate/llm/scripted_backend.hpp"

#include <algorithm>

namespace relate::llm {

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::size_t dimension,
                                 std::uint64_t embed_seed)
    : embedder_(dimension, embed_seed) {
  for (auto& rule : rules) {
    if (rule.role_tag.empty()) throw ConfigError("script rule without role_tag");
    rules_.push_back({std::move(rule), 0});
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const Json& script,
                                                            std::size_t dimension,
                                                            std::uint64_t embed_seed) {
  if (!script.is_array()) throw ConfigError("script must be a JSON array of rules");
  std::vector<ScriptRule> rules;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& r = script[i];
    const auto where = "script rule " + std::to_string(i);
    if (!r.is_object() || !r.contains("role_tag") || !r["role_tag"].is_string()) {
      throw ConfigError(where + ": needs a string role_tag");
    }
    ScriptRule rule;
    rule.role_tag = r["role_tag"].get<std::string>();
    if (r.contains("contains") && !r["contains"].is_null()) {
      if (!r["contains"].is_string()) throw ConfigError(where + ": 'contains' must be a string");
      rule.contains = r["contains"].get<std::string>();
    }
    if (!r.contains("responses") || !r["responses"].is_array()) {
      throw ConfigError(where + ": needs a 'responses' array");
    }
    for (const auto& resp : r["responses"]) {
      rule.responses.push_back(resp.is_string() ? resp.get<std::string>() : canonical_dump(resp));
    }
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedBackend>(std::move(rules), dimension, embed_seed);
}

Completion ScriptedBackend::complete(const PromptSpec& spec, const std::string&) {
  std::lock_guard lock(mutex_);
  calls_.push_back({spec.role_tag, spec.render()});

  const auto matches = [&](const ScriptRule& rule) {
    if (rule.role_tag != spec.role_tag) return false;
    if (!rule.contains) return true;
    return std::any_of(spec.sections.begin(), spec.sections.end(), [&](const PromptSection& s) {
      return s.text.find(*rule.contains) != std::string::npos;
    });
  };

  bool matched = false;
  for (auto& cursor : rules_) {
    if (!matches(cursor.rule)) continue;
    matched = true;
    if (cursor.next < cursor.rule.responses.size()) {
      return {cursor.rule.responses[cursor.next++], {}};
    }
    if (cursor.rule.responder) return {cursor.rule.responder(spec), {}};
  }
  if (matched) {
    throw ScriptError("script exhausted for role_tag '" + spec.role_tag + "' (sections digest " +
                      spec.sections_digest() + ")");
  }
  throw ScriptError("no script rule matched role_tag '" + spec.role_tag + "' (sections digest " +
                    spec.sections_digest() + ")");
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::size_t ScriptedBackend::call_count(std::string_view role_tag) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(
      calls_.begin(), calls_.end(), [&](const ScriptedCall& c) { return c.role_tag == role_tag; }));
}

std::vector<ScriptedCall> ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& c : rules_) n += c.rule.responses.size() - c.next;
  return n;
}

}  // namespace relate::llm
