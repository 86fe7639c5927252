// SPDX-License-Identifier: Apache-2.0

#include "relate/agent.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"
#include "relate/llm/schemas.hpp"

namespace relate::agent {

Json to_json(const AgentState& agent) {
  Json j = Json::object();
  j["partner"] = std::string(to_token(agent.partner));
  j["persona"] = relate::to_json(agent.persona);
  j["memory"] = agent.memory.snapshot();
  Json history = Json::array();
  for (const auto& e : agent.history) history.push_back(relate::to_json(e));
  j["history"] = std::move(history);
  j["affect"] = relate::to_json(agent.affect);
  j["metrics"] = relate::to_json(agent.metrics);
  j["last_internal_thought"] = agent.last_internal_thought;
  return j;
}

AgentState agent_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  for (const char* key :
       {"partner", "persona", "memory", "history", "affect", "metrics", "last_internal_thought"}) {
    if (!j.contains(key)) throw SchemaError(path + "/" + key, "missing field");
  }
  AgentState a;
  a.partner = parse_token_or_throw<Partner>(j["partner"].get<std::string>(), path + "/partner");
  a.persona = from_json<Persona>(j["persona"], path + "/persona");
  a.memory = memory::MemoryStore::from_snapshot(j["memory"], path + "/memory");
  for (std::size_t i = 0; i < j["history"].size(); ++i) {
    a.history.push_back(from_json<SceneEvent>(j["history"][i], fmt::format("{}/history/{}", path, i)));
  }
  a.affect = from_json<AffectVector>(j["affect"], path + "/affect");
  a.metrics = from_json<RelationshipMetrics>(j["metrics"], path + "/metrics");
  a.last_internal_thought = j["last_internal_thought"].get<std::string>();
  return a;
}

namespace {

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    const bool terminal = text[i] == '.' || text[i] == '!' || text[i] == '?';
    const bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (terminal && boundary) {
      auto trimmed = trim(current);
      if (!trimmed.empty()) out.push_back(std::move(trimmed));
      current.clear();
    }
  }
  auto trimmed = trim(current);
  if (!trimmed.empty()) out.push_back(std::move(trimmed));
  return out;
}

}  // namespace

std::vector<std::string> identity_texts(const Persona& persona,
                                        const std::vector<std::string>& extra) {
  std::vector<std::string> out;
  const auto sentences = split_sentences(persona.narrative);
  for (std::size_t i = 0; i < sentences.size(); i += 2) {
    std::string chunk = sentences[i];
    if (i + 1 < sentences.size()) chunk += " " + sentences[i + 1];
    out.push_back(std::move(chunk));
  }
  for (const auto& rule : persona.playbook) {
    out.push_back(fmt::format("{} -> {}", rule.condition, rule.action));
  }
  for (const auto& e : extra) {
    if (!e.empty()) out.push_back(e);
  }
  return out;
}

AgentState make_agent(llm::Gateway& gateway, memory::AffectEmbedder& embedder, Partner partner,
                      const Persona& persona, const std::vector<std::string>& extra_memories,
                      Warnings& warnings) {
  AgentState agent;
  agent.partner = partner;
  agent.persona = persona;
  agent.memory = memory::MemoryStore(gateway.embedding_dimension());
  for (const auto& text : identity_texts(persona, extra_memories)) {
    memory::add_identity(gateway, embedder, agent.memory, text, warnings);
  }
  return agent;
}

// ---------------------------------------------------------------------------

llm::PromptSpec assemble_decision_prompt(const Persona& persona, std::string_view scene_history,
                                         const memory::RetrievalResult& retrieved,
                                         std::string_view internal_thought,
                                         const OptionSet& options) {
  std::string persona_text = persona.narrative;
  if (!persona.playbook.empty()) {
    persona_text += "\nPlaybook:";
    for (const auto& rule : persona.playbook) {
      persona_text += fmt::format("\n- {} -> {}", rule.condition, rule.action);
    }
  }

  std::string memories;
  if (retrieved.empty()) {
    memories = "(empty: no memories retrieved)";
  } else {
    for (const auto& r : retrieved) memories += fmt::format("- {}\n", r.entry.text);
    memories.pop_back();
  }

  std::string option_lines;
  for (const auto& o : options.options) option_lines += fmt::format("{}: {}\n", o.id, o.description);
  if (!option_lines.empty()) option_lines.pop_back();

  llm::PromptSpec spec;
  spec.role_tag = "decision";
  spec.response_schema = std::string(llm::schema::kDecision);
  spec.temperature = 0.7;
  spec.sections = {
      {"Role", "You are currently in a romantic relationship and facing a decision."},
      {"Instructions",
       "- Carefully review the list of candidate actions. Do not invent or modify options; choose "
       "only from those provided.\n"
       "- Select the action that best fits the character's personality traits, current "
       "motivations, and the central conflict of the scene.\n"
       "- Consider the character's recent history and prior events. Ensure your choice maintains "
       "narrative continuity and does not contradict what has already happened.\n"
       "- Do not include dialogue, internal monologue, or describe future actions by other "
       "characters. Focus on a concrete, external action that can be enacted in the next scene."},
      {"Selection Criteria",
       "Use qualitative judgment, not numeric scoring.\n"
       "- Relevance to the current scene conflict\n"
       "- Consistency with the character's personality, goals, and constraints\n"
       "- Likelihood to cause a meaningful state change (e.g., in trust, closeness, autonomy, "
       "conflict intensity, commitment, resources, or reputation)\n"
       "- Plausibility and reversibility within the story context"},
      {"Most Recent Internal Thought",
       internal_thought.empty() ? std::string("(none)") : std::string(internal_thought)},
      {"Your Persona", persona_text},
      {"Scene History", std::string(scene_history)},
      {"Relevant Memories", memories},
      {"Action Options", option_lines},
      {"Output",
       "Output the result as a valid dictionary in the following format.\n"
       "Do not include any other strings or literals:\n"
       "{\n"
       "\"action\": \"<option id>: realistic, personality-based next action with tone\",\n"
       "\"reasoning\": \"why was this action chosen\"\n"
       "}\n"
       "Optionally add \"confidence\" (0 to 1) and \"emotion_tags\" (a list drawn from: joy, "
       "sadness, fear, surprise, anger, disgust, trust, anticipation)."},
  };
  return spec;
}

// ---------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double token_jaccard(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  const std::set<std::string> sa(ta.begin(), ta.end());
  const std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : sa) shared += sb.count(t);
  return static_cast<double>(shared) / static_cast<double>(sa.size() + sb.size() - shared);
}

std::optional<std::string> match_option(const OptionSet& options, std::string_view action,
                                        double threshold) {
  const auto trimmed = trim(action);
  for (const auto& o : options.options) {
    if (trimmed == o.id) return o.id;
    if (trimmed.size() > o.id.size() && trimmed.compare(0, o.id.size(), o.id) == 0) {
      const char next = trimmed[o.id.size()];
      if (next == ':' || next == ' ' || next == ')' || next == '.') return o.id;
    }
  }
  // "o2: text" whose id is not in the set must not fall through to overlap on
  // the id token, so strip a leading id-like token before comparing text.
  std::string_view body = trimmed;
  if (auto colon = body.find(':'); colon != std::string_view::npos && colon <= 4) {
    body.remove_prefix(colon + 1);
  }
  std::optional<std::string> best;
  double best_score = threshold;
  for (const auto& o : options.options) {
    const double score = token_jaccard(body, o.description);
    if (score >= best_score && (!best || score > best_score)) {
      best = o.id;
      best_score = score;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

Decision decide(llm::Gateway& gateway, AgentState& agent, std::string_view scene_context,
                const OptionSet& options, const DecideParams& params, Warnings& warnings) {
  if (agent.partner != options.acting_partner) {
    throw std::invalid_argument(fmt::format("agent {} asked to decide for partner {}",
                                            to_token(agent.partner),
                                            to_token(options.acting_partner)));
  }
  if (auto problems = option_set_problems(options); !problems.empty()) {
    throw std::invalid_argument("invalid option set: " + problems.front());
  }

  auto appraisal = memory::appraise(gateway, agent.persona, agent.history, scene_context, warnings);
  agent.affect = appraisal.affect;
  agent.last_internal_thought = appraisal.internal_thought;

  const auto retrieved = memory::retrieve_top_k(gateway, agent.memory, scene_context, agent.affect,
                                                params.k, params.lambda);
  auto spec = assemble_decision_prompt(agent.persona, scene_context, retrieved,
                                       agent.last_internal_thought, options);
  spec.seed = stable_hash64(spec.render());

  const std::string rendered = params.log_prompt ? spec.render() : std::string();
  std::string last_action;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = gateway.chat(spec);
    if (!reply.ok()) throw DecisionError("decision reply never validated: " + reply.parse_error);
    const auto& r = *reply.parsed;
    last_action = r["action"].get<std::string>();
    auto chosen = match_option(options, last_action);
    if (!chosen) {
      spdlog::debug("decision action matched no option: {}", last_action);
      spec.sections.push_back(
          {"Invalid Choice",
           "Your previous action \"" + last_action +
               "\" does not match any listed option. Choose exactly one of the Action Options "
               "and begin \"action\" with its id."});
      continue;
    }

    Decision d;
    d.actor = agent.partner;
    d.chosen_option_id = *chosen;
    d.action_text = last_action;
    d.reasoning = r["reasoning"].get<std::string>();
    if (r.contains("confidence") && !r["confidence"].is_null()) {
      double c = r["confidence"].get<double>();
      if (c < 0.0 || c > 1.0) {
        warnings.push_back(fmt::format("decision confidence {} outside [0,1], clamped", c));
        c = std::clamp(c, 0.0, 1.0);
      }
      d.confidence = c;
    }
    if (r.contains("emotion_tags") && !r["emotion_tags"].is_null()) {
      std::vector<std::string> tags;
      for (const auto& t : r["emotion_tags"]) {
        auto tag = t.get<std::string>();
        if (affect_index(tag)) {
          tags.push_back(std::move(tag));
        } else {
          warnings.push_back("dropped unknown emotion tag '" + tag + "'");
        }
      }
      d.emotion_tags = std::move(tags);
    }
    d.prompt = rendered;
    return d;
  }
  throw DecisionError("decision matched no presented option after retry: \"" + last_action + "\"");
}

RelationshipMetrics update_metrics(const RelationshipMetrics& previous, double commitment_score,
                                   const AffectVector& affect, const RelationshipState& state) {
  RelationshipMetrics m = previous;
  m.dedication = (commitment_score - kMinCommitment) / (kMaxCommitment - kMinCommitment) +
                 0.1 * (affect.get("trust") - affect.get("anger"));
  switch (state.alternatives) {
    case Alternatives::Quiet: m.alternatives = 0.0; break;
    case Alternatives::Salient: m.alternatives = 0.5; break;
    case Alternatives::Hot: m.alternatives = 1.0; break;
    case Alternatives::Unknown: break;
  }
  switch (state.constraints) {
    case Constraints::None: m.investments = 0.0; break;
    case Constraints::Emerging: m.investments = 0.5; break;
    case Constraints::Accrued: m.investments = 1.0; break;
    case Constraints::Unknown: break;
  }
  return m.clamped();
}

}  // namespace relate::agent
