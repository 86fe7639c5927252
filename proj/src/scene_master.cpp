// SPDX-License-Identifier: Apache-2.0

#include "relate/scene_master.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"
#include "relate/llm/schemas.hpp"
#include "relate/persona.hpp"

namespace relate::scene {

// ---------------------------------------------------------------------------
// Turning-point selection

std::vector<TurningPointCategory> select_category(const RelationshipState& s, int scene_index) {
  using C = TurningPointCategory;
  std::vector<C> fired;
  if (s.all_unknown()) fired.push_back(C::InitialFormation);
  if (s.conflict == Conflict::Active || s.conflict == Conflict::Unresolved) {
    fired.push_back(C::ConflictAndRepair);
  }
  if (s.breakup_marker == BreakupMarker::Soft || s.alternatives == Alternatives::Salient ||
      s.alternatives == Alternatives::Hot) {
    fired.push_back(C::ChallengesOrTests);
  }
  if (s.transition == Transition::Upcoming || s.transition == Transition::Underway) {
    fired.push_back(C::ChallengesOrTests);
  }
  if (s.clarity == Clarity::Unclear && scene_index < 2) fired.push_back(C::InitialFormation);
  if (s.constraints == Constraints::Accrued && s.clarity == Clarity::Explicit) {
    fired.push_back(C::DeepeningOrMilestones);
  }
  if (s.network == Network::Opposed || s.network == Network::Mixed) {
    fired.push_back(C::OtherModernTurningPoints);
  }
  fired.push_back(C::RelationshipDevelopment);

  std::vector<C> out;
  auto push_unique = [&](C c) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (auto c : fired) push_unique(c);
  for (auto c : all_values<C>()) push_unique(c);
  return out;
}

std::vector<Scenario> sample_candidates(const ScenarioBank& bank, TurningPointCategory category,
                                        std::size_t n, std::uint64_t seed) {
  if (bank.empty()) throw std::invalid_argument("scenario bank is empty");
  auto pool = bank.pool(category);
  const auto take = std::min(n, pool.size());
  std::mt19937_64 rng(derive_seed(seed, {"candidates", to_token(category)}));
  // Partial Fisher-Yates on raw draws keeps the sample portable.
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<Scenario> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(*pool[i]);
  return out;
}

CandidateDraw sample_with_fallback(const ScenarioBank& bank,
                                   const std::vector<TurningPointCategory>& priority,
                                   std::size_t n, std::uint64_t seed) {
  for (auto category : priority) {
    auto candidates = sample_candidates(bank, category, n, seed);
    if (!candidates.empty()) return {category, std::move(candidates)};
    spdlog::debug("no scenarios for {}, falling back", to_token(category));
  }
  throw SceneError("no scenario available in any candidate category");
}

// ---------------------------------------------------------------------------
// Rendering helpers

namespace {

std::string render_state(const RelationshipState& state) {
  std::string out;
  for (auto field : kStateFields) {
    out += fmt::format("{}: {}\n", field, state_field_token(state, field));
  }
  out.pop_back();
  return out;
}

std::string render_frame(const ExpandedScene& scene) {
  const auto& s = scene.scene_state;
  std::string npcs;
  for (const auto& n : s.npcs) npcs += (npcs.empty() ? "" : ", ") + n;
  return fmt::format(
      "Category: {}\nTheme: {}\nSetting: {}\nNPCs: {}\nCurrent scene: {}\nPartner A goal: {}\n"
      "Partner B goal: {}\nConflict: {}\nStakes: {}\nThird party: {}",
      to_token(scene.category), s.theme, s.setting, npcs.empty() ? "(none)" : npcs,
      s.current_scene, s.character_1_goal, s.character_2_goal, s.scene_conflict, scene.stakes,
      scene.third_party.value_or("(none)"));
}

std::string previous_or_first(std::string_view previous_summary) {
  return previous_summary.empty() ? std::string("(first scene; nothing yet)")
                                  : std::string(previous_summary);
}

std::uint64_t prompt_seed(const llm::PromptSpec& spec) { return stable_hash64(spec.render()); }

}  // namespace

std::string render_transcript(const std::vector<SceneEvent>& transcript) {
  if (transcript.empty()) return "(no events yet)";
  std::string out;
  for (const auto& e : transcript) out += fmt::format("[{}] {}\n", e.id, e.text);
  out.pop_back();
  return out;
}

std::string render_scene_context(const ExpandedScene& scene,
                                 const std::vector<SceneEvent>& transcript) {
  return render_frame(scene) + "\n\nTranscript:\n" + render_transcript(transcript);
}

// ---------------------------------------------------------------------------
// Scene steps

Scenario select_scenario(llm::Gateway& gateway, const std::vector<Scenario>& candidates,
                         const Dyad& dyad, std::string_view previous_summary,
                         const RelationshipState& state, Warnings& warnings) {
  if (candidates.empty()) throw std::invalid_argument("select_scenario needs candidates");
  if (candidates.size() == 1) return candidates.front();

  std::string list;
  for (const auto& c : candidates) {
    list += fmt::format("{} [{}]: {}\n", c.id, to_token(c.category), c.synopsis);
  }
  list.pop_back();

  llm::PromptSpec spec;
  spec.role_tag = "scenario_selection";
  spec.response_schema = std::string(llm::schema::kScenarioChoice);
  spec.temperature = 0.4;
  spec.sections = {
      {"Task",
       "Pick the single candidate that best fits this couple's next turning point, given their "
       "personas, the story so far and the current relationship state. Reply with its id."},
      {"Partner A Persona", persona::render_persona(dyad.a)},
      {"Partner B Persona", persona::render_persona(dyad.b)},
      {"Relationship State", render_state(state)},
      {"Story So Far", previous_or_first(previous_summary)},
      {"Candidates", list},
      {"Output", R"({"scenario_id": "<one of the candidate ids>"})"},
  };
  spec.seed = prompt_seed(spec);

  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = gateway.chat(spec);
    std::string picked;
    if (reply.ok()) {
      picked = (*reply.parsed)["scenario_id"].get<std::string>();
      for (const auto& c : candidates) {
        if (c.id == picked) return c;
      }
    }
    spec.sections.push_back(
        {"Invalid Choice",
         "\"" + picked + "\" is not one of the candidate ids. Reply with one of them."});
  }
  warnings.push_back("scenario selection returned no valid candidate id; using " +
                     candidates.front().id);
  return candidates.front();
}

ExpandedScene expand_scene(llm::Gateway& gateway, const Scenario& scenario, const Dyad& dyad,
                           std::string_view previous_summary) {
  llm::PromptSpec spec;
  spec.role_tag = "scene_expansion";
  spec.response_schema = std::string(llm::schema::kSceneExpansion);
  spec.temperature = 0.7;
  spec.sections = {
      {"Task",
       "Expand the scenario into a concrete scene for this couple. Partner A is character 1 and "
       "Partner B is character 2. Add synthetic but concrete details: stakes, setting, relevant "
       "history and any third party involved. Fill every field; scene_conflict must name the "
       "tension the partners face."},
      {"Scenario", fmt::format("{} [{}]: {}", scenario.id, to_token(scenario.category),
                               scenario.synopsis)},
      {"Partner A Persona", persona::render_persona(dyad.a)},
      {"Partner B Persona", persona::render_persona(dyad.b)},
      {"Previous Summary", previous_or_first(previous_summary)},
      {"Output",
       R"({"theme": "...", "setting": "...", "NPC": ["..."], "current_scene": "...", )"
       R"("character_1_goal": "...", "character_2_goal": "...", "scene_conflict": "...", )"
       R"("stakes": "...", "third_party": null})"},
  };
  spec.seed = prompt_seed(spec);
  auto reply = gateway.chat(spec);
  if (!reply.ok()) {
    throw SceneError("scene expansion for '" + scenario.id + "' failed: " + reply.parse_error);
  }
  const auto& r = *reply.parsed;
  ExpandedScene scene;
  scene.source_scenario_id = scenario.id;
  scene.category = scenario.category;
  auto& s = scene.scene_state;
  s.theme = r["theme"].get<std::string>();
  s.setting = r["setting"].get<std::string>();
  s.npcs = r["NPC"].get<std::vector<std::string>>();
  s.current_scene = r["current_scene"].get<std::string>();
  s.previous_summary = std::string(previous_summary);
  s.character_1_goal = r["character_1_goal"].get<std::string>();
  s.character_2_goal = r["character_2_goal"].get<std::string>();
  s.scene_conflict = r["scene_conflict"].get<std::string>();
  scene.stakes = r["stakes"].get<std::string>();
  if (r.contains("third_party") && r["third_party"].is_string() &&
      !r["third_party"].get<std::string>().empty()) {
    scene.third_party = r["third_party"].get<std::string>();
  }
  return scene;
}

NarrationStep advance_narrative(llm::Gateway& gateway, const ExpandedScene& scene,
                                const std::vector<SceneEvent>& transcript,
                                const NarrationProgress& progress) {
  llm::PromptSpec spec;
  spec.role_tag = "narration";
  spec.response_schema = std::string(llm::schema::kNarration);
  spec.temperature = 0.8;
  spec.sections = {
      {"Task",
       "Continue the scene with one short narration beat (1-3 sentences, third person). Never "
       "decide for the partners. When the story reaches a point where one partner must act, set "
       "stop to true and name that partner in acting_partner. When the scene has reached its "
       "natural end, set stop to true and acting_partner to null."},
      {"Scene", render_frame(scene)},
      {"Transcript", render_transcript(transcript)},
      {"Progress", fmt::format("decision_points={} of {}; narration_steps={} of {}",
                               progress.decision_points, progress.max_decision_points,
                               progress.steps_since_decision, progress.max_steps)},
      {"Output", R"({"narration": "...", "stop": false, "acting_partner": null})"},
  };
  spec.seed = prompt_seed(spec);
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw SceneError("narration failed: " + reply.parse_error);
  const auto& r = *reply.parsed;
  NarrationStep step;
  step.narration = r["narration"].get<std::string>();
  step.stop = r["stop"].get<bool>();
  if (step.stop && r.contains("acting_partner") && r["acting_partner"].is_string()) {
    step.acting_partner = parse_token<Partner>(r["acting_partner"].get<std::string>());
  }
  return step;
}

OptionSet generate_options(llm::Gateway& gateway, const ExpandedScene& scene,
                           const std::vector<SceneEvent>& transcript,
                           const RelationshipState& state, Partner acting_partner) {
  const auto actor = std::string(to_token(acting_partner));
  llm::PromptSpec spec;
  spec.role_tag = "options";
  spec.response_schema = std::string(llm::schema::kOptions);
  spec.temperature = 0.7;
  spec.sections = {
      {"Task",
       "Offer 3 to 4 mutually exclusive options for the acting partner only. Each option is a "
       "single observable behavior (no dialogue, no inner states) and each leads to a distinct "
       "relational consequence."},
      {"Scene", render_frame(scene)},
      {"Transcript", render_transcript(transcript)},
      {"Relationship State", render_state(state)},
      {"Acting Partner", actor},
      {"Output", fmt::format(R"({{"options": [{{"description": "...", "actor": "{}"}}]}})", actor)},
  };
  spec.seed = prompt_seed(spec);

  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = gateway.chat(spec);
    if (!reply.ok()) throw SceneError("option generation failed: " + reply.parse_error);
    OptionSet set;
    set.acting_partner = acting_partner;
    const auto& items = (*reply.parsed)["options"];
    for (std::size_t i = 0; i < items.size(); ++i) {
      Option o;
      o.id = fmt::format("o{}", i + 1);
      o.description = items[i]["description"].get<std::string>();
      o.actor = *parse_token<Partner>(items[i]["actor"].get<std::string>());
      set.options.push_back(std::move(o));
    }
    auto problems = option_set_problems(set);
    if (problems.empty()) return set;
    problem = problems.front();
    spec.sections.push_back({"Rejected Options", "The option set was rejected (" + problem +
                                           "). Offer 3 to 4 distinct options, all for partner " +
                                           actor + "."});
  }
  throw SceneError("option set invalid after retry: " + problem);
}

StateInference infer_states(llm::Gateway& gateway, const ExpandedScene& scene,
                            const std::vector<SceneEvent>& transcript,
                            const RelationshipState& previous, Warnings& warnings) {
  std::string vocabulary;
  for (auto field : kStateFields) {
    std::string tokens;
    for (auto t : state_vocabulary(field)) tokens += (tokens.empty() ? "" : ", ") + std::string(t);
    vocabulary += fmt::format("{}: {}\n", field, tokens);
  }
  std::string categories;
  for (auto c : all_values<TurningPointCategory>()) {
    categories += (categories.empty() ? "" : ", ") + std::string(to_token(c));
  }
  vocabulary += "category: " + categories;

  llm::PromptSpec spec;
  spec.role_tag = "state_inference";
  spec.response_schema = std::string(llm::schema::kStateInference);
  spec.temperature = 0.0;
  spec.sections = {
      {"Task",
       "Judge the relationship state after this scene from the evidence in the transcript. "
       "conflict: criticism, defensiveness, contempt or stonewalling that escalate disagreement. "
       "repair_outcome: apologies, forgiveness or new rituals that resolve tension. clarity: "
       "labels, exclusivity or shared plans negotiated explicitly. constraints: tangible "
       "commitments (leases, pets, finances, routines) that raise the cost of exit. alternatives: "
       "interest in rivals, secrecy or jealousy. transition: moves, jobs, distance or schedule "
       "changes. network: approval or disapproval from friends and family. breakup_marker: clear "
       "statements or trial separations indicating dissolution. Use \"unknown\" when the scene "
       "gives no evidence. Also confirm which turning-point category the scene turned out to be."},
      {"Vocabulary", vocabulary},
      {"Scene", render_frame(scene)},
      {"Transcript", render_transcript(transcript)},
      {"Previous State", render_state(previous)},
      {"Output",
       R"({"conflict": "...", "repair_outcome": "...", "clarity": "...", "constraints": "...", )"
       R"("alternatives": "...", "transition": "...", "network": "...", "breakup_marker": "...", )"
       R"("category": "..."})"},
  };
  spec.seed = prompt_seed(spec);
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw SceneError("state inference failed: " + reply.parse_error);
  const auto& r = *reply.parsed;

  StateInference out;
  for (auto field : kStateFields) {
    const auto token = r[std::string(field)].get<std::string>();
    if (!set_state_field(out.state, field, token)) {
      warnings.push_back(fmt::format("state field {} got unknown token '{}', set to unknown",
                                     field, token));
      set_state_field(out.state, field, "unknown");
    }
  }
  if (r.contains("category") && r["category"].is_string()) {
    const auto token = r["category"].get<std::string>();
    if (auto c = parse_token<TurningPointCategory>(token)) {
      out.confirmed_category = *c;
    } else {
      warnings.push_back("state inference returned unknown category '" + token + "'");
    }
  }
  return out;
}

CommitmentEstimate score_commitment(llm::Gateway& gateway, const ExpandedScene& scene,
                                    const std::vector<SceneEvent>& transcript,
                                    const RelationshipState& state,
                                    const std::optional<CommitmentEstimate>& previous,
                                    Warnings& warnings) {
  llm::PromptSpec spec;
  spec.role_tag = "commitment";
  spec.response_schema = std::string(llm::schema::kCommitment);
  spec.temperature = 0.0;
  spec.sections = {
      {"Rubric", std::string(kCommitmentRubric)},
      {"Scene", render_frame(scene)},
      {"Transcript", render_transcript(transcript)},
      {"Relationship State", render_state(state)},
      {"Previous Estimate",
       previous ? fmt::format("{:.2f}: {}", previous->score, previous->rationale)
                : std::string("(none: first scene)")},
      {"Task",
       "Score the couple's commitment after this scene. Cite the transcript event ids (e.g. "
       "\"s0e3\") that support the score in evidence_refs."},
      {"Output", R"({"score": 3.0, "rationale": "...", "evidence_refs": ["..."]})"},
  };
  spec.seed = prompt_seed(spec);
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw SceneError("commitment scoring failed: " + reply.parse_error);
  auto estimate = commitment_from_reply(*reply.parsed, warnings);

  std::vector<std::string> kept;
  for (auto& ref : estimate.evidence_refs) {
    const bool known = std::any_of(transcript.begin(), transcript.end(),
                                   [&](const SceneEvent& e) { return e.id == ref; });
    if (known) {
      kept.push_back(std::move(ref));
    } else {
      warnings.push_back("commitment evidence ref '" + ref + "' names no transcript event");
    }
  }
  estimate.evidence_refs = std::move(kept);
  return estimate;
}

std::string update_summary(llm::Gateway& gateway, std::string_view previous_summary,
                           const ExpandedScene& scene, const std::vector<SceneEvent>& transcript,
                           std::size_t word_cap, Warnings& warnings) {
  llm::PromptSpec spec;
  spec.role_tag = "summary";
  spec.response_schema = std::string(llm::schema::kSummary);
  spec.temperature = 0.3;
  spec.sections = {
      {"Task", fmt::format("Update the couple's running story summary with this scene in at most "
                           "{} words. Keep the facts later scenes must stay consistent with.",
                           word_cap)},
      {"Previous Summary", previous_or_first(previous_summary)},
      {"Scene", render_frame(scene)},
      {"Transcript", render_transcript(transcript)},
      {"Output", R"({"summary": "..."})"},
  };
  spec.seed = prompt_seed(spec);
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw SceneError("summary update failed: " + reply.parse_error);
  auto summary = trim((*reply.parsed)["summary"].get<std::string>());
  if (word_count(summary) > word_cap) {
    std::string truncated;
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < summary.size() && words < word_cap) {
      while (i < summary.size() && std::isspace(static_cast<unsigned char>(summary[i]))) ++i;
      const auto start = i;
      while (i < summary.size() && !std::isspace(static_cast<unsigned char>(summary[i]))) ++i;
      if (start < i) {
        truncated += (truncated.empty() ? "" : " ") + summary.substr(start, i - start);
        ++words;
      }
    }
    warnings.push_back(fmt::format("rolling summary had {} words, truncated to {}",
                                   word_count(summary), word_cap));
    summary = std::move(truncated);
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Checkpoints

Json to_json(const Checkpoint& c) {
  Json j = Json::object();
  j["format"] = "relate-checkpoint";
  j["version"] = Checkpoint::kVersion;
  Json lines = Json::array();
  {
    const auto text = serialize_trace(c.trace);
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      lines.push_back(Json::parse(text.substr(start, end - start)));
      start = end + 1;
    }
  }
  j["trace"] = std::move(lines);
  j["state"] = relate::to_json(c.state);
  j["agents"] = Json::array({agent::to_json(c.agents[0]), agent::to_json(c.agents[1])});
  j["affect_cache"] = c.affect_cache;
  return j;
}

Checkpoint checkpoint_from_json(const Json& j, const std::string& path) {
  if (!j.is_object() || j.value("format", "") != "relate-checkpoint") {
    throw SchemaError(path, "not a checkpoint");
  }
  if (j.value("version", 0) != Checkpoint::kVersion) {
    throw SchemaError(path + "/version",
                      fmt::format("unsupported checkpoint version {}", j.value("version", 0)));
  }
  Checkpoint c;
  std::string text;
  for (const auto& line : j.at("trace")) text += canonical_dump(line) + "\n";
  c.trace = parse_trace(text);
  c.state = from_json<RelationshipState>(j.at("state"), path + "/state");
  c.agents[0] = agent::agent_from_json(j.at("agents").at(0), path + "/agents/0");
  c.agents[1] = agent::agent_from_json(j.at("agents").at(1), path + "/agents/1");
  c.affect_cache = j.at("affect_cache");
  return c;
}

// ---------------------------------------------------------------------------
// Run loop

namespace {

std::string partner_name(Partner p) { return fmt::format("Partner {}", to_token(p)); }

class SceneRunner {
 public:
  SceneRunner(llm::Gateway& gateway, const ScenarioBank& bank, const Dyad& dyad,
              const SimulationConfig& config, std::uint64_t run_seed, const RunHooks& hooks)
      : gateway_(gateway),
        bank_(bank),
        dyad_(dyad),
        config_(config),
        run_seed_(run_seed),
        hooks_(hooks) {}

  void start_fresh() {
    for (auto p : {Partner::A, Partner::B}) {
      agents_[static_cast<std::size_t>(p)] = agent::make_agent(
          gateway_, embedder_, p, dyad_.persona(p), dyad_.identity_memories(p), setup_warnings_);
    }
  }

  void restore(const Checkpoint& c) {
    state_ = c.state;
    agents_ = c.agents;
    embedder_.restore(c.affect_cache);
    for (const auto& scene : c.trace.scenes) {
      if (!scene.decisions.empty()) last_actor_ = scene.decisions.back().actor;
    }
  }

  /// Plays scene `index`; appends the record to the trace.
  void play_scene(SimulationTrace& trace, int index) {
    const auto calls_before = gateway_.chat_calls();
    SceneRecord record;
    record.index = index;
    record.warnings = std::exchange(setup_warnings_, {});
    Warnings& warnings = record.warnings;

    const std::string previous_summary =
        trace.scenes.empty() ? std::string() : trace.scenes.back().rolling_summary;
    std::optional<CommitmentEstimate> previous_commitment;
    if (!trace.scenes.empty()) previous_commitment = trace.scenes.back().commitment;

    const auto scene_seed = derive_seed(run_seed_, {"scene", std::to_string(index)});
    const auto priority = select_category(state_, index);
    auto draw = sample_with_fallback(bank_, priority, config_.candidates_per_scene, scene_seed);
    if (draw.category != priority.front()) {
      warnings.push_back(fmt::format("no scenarios for {}, used {}", to_token(priority.front()),
                                     to_token(draw.category)));
    }
    const auto scenario =
        select_scenario(gateway_, draw.candidates, dyad_, previous_summary, state_, warnings);
    const auto scene = expand_scene(gateway_, scenario, dyad_, previous_summary);
    if (hooks_.on_scene_start) hooks_.on_scene_start(index, scene);

    record.category = scenario.category;
    record.scenario_id = scenario.id;
    record.scene_state = scene.scene_state;
    record.stakes = scene.stakes;
    record.third_party = scene.third_party;

    for (auto& a : agents_) a.memory.clear_scene_layer();

    int event_counter = 0;
    auto emit = [&](EventKind kind, std::optional<Partner> actor, std::string text) {
      SceneEvent e;
      e.id = fmt::format("s{}e{}", index, ++event_counter);
      e.kind = kind;
      e.actor = actor;
      e.text = std::move(text);
      record.transcript.push_back(e);
      for (auto& a : agents_) a.history.push_back(e);
      if (hooks_.on_event) hooks_.on_event(index, e);
      return e;
    };

    NarrationProgress progress;
    progress.max_decision_points = config_.max_decisions_per_scene;
    progress.max_steps = config_.max_narration_steps;
    while (progress.decision_points < progress.max_decision_points) {
      auto step = advance_narrative(gateway_, scene, record.transcript, progress);
      const auto narration = emit(EventKind::Narration, std::nullopt, step.narration);
      for (auto& a : agents_) memory::add_scene_entry(gateway_, a.memory, index, narration.text);
      ++progress.steps_since_decision;

      std::optional<Partner> actor;
      if (step.stop && step.acting_partner) {
        actor = step.acting_partner;
      } else if (step.stop) {
        break;
      } else if (progress.steps_since_decision >= progress.max_steps) {
        actor = last_actor_ ? other(*last_actor_) : Partner::A;
        warnings.push_back(fmt::format("narration reached {} steps without a stop; forcing a "
                                       "decision point for {}",
                                       progress.max_steps, partner_name(*actor)));
      } else {
        continue;
      }

      run_decision_point(record, scene, index, *actor, emit, warnings);
      last_actor_ = *actor;
      ++progress.decision_points;
      progress.steps_since_decision = 0;
    }

    auto inference = infer_states(gateway_, scene, record.transcript, state_, warnings);
    record.inferred_state = inference.state;
    record.confirmed_category = inference.confirmed_category;
    if (inference.state.constraints == Constraints::None &&
        state_.constraints == Constraints::Accrued &&
        (inference.state.breakup_marker == BreakupMarker::None ||
         inference.state.breakup_marker == BreakupMarker::Unknown)) {
      warnings.push_back("constraints stepped back from accrued to none without a breakup marker");
    }
    state_ = inference.state;

    record.commitment = score_commitment(gateway_, scene, record.transcript, state_,
                                         previous_commitment, warnings);
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      agents_[i].metrics = agent::update_metrics(agents_[i].metrics, record.commitment.score,
                                                 agents_[i].affect, state_);
      record.metrics[i] = agents_[i].metrics;
    }
    record.rolling_summary = update_summary(gateway_, previous_summary, scene, record.transcript,
                                            config_.summary_word_cap, warnings);
    record.llm_call_count = static_cast<int>(gateway_.chat_calls() - calls_before);
    for (const auto& w : warnings) spdlog::debug("scene {}: {}", index, w);
    trace.scenes.push_back(std::move(record));
  }

  Checkpoint checkpoint(const SimulationTrace& trace) const {
    Checkpoint c;
    c.trace = trace;
    if (!trace.scenes.empty()) c.trace.final_commitment = trace.scenes.back().commitment;
    c.state = state_;
    c.agents = agents_;
    c.affect_cache = embedder_.snapshot();
    return c;
  }

  const RelationshipState& state() const { return state_; }

 private:
  template <typename Emit>
  void run_decision_point(SceneRecord& record, const ExpandedScene& scene, int index,
                          Partner actor, Emit& emit, Warnings& warnings) {
    auto options = generate_options(gateway_, scene, record.transcript, state_, actor);
    std::string menu;
    for (const auto& o : options.options) {
      menu += fmt::format("{}{}: {}", menu.empty() ? "" : "; ", o.id, o.description);
    }
    emit(EventKind::Options, actor, fmt::format("Options for {}: {}", partner_name(actor), menu));
    record.option_sets.push_back(options);

    auto& agent = agents_[static_cast<std::size_t>(actor)];
    const auto context = render_scene_context(scene, record.transcript);
    agent::DecideParams params{config_.retrieval_k, config_.affect_lambda, config_.log_prompts};
    auto decision = agent::decide(gateway_, agent, context, options, params, warnings);

    if (hooks_.human_controls == actor && hooks_.on_decision) {
      DecisionPoint point{index, options, record.transcript, decision};
      const auto human = hooks_.on_decision(point);
      if (!options.find(human.option_id)) {
        throw SceneError("human choice '" + human.option_id + "' is not a presented option");
      }
      Decision d;
      d.actor = actor;
      d.chosen_option_id = human.option_id;
      d.action_text = options.find(human.option_id)->description;
      d.reasoning = human.rationale;
      d.by_human = true;
      d.shadow_option_id = decision.chosen_option_id;
      d.prompt = decision.prompt;
      decision = std::move(d);
    }

    const auto* chosen = options.find(decision.chosen_option_id);
    emit(EventKind::Decision, actor,
         fmt::format("{} chose {}: {}", partner_name(actor), chosen->id, chosen->description));
    record.decisions.push_back(std::move(decision));

    const auto episode = fmt::format("Scene {} ({}): {} chose to {}", index,
                                     to_token(record.category), partner_name(actor),
                                     chosen->description);
    for (auto& a : agents_) {
      memory::record_episode(gateway_, embedder_, a.memory, index, episode, warnings);
    }
  }

  llm::Gateway& gateway_;
  const ScenarioBank& bank_;
  const Dyad& dyad_;
  const SimulationConfig& config_;
  std::uint64_t run_seed_;
  const RunHooks& hooks_;

  RelationshipState state_;
  std::array<agent::AgentState, 2> agents_;
  memory::AffectEmbedder embedder_;
  std::optional<Partner> last_actor_;
  Warnings setup_warnings_;
};

}  // namespace

SimulationTrace run_simulation(llm::Gateway& gateway, const ScenarioBank& bank, const Dyad& dyad,
                               const SimulationConfig& config, std::uint64_t run_seed,
                               int run_index, const RunHooks& hooks,
                               std::optional<Checkpoint> resume) {
  SimulationTrace trace;
  trace.dyad_id = dyad.dyad_id;
  trace.run_index = run_index;
  trace.run_seed = run_seed;
  trace.config = config;
  trace.persona_a = dyad.a;
  trace.persona_b = dyad.b;

  SceneRunner runner(gateway, bank, dyad, config, run_seed, hooks);
  try {
    if (config.num_scenes < 1) throw std::invalid_argument("num_scenes must be at least 1");
    if (bank.empty()) throw SceneError("scenario bank is empty");
    if (resume) {
      if (resume->trace.dyad_id != dyad.dyad_id || resume->trace.run_seed != run_seed ||
          resume->trace.run_index != run_index || !(resume->trace.config == config)) {
        throw std::invalid_argument("checkpoint belongs to a different run");
      }
      trace.scenes = resume->trace.scenes;
      runner.restore(*resume);
    } else {
      runner.start_fresh();
    }

    const bool already_stopped =
        !trace.scenes.empty() &&
        trace.scenes.back().inferred_state.breakup_marker == BreakupMarker::Hard;
    if (already_stopped && static_cast<int>(trace.scenes.size()) < config.num_scenes) {
      trace.terminated_early = true;
      trace.termination_reason =
          fmt::format("breakup_marker=hard after scene {}", trace.scenes.back().index);
    }
    for (int i = static_cast<int>(trace.scenes.size()); !already_stopped && i < config.num_scenes;
         ++i) {
      runner.play_scene(trace, i);
      if (hooks.on_scene_complete) hooks.on_scene_complete(runner.checkpoint(trace));
      if (runner.state().breakup_marker == BreakupMarker::Hard) {
        if (i + 1 < config.num_scenes) {
          trace.terminated_early = true;
          trace.termination_reason = fmt::format("breakup_marker=hard after scene {}", i);
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    spdlog::warn("run {} #{} aborted: {}", dyad.dyad_id, run_index, e.what());
    trace.valid = false;
    trace.error = e.what();
  }
  if (!trace.scenes.empty()) trace.final_commitment = trace.scenes.back().commitment;
  return trace;
}

}  // namespace relate::scene
