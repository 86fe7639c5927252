// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include "relate/scene_master.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::scene;
using TPC = TurningPointCategory;

namespace {

std::shared_ptr<llm::ScriptedBackend> scripted(std::string role, std::vector<std::string> responses) {
  return std::make_shared<llm::ScriptedBackend>(
      std::vector<llm::ScriptRule>{{std::move(role), std::nullopt, std::move(responses), nullptr}});
}

ExpandedScene sample_scene() {
  ExpandedScene s;
  s.scene_state.theme = "trust";
  s.scene_state.setting = "kitchen";
  s.scene_state.current_scene = "Dinner is cold.";
  s.scene_state.character_1_goal = "be heard";
  s.scene_state.character_2_goal = "keep the peace";
  s.scene_state.scene_conflict = "the trip";
  s.stakes = "the weekend";
  s.source_scenario_id = "cr-1";
  s.category = TPC::ConflictAndRepair;
  return s;
}

std::vector<SceneEvent> sample_transcript() {
  return {{"s0e1", EventKind::Narration, std::nullopt, "The phone buzzes."},
          {"s0e2", EventKind::Decision, Partner::A, "Partner A chose o1: Apologizes"}};
}

std::string options_reply(std::vector<std::string> descriptions, std::string actor) {
  Json opts = Json::array();
  for (auto& d : descriptions) opts.push_back({{"description", d}, {"actor", actor}});
  return Json{{"options", opts}}.dump();
}

RelationshipState state_with(std::string_view field, std::string_view token) {
  RelationshipState s;
  set_state_field(s, field, token);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Category selection

TEST(SelectCategory, UnresolvedConflictGoesToRepair) {
  EXPECT_EQ(select_category(state_with("conflict", "unresolved"), 3).front(), TPC::ConflictAndRepair);
  EXPECT_EQ(select_category(state_with("conflict", "active"), 0).front(), TPC::ConflictAndRepair);
}

TEST(SelectCategory, ColdStartIsInitialFormation) {
  EXPECT_EQ(select_category(RelationshipState{}, 0).front(), TPC::InitialFormation);
}

TEST(SelectCategory, DecisionTableRows) {
  auto s = state_with("transition", "upcoming");
  s.conflict = Conflict::None;
  EXPECT_EQ(select_category(s, 4).front(), TPC::ChallengesOrTests);
  EXPECT_EQ(select_category(state_with("breakup_marker", "soft"), 4).front(), TPC::ChallengesOrTests);
  EXPECT_EQ(select_category(state_with("alternatives", "hot"), 4).front(), TPC::ChallengesOrTests);
  auto deep = state_with("constraints", "accrued");
  deep.clarity = Clarity::Explicit;
  EXPECT_EQ(select_category(deep, 4).front(), TPC::DeepeningOrMilestones);
  EXPECT_EQ(select_category(state_with("network", "opposed"), 4).front(), TPC::OtherModernTurningPoints);
  EXPECT_EQ(select_category(state_with("clarity", "unclear"), 1).front(), TPC::InitialFormation);
  EXPECT_EQ(select_category(state_with("clarity", "unclear"), 2).front(), TPC::RelationshipDevelopment);
  EXPECT_EQ(select_category(state_with("clarity", "tacit"), 5).front(), TPC::RelationshipDevelopment);
  // An all-unknown state is a cold start whatever the scene index.
  EXPECT_EQ(select_category(RelationshipState{}, 5).front(), TPC::InitialFormation);
}

TEST(SelectCategory, PriorityListCoversEveryCategoryOnce) {
  const auto list = select_category(state_with("conflict", "active"), 2);
  EXPECT_EQ(list.size(), 6u);
  EXPECT_EQ(std::set<TPC>(list.begin(), list.end()).size(), 6u);
}

// ---------------------------------------------------------------------------
// Sampling

TEST(Sample, SmallPoolReturnsEverything) {
  const auto bank = fixture::small_bank(10);
  const auto s = sample_candidates(bank, TPC::ConflictAndRepair, 30, 1);
  EXPECT_EQ(s.size(), 10u);
  std::set<std::string> ids;
  for (const auto& x : s) ids.insert(x.id);
  EXPECT_EQ(ids.size(), 10u);
}

TEST(Sample, SameSeedSameSample) {
  const auto bank = fixture::small_bank(40);
  const auto a = sample_candidates(bank, TPC::DeepeningOrMilestones, 5, 77);
  EXPECT_EQ(a, sample_candidates(bank, TPC::DeepeningOrMilestones, 5, 77));
  EXPECT_NE(a, sample_candidates(bank, TPC::DeepeningOrMilestones, 5, 78));
}

TEST(Sample, FrequenciesAreRoughlyUniform) {
  const std::size_t pool = 20;
  const std::size_t n = 5;
  const int trials = 4000;
  const auto bank = fixture::small_bank(pool);
  std::map<std::string, int> counts;
  for (int seed = 0; seed < trials; ++seed) {
    for (const auto& s : sample_candidates(bank, TPC::InitialFormation, n, static_cast<std::uint64_t>(seed))) {
      ++counts[s.id];
    }
  }
  ASSERT_EQ(counts.size(), pool);
  const double expected = static_cast<double>(trials) * n / pool;
  double chi2 = 0.0;
  for (const auto& [id, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 19 degrees of freedom; the 0.999 quantile is 43.8.
  EXPECT_LT(chi2, 43.8);
}

TEST(Sample, FallbackWalksPriorityList) {
  ScenarioBank bank({{"x-1", TPC::DeepeningOrMilestones, "only one", {}}});
  const auto draw = sample_with_fallback(bank, select_category(RelationshipState{}, 0), 30, 1);
  EXPECT_EQ(draw.category, TPC::DeepeningOrMilestones);
  EXPECT_EQ(draw.candidates.size(), 1u);
  EXPECT_THROW(sample_with_fallback(bank, {TPC::InitialFormation}, 3, 1), SceneError);
  EXPECT_THROW(sample_candidates(ScenarioBank{}, TPC::InitialFormation, 3, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Bank

TEST(Bank, ParsesAndRejectsUnknownCategory) {
  const auto bank = ScenarioBank::parse(
      R"({"id": "a", "category": "InitialFormation", "synopsis": "They meet.", "tags": []})"
      "\n\n"
      R"({"id": "b", "category": "ConflictAndRepair", "synopsis": "They argue.", "tags": ["x"]})"
      "\n");
  EXPECT_EQ(bank.size(), 2u);
  try {
    ScenarioBank::parse(R"({"id": "a", "category": "InitialFormation", "synopsis": "s", "tags": []})"
                        "\n"
                        R"({"id": "b", "category": "Romance", "synopsis": "s", "tags": []})",
                        "bank.jsonl");
    FAIL();
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("bank.jsonl:2"), std::string::npos);
    EXPECT_NE(what.find("Romance"), std::string::npos);
  }
  EXPECT_THROW(ScenarioBank({{"a", TPC::InitialFormation, "s", {}}, {"a", TPC::InitialFormation, "t", {}}}),
               std::invalid_argument);
}

TEST(Bank, ShippedSampleLoads) {
  const auto bank = ScenarioBank::load(std::filesystem::path(RELATE_TEST_DATA) / ".." / ".." / "data" / "sample_bank.jsonl");
  EXPECT_EQ(bank.size(), 60u);
  for (auto c : all_values<TPC>()) EXPECT_EQ(bank.pool(c).size(), 10u);
  EXPECT_EQ(ScenarioBank::parse(bank.serialize()).scenarios(), bank.scenarios());
}

TEST(Bank, GeneratedBankIsSeeded) {
  const auto a = generate_bank(7, 3);
  EXPECT_EQ(a.size(), 42u);
  EXPECT_EQ(a, generate_bank(7, 3));
  EXPECT_NO_THROW(ScenarioBank{a});
}

// ---------------------------------------------------------------------------
// Scene steps

TEST(SelectScenario, SingleCandidateNeedsNoCall) {
  auto backend = scripted("scenario_selection", {});
  llm::Gateway g(backend);
  Warnings w;
  const std::vector<Scenario> one = {{"a", TPC::InitialFormation, "s", {}}};
  EXPECT_EQ(select_scenario(g, one, fixture::make_dyad("d"), "", {}, w).id, "a");
  EXPECT_EQ(backend->call_count(), 0u);
}

TEST(SelectScenario, ScriptedPickAndFallback) {
  const auto bank = fixture::small_bank(10);
  std::vector<Scenario> candidates;
  for (const auto* s : bank.pool(TPC::ConflictAndRepair)) candidates.push_back(*s);
  Warnings w;
  {
    llm::Gateway g(scripted("scenario_selection", {R"({"scenario_id": "cr-7"})"}));
    EXPECT_EQ(select_scenario(g, candidates, fixture::make_dyad("d"), "", {}, w).id, "cr-7");
    EXPECT_TRUE(w.empty());
  }
  llm::Gateway g(scripted("scenario_selection", {R"({"scenario_id": "zz"})", R"({"scenario_id": "yy"})"}));
  EXPECT_EQ(select_scenario(g, candidates, fixture::make_dyad("d"), "", {}, w).id, "cr-1");
  EXPECT_EQ(w.size(), 1u);
}

TEST(ExpandScene, FullStateAndPreviousSummaryPassthrough) {
  llm::Gateway g(fixture::world());
  const Scenario sc{"cr-1", TPC::ConflictAndRepair, "They argue.", {}};
  const auto s = expand_scene(g, sc, fixture::make_dyad("d"), "Earlier they moved in together.");
  EXPECT_EQ(s.scene_state.previous_summary, "Earlier they moved in together.");
  EXPECT_EQ(s.scene_state.character_2_goal, "keep the peace");
  EXPECT_EQ(s.scene_state.npcs, std::vector<std::string>{"a neighbor"});
  EXPECT_EQ(s.category, TPC::ConflictAndRepair);
  EXPECT_FALSE(s.third_party);
}

TEST(ExpandScene, MissingFieldRetriesThenFails) {
  Json bad = {{"theme", "t"}, {"setting", "s"}, {"NPC", Json::array()}, {"current_scene", "c"},
              {"character_1_goal", "g"}, {"scene_conflict", "x"}, {"stakes", "y"}};
  auto backend = scripted("scene_expansion", {bad.dump(), bad.dump(), bad.dump()});
  llm::Gateway g(backend);
  EXPECT_THROW(expand_scene(g, {"cr-1", TPC::ConflictAndRepair, "s", {}}, fixture::make_dyad("d"), ""), SceneError);
  EXPECT_EQ(backend->call_count(), 3u);
}

TEST(Narration, StopAndActor) {
  llm::Gateway g(scripted("narration", {R"({"narration": "It rains.", "stop": false})",
                                        R"({"narration": "She waits.", "stop": true, "acting_partner": "B"})"}));
  auto a = advance_narrative(g, sample_scene(), {}, {});
  EXPECT_EQ(a.narration, "It rains.");
  EXPECT_FALSE(a.stop);
  EXPECT_FALSE(a.acting_partner);
  auto b = advance_narrative(g, sample_scene(), {}, {});
  EXPECT_TRUE(b.stop);
  EXPECT_EQ(b.acting_partner, Partner::B);
}

TEST(Options, FourOptionsForB) {
  llm::Gateway g(scripted("options", {options_reply({"w", "x", "y", "z"}, "B")}));
  const auto set = generate_options(g, sample_scene(), {}, {}, Partner::B);
  ASSERT_EQ(set.options.size(), 4u);
  EXPECT_EQ(set.options[3].id, "o4");
  EXPECT_EQ(set.acting_partner, Partner::B);
}

TEST(Options, TooFewRetriesThenFails) {
  auto backend = scripted("options", {options_reply({"x", "y"}, "B"), options_reply({"x", "y"}, "B")});
  llm::Gateway g(backend);
  EXPECT_THROW(generate_options(g, sample_scene(), {}, {}, Partner::B), SceneError);
  EXPECT_EQ(backend->call_count(), 2u);
  EXPECT_NE(backend->calls()[1].rendered.find("options length 2"), std::string::npos);
}

TEST(Options, DuplicatesRetryThenFail) {
  const auto dup = options_reply({"x", "x", "y"}, "A");
  llm::Gateway g(scripted("options", {dup, dup}));
  EXPECT_THROW(generate_options(g, sample_scene(), {}, {}, Partner::A), SceneError);
}

TEST(Options, RetryRecovers) {
  llm::Gateway g(scripted("options", {options_reply({"x", "y", "z"}, "B"), options_reply({"x", "y", "z"}, "A")}));
  EXPECT_EQ(generate_options(g, sample_scene(), {}, {}, Partner::A).options.size(), 3u);
}

TEST(InferStates, AllFieldsParsed) {
  auto reply = fixture::full_state("active", "soft", "explicit");
  reply["category"] = "ConflictAndRepair";
  llm::Gateway g(scripted("state_inference", {reply.dump()}));
  Warnings w;
  const auto r = infer_states(g, sample_scene(), sample_transcript(), {}, w);
  EXPECT_EQ(r.state.conflict, Conflict::Active);
  EXPECT_EQ(r.state.breakup_marker, BreakupMarker::Soft);
  EXPECT_EQ(r.state.clarity, Clarity::Explicit);
  EXPECT_EQ(r.state.network, Network::Neutral);
  EXPECT_EQ(r.confirmed_category, TPC::ConflictAndRepair);
  EXPECT_TRUE(w.empty());
}

TEST(InferStates, InvalidTokenBecomesUnknown) {
  llm::Gateway g(scripted("state_inference", {fixture::full_state("simmering").dump()}));
  Warnings w;
  const auto r = infer_states(g, sample_scene(), sample_transcript(), {}, w);
  EXPECT_EQ(r.state.conflict, Conflict::Unknown);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("simmering"), std::string::npos);
}

TEST(Commitment, PassthroughAndClamp) {
  Warnings w;
  {
    llm::Gateway g(scripted("commitment", {R"({"score": 2.5, "rationale": "wobbly", "evidence_refs": ["s0e2", "s9e9"]})"}));
    const auto e = score_commitment(g, sample_scene(), sample_transcript(), {}, std::nullopt, w);
    EXPECT_DOUBLE_EQ(e.score, 2.5);
    EXPECT_EQ(e.evidence_refs, std::vector<std::string>{"s0e2"});
    EXPECT_EQ(w.size(), 1u);
  }
  w.clear();
  llm::Gateway g(scripted("commitment", {R"({"score": 0.2, "rationale": "gone"})"}));
  EXPECT_DOUBLE_EQ(score_commitment(g, sample_scene(), sample_transcript(), {}, std::nullopt, w).score, 1.0);
  EXPECT_EQ(w.size(), 1u);
}

TEST(Summary, CappedAtWordLimit) {
  llm::Gateway g(scripted("summary", {Json{{"summary", fixture::n_words(20, "They")}}.dump()}));
  Warnings w;
  const auto s = update_summary(g, "", sample_scene(), sample_transcript(), 12, w);
  EXPECT_EQ(word_count(s), 12u);
  EXPECT_EQ(w.size(), 1u);
}

// ---------------------------------------------------------------------------
// Runs

TEST(Run, GoldenThreeSceneScript) {
  const auto bank = fixture::small_bank();
  auto backend = fixture::world();
  llm::Gateway g(backend);
  const auto trace = run_simulation(g, bank, fixture::make_dyad("d1"), fixture::small_config(3), 42);
  ASSERT_TRUE(trace.valid) << trace.error;
  ASSERT_EQ(trace.scenes.size(), 3u);
  EXPECT_FALSE(trace.terminated_early);
  ASSERT_TRUE(trace.final_commitment);
  EXPECT_EQ(*trace.final_commitment, trace.scenes[2].commitment);
  EXPECT_DOUBLE_EQ(trace.final_commitment->score, 2.8);
  EXPECT_TRUE(validate_trace(trace).ok());
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = trace.scenes[i];
    EXPECT_EQ(s.decisions.size(), 1u);
    EXPECT_EQ(s.decisions[0].actor, i % 2 == 0 ? Partner::A : Partner::B);
    EXPECT_EQ(s.transcript.size(), 5u);
  }
  int scene_calls = 0;
  for (const auto& s : trace.scenes) scene_calls += s.llm_call_count;
  // Calls before the first scene only embed the agents' identity memories.
  const auto calls = backend->calls();
  std::size_t setup = 0;
  while (setup < calls.size() && calls[setup].role_tag != "scenario_selection") {
    EXPECT_EQ(calls[setup].role_tag, "affect_embed");
    ++setup;
  }
  EXPECT_GT(setup, 0u);
  EXPECT_EQ(setup + static_cast<std::size_t>(scene_calls), calls.size());
  EXPECT_EQ(trace.scenes[0].category, TPC::InitialFormation);
  EXPECT_EQ(trace.scenes[1].scene_state.previous_summary, "Scene 0 passed quietly.");

  const auto fixture = std::filesystem::path(RELATE_TEST_DATA) / "golden_trace.jsonl";
  if (std::getenv("RELATE_UPDATE_GOLDEN")) fixture::spit(fixture, serialize_trace(trace));
  ASSERT_TRUE(std::filesystem::exists(fixture));
  EXPECT_EQ(serialize_trace(trace), fixture::slurp(fixture));
}

TEST(Run, HardBreakupStopsEarly) {
  fixture::WorldOptions o;
  o.state = [](int s) { return s == 0 ? fixture::full_state("active", "hard") : fixture::full_state(); };
  llm::Gateway g(fixture::world(o));
  const auto trace = run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(8), 1);
  ASSERT_TRUE(trace.valid);
  EXPECT_EQ(trace.scenes.size(), 1u);
  EXPECT_TRUE(trace.terminated_early);
  EXPECT_NE(trace.termination_reason.find("hard"), std::string::npos);
  EXPECT_TRUE(validate_trace(trace).ok());
}

TEST(Run, SameSeedSameTrace) {
  const auto bank = fixture::small_bank(10);
  auto once = [&](std::uint64_t seed) {
    llm::Gateway g(fixture::world());
    return serialize_trace(run_simulation(g, bank, fixture::make_dyad("d1"), fixture::small_config(4), seed));
  };
  EXPECT_EQ(once(5), once(5));
  EXPECT_NE(once(5), once(6));
}

TEST(Run, ExclusivityTalkMakesClarityExplicit) {
  fixture::WorldOptions o;
  o.state = [](int) { return fixture::full_state(); };
  auto rules = fixture::world_rules(o);
  // This rule sees the transcript, so it only fires once the decision names exclusivity.
  rules.insert(rules.begin(), llm::ScriptRule{"state_inference", std::string("exclusive"),
                                              {fixture::full_state("none", "none", "explicit").dump()}, nullptr});
  for (auto& r : rules) {
    if (r.role_tag == "options") {
      r.responder = [](const llm::PromptSpec& spec) {
        return options_reply({"Asks to be exclusive from now on", "Changes the subject", "Leaves the room"},
                             *spec.section("Acting Partner"));
      };
    }
  }
  auto backend = std::make_shared<llm::ScriptedBackend>(std::move(rules));
  llm::Gateway g(backend);
  const auto trace = run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(1), 3);
  ASSERT_TRUE(trace.valid) << trace.error;
  EXPECT_EQ(trace.scenes[0].inferred_state.clarity, Clarity::Explicit);
  EXPECT_EQ(backend->remaining(), 0u);
}

TEST(Run, BreakupSceneLowersCommitment) {
  fixture::WorldOptions o;
  o.state = [](int s) { return s == 1 ? fixture::full_state("active", "soft") : fixture::full_state(); };
  o.commitment = [](int s) { return s == 1 ? 2.1 : 3.4; };
  llm::Gateway g(fixture::world(o));
  const auto trace = run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(2), 9);
  ASSERT_EQ(trace.scenes.size(), 2u);
  EXPECT_EQ(trace.scenes[1].inferred_state.breakup_marker, BreakupMarker::Soft);
  EXPECT_LT(trace.scenes[1].commitment.score, trace.scenes[0].commitment.score);
}

TEST(Run, NarrationGuardForcesDecision) {
  auto rules = fixture::world_rules();
  for (auto& r : rules) {
    if (r.role_tag == "narration") {
      r.responder = [](const llm::PromptSpec& spec) {
        const auto* t = spec.section("Transcript");
        if (t->find(" chose ") != std::string::npos) {
          return std::string(R"({"narration": "Done.", "stop": true, "acting_partner": null})");
        }
        return std::string(R"({"narration": "Time passes.", "stop": false})");
      };
    }
  }
  llm::Gateway g(std::make_shared<llm::ScriptedBackend>(std::move(rules)));
  const auto trace = run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(1), 2);
  ASSERT_TRUE(trace.valid) << trace.error;
  const auto& s = trace.scenes[0];
  ASSERT_EQ(s.decisions.size(), 1u);
  EXPECT_EQ(s.decisions[0].actor, Partner::A);
  int narration_before = 0;
  for (const auto& e : s.transcript) {
    if (e.kind == EventKind::Options) break;
    narration_before += e.kind == EventKind::Narration;
  }
  EXPECT_EQ(narration_before, 12);
  EXPECT_FALSE(s.warnings.empty());
}

TEST(Run, ScriptFailureYieldsInvalidTraceWithCompletedScenes) {
  auto rules = fixture::world_rules();
  for (auto& r : rules) {
    if (r.role_tag == "summary") {
      r.responder = nullptr;
      r.responses = {R"({"summary": "only one"})"};
    }
  }
  llm::Gateway g(std::make_shared<llm::ScriptedBackend>(std::move(rules)));
  const auto trace = run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(3), 2);
  EXPECT_FALSE(trace.valid);
  EXPECT_NE(trace.error.find("exhausted"), std::string::npos);
  EXPECT_EQ(trace.scenes.size(), 1u);
}

TEST(Run, ResumeFromCheckpointMatchesUninterruptedRun) {
  const auto bank = fixture::small_bank(5);
  const auto dyad = fixture::make_dyad("d1");
  const auto config = fixture::small_config(4);
  std::vector<Json> checkpoints;
  RunHooks hooks;
  hooks.on_scene_complete = [&](const Checkpoint& c) { checkpoints.push_back(to_json(c)); };
  llm::Gateway g1(fixture::world());
  const auto full = run_simulation(g1, bank, dyad, config, 11, 0, hooks);
  ASSERT_EQ(checkpoints.size(), 4u);

  const auto resume = checkpoint_from_json(Json::parse(checkpoints[1].dump()));
  EXPECT_EQ(resume.trace.scenes.size(), 2u);
  llm::Gateway g2(fixture::world());
  const auto resumed = run_simulation(g2, bank, dyad, config, 11, 0, {}, resume);
  EXPECT_EQ(serialize_trace(resumed), serialize_trace(full));

  llm::Gateway g3(fixture::world());
  const auto wrong = run_simulation(g3, bank, dyad, config, 12, 0, {}, resume);
  EXPECT_FALSE(wrong.valid);
}

TEST(Run, HumanControlRecordsShadowChoice) {
  fixture::WorldOptions o;
  o.pick = "o2";
  llm::Gateway g(fixture::world(o));
  RunHooks hooks;
  hooks.human_controls = Partner::A;
  std::vector<DecisionPoint> points;
  hooks.on_decision = [&](const DecisionPoint& p) {
    points.push_back(p);
    return HumanChoice{"o1", "I would apologize first."};
  };
  const auto trace =
      run_simulation(g, fixture::small_bank(), fixture::make_dyad("d1"), fixture::small_config(2), 4, 0, hooks);
  ASSERT_TRUE(trace.valid) << trace.error;
  ASSERT_EQ(points.size(), 1u);
  EXPECT_EQ(points[0].shadow.chosen_option_id, "o2");
  const auto& human = trace.scenes[0].decisions[0];
  EXPECT_TRUE(human.by_human);
  EXPECT_EQ(human.chosen_option_id, "o1");
  EXPECT_EQ(human.shadow_option_id, "o2");
  EXPECT_EQ(human.reasoning, "I would apologize first.");
  EXPECT_FALSE(trace.scenes[1].decisions[0].by_human);
  EXPECT_TRUE(validate_trace(trace).ok());
}
