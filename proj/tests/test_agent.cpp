// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdlib>

#include <gtest/gtest.h>

#include "relate/agent.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::agent;

namespace {

OptionSet options_for(Partner p, std::vector<std::string> descriptions) {
  OptionSet set;
  set.acting_partner = p;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    set.options.push_back({fmt::format("o{}", i + 1), descriptions[i], p});
  }
  return set;
}

const std::vector<std::string> kMenu = {"Suggests a walk to talk it through calmly",
                                        "Leaves the room and stops responding",
                                        "Raises their voice and lists past grievances"};

/// World rules with the decision replies replaced.
std::shared_ptr<llm::ScriptedBackend> with_decisions(std::vector<std::string> replies) {
  auto rules = fixture::world_rules();
  for (auto& r : rules) {
    if (r.role_tag == "decision") {
      r.responder = nullptr;
      r.responses = std::move(replies);
    }
  }
  return std::make_shared<llm::ScriptedBackend>(std::move(rules));
}

AgentState agent_b(llm::Gateway& g) {
  memory::AffectEmbedder embed;
  Warnings w;
  return make_agent(g, embed, Partner::B, fixture::make_persona("b"), {"We met at a bus stop."}, w);
}

std::string decision(std::string action) {
  return Json{{"action", std::move(action)}, {"reasoning", "because"}}.dump();
}

}  // namespace

TEST(Prompt, ListsExactlyThePresentedOptions) {
  const auto spec = assemble_decision_prompt(fixture::make_persona("p"), "history", {}, "thought",
                                             options_for(Partner::A, kMenu));
  const auto* opts = spec.section("Action Options");
  ASSERT_NE(opts, nullptr);
  EXPECT_EQ(*opts, "o1: " + kMenu[0] + "\no2: " + kMenu[1] + "\no3: " + kMenu[2]);
  std::vector<std::string> names;
  for (const auto& s : spec.sections) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"Role", "Instructions", "Selection Criteria",
                                             "Most Recent Internal Thought", "Your Persona", "Scene History",
                                             "Relevant Memories", "Action Options", "Output"}));
}

TEST(Prompt, EmptyMemoriesAreMarked) {
  const auto spec = assemble_decision_prompt(fixture::make_persona("p"), "history", {}, "",
                                             options_for(Partner::A, kMenu));
  ASSERT_NE(spec.section("Relevant Memories"), nullptr);
  EXPECT_NE(spec.section("Relevant Memories")->find("empty"), std::string::npos);
  EXPECT_EQ(*spec.section("Most Recent Internal Thought"), "(none)");
}

TEST(Prompt, GoldenFixture) {
  Persona persona;
  persona.narrative = "You keep promises. You go quiet when criticized; your partner experiences this as distance.";
  persona.playbook = {{"if criticized", "then ask for a pause"}, {"if plans change", "then propose a new date"}};
  memory::RetrievalResult retrieved;
  MemoryEntry m1;
  m1.id = "sim-0001";
  m1.text = "Scene 0 (ConflictAndRepair): Partner A chose to Suggests a walk to talk it through calmly";
  MemoryEntry m2;
  m2.id = "id-0002";
  m2.text = "if criticized -> then ask for a pause";
  retrieved.push_back({m1, 1.2});
  retrieved.push_back({m2, 0.8});
  const auto spec = assemble_decision_prompt(
      persona, "Scene: a cancelled trip.\n\nTranscript:\n[s1e1] The phone buzzes.", retrieved,
      "I hate feeling dismissed.", options_for(Partner::A, kMenu));
  const auto fixture = std::filesystem::path(RELATE_TEST_DATA) / "decision_prompt.golden.txt";
  if (std::getenv("RELATE_UPDATE_GOLDEN")) fixture::spit(fixture, spec.render());
  ASSERT_TRUE(std::filesystem::exists(fixture));
  EXPECT_EQ(spec.render(), fixture::slurp(fixture));
}

TEST(Matching, TokenJaccard) {
  EXPECT_DOUBLE_EQ(token_jaccard("a b c", "c b a"), 1.0);
  EXPECT_DOUBLE_EQ(token_jaccard("a b", "b c"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(token_jaccard("", ""), 0.0);
  EXPECT_EQ(tokenize("Don't STOP, ok?"), (std::vector<std::string>{"don", "t", "stop", "ok"}));
}

TEST(Matching, IdsAndParaphrases) {
  const auto set = options_for(Partner::A, kMenu);
  EXPECT_EQ(match_option(set, "o2"), "o2");
  EXPECT_EQ(match_option(set, "o3: raises voice firmly"), "o3");
  EXPECT_EQ(match_option(set, "suggests a calm walk to talk it through"), "o1");
  EXPECT_FALSE(match_option(set, "books a flight to Lisbon"));
  EXPECT_FALSE(match_option(set, "o7: books a flight"));
}

TEST(Decide, ScriptedChoiceIsPassedThrough) {
  auto backend = with_decisions({decision("o2: walks away to cool off")});
  llm::Gateway g(backend);
  auto agent = agent_b(g);
  Warnings w;
  const auto d = decide(g, agent, "The argument is heating up.", options_for(Partner::B, kMenu), {}, w);
  EXPECT_EQ(d.chosen_option_id, "o2");
  EXPECT_EQ(d.actor, Partner::B);
  EXPECT_EQ(backend->call_count("decision"), 1u);
  EXPECT_EQ(agent.last_internal_thought, "I want this to go well.");
  EXPECT_NE(d.prompt.find("Action Options:"), std::string::npos);
  EXPECT_NE(d.prompt.find("We met at a bus stop."), std::string::npos);
}

TEST(Decide, ParaphraseMapsToOption) {
  llm::Gateway g(with_decisions({decision("Suggests a calm walk to talk it through")}));
  auto agent = agent_b(g);
  Warnings w;
  EXPECT_EQ(decide(g, agent, "ctx", options_for(Partner::B, kMenu), {}, w).chosen_option_id, "o1");
}

TEST(Decide, UnmatchedTwiceIsAnError) {
  auto backend = with_decisions({decision("Books a flight to Lisbon"), decision("Adopts a cat")});
  llm::Gateway g(backend);
  auto agent = agent_b(g);
  Warnings w;
  EXPECT_THROW(decide(g, agent, "ctx", options_for(Partner::B, kMenu), {}, w), DecisionError);
  EXPECT_EQ(backend->call_count("decision"), 2u);
}

TEST(Decide, OneRetryCanRecover) {
  llm::Gateway g(with_decisions({decision("Books a flight"), decision("o3")}));
  auto agent = agent_b(g);
  Warnings w;
  EXPECT_EQ(decide(g, agent, "ctx", options_for(Partner::B, kMenu), {}, w).chosen_option_id, "o3");
}

TEST(Decide, InvariantToOptionOrderWhenPickingById) {
  auto set = options_for(Partner::B, kMenu);
  auto shuffled = set;
  std::reverse(shuffled.options.begin(), shuffled.options.end());
  for (const auto* s : {&set, &shuffled}) {
    llm::Gateway g(with_decisions({decision("o2")}));
    auto agent = agent_b(g);
    Warnings w;
    const auto d = decide(g, agent, "ctx", *s, {}, w);
    EXPECT_EQ(d.chosen_option_id, "o2");
    EXPECT_EQ(s->find("o2")->description, kMenu[1]);
  }
}

TEST(Decide, WrongPartnerOrBadSetRejected) {
  llm::Gateway g(fixture::world());
  auto agent = agent_b(g);
  Warnings w;
  EXPECT_THROW(decide(g, agent, "ctx", options_for(Partner::A, kMenu), {}, w), std::invalid_argument);
  EXPECT_THROW(decide(g, agent, "ctx", options_for(Partner::B, {"a", "b"}), {}, w), std::invalid_argument);
}

TEST(Agent, IdentityLayerAndRoundTrip) {
  llm::Gateway g(fixture::world());
  auto agent = agent_b(g);
  const auto texts = identity_texts(agent.persona, {"We met at a bus stop."});
  EXPECT_EQ(agent.memory.size(MemoryLayer::Identity), texts.size());
  EXPECT_EQ(texts.back(), "We met at a bus stop.");
  EXPECT_EQ(agent_from_json(to_json(agent)), agent);
}

TEST(Metrics, StayInUnitRange) {
  RelationshipState s;
  s.alternatives = Alternatives::Hot;
  s.constraints = Constraints::Accrued;
  const auto m = update_metrics({}, 5.0, AffectVector::clamped({1, 0, 0, 0, 0, 0, 1, 1}), s);
  for (double v : {m.dedication, m.alternatives, m.investments}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
