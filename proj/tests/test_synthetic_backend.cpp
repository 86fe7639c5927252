// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "relate/persona.hpp"
#include "relate/scene_master.hpp"
#include "relate/synthetic_backend.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::synth;

TEST(Synthetic, ClassifiesItsOwnOptions) {
  EXPECT_EQ(classify_option("Apologizes to Partner B for their part and asks what would help"), Move::Repair);
  EXPECT_EQ(classify_option("Apologizes to Partner A for their part and asks what would help"), Move::Repair);
  EXPECT_EQ(classify_option("Puts on headphones and goes quiet"), Move::Withdraw);
  EXPECT_EQ(classify_option("Spends the evening texting an ex"), Move::Rival);
  EXPECT_FALSE(classify_option("Adopts a cat"));
}

TEST(Synthetic, ReadsArchetypeMarkers) {
  const auto a = read_archetype("You are warm. Your attachment reads as anxious and you act as a pursuer.");
  EXPECT_EQ(a.attachment, persona::AttachmentStyle::Anxious);
  EXPECT_EQ(a.role, persona::ConflictRole::Pursuer);
  const auto d = read_archetype("No markers here.");
  EXPECT_EQ(d.attachment, persona::AttachmentStyle::Secure);
  EXPECT_EQ(d.role, persona::ConflictRole::Collaborator);
}

TEST(Synthetic, LexiconAffect) {
  const auto calm = lexicon_affect("the table is brown");
  for (double v : calm.values()) EXPECT_DOUBLE_EQ(v, 0.0);
  const auto angry = lexicon_affect("She was furious and started to shout and yell.");
  EXPECT_EQ(angry.dominant(), 4u);
  const auto fond = lexicon_affect("They laugh and smile, happy together.");
  EXPECT_GT(fond.get("joy"), fond.get("anger"));
  for (double v : fond.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Synthetic, RepliesArePureFunctionsOfSeedAndPrompt) {
  llm::PromptSpec spec;
  spec.role_tag = "affect_embed";
  spec.sections = {{"Text", "They laugh about the broken umbrella."}};
  SyntheticBackend a(3), b(3);
  EXPECT_EQ(a.complete(spec, "m").text, b.complete(spec, "m").text);
  EXPECT_EQ(a.embed("x"), b.embed("x"));
  EXPECT_EQ(a.embedding_dimension(), 64u);
}

TEST(Synthetic, UnknownRoleIsConfigError) {
  SyntheticBackend b(1);
  llm::PromptSpec spec;
  spec.role_tag = "poetry";
  EXPECT_THROW(b.complete(spec, "m"), llm::ConfigError);
}

TEST(Synthetic, DrivesPersonaConstructionThroughTheGates) {
  const auto cohort = persona::generate_synthetic_cohort(2, 5);
  llm::Gateway g(std::make_shared<SyntheticBackend>(5));
  for (const auto& d : cohort) {
    std::vector<persona::InstrumentDoc> a_docs;
    for (const auto& doc : d.docs) {
      if (doc.subject_id == d.dyad_id + "__A") a_docs.push_back(doc);
    }
    ASSERT_EQ(a_docs.size(), 7u);
    Warnings w;
    const auto p = persona::build_persona(g, a_docs, w);
    EXPECT_GE(word_count(p.narrative), 200u);
    EXPECT_LE(word_count(p.narrative), 300u);
    EXPECT_GE(p.playbook.size(), 5u);
    EXPECT_LE(p.playbook.size(), 7u);
  }
}

TEST(Synthetic, DrivesValidRuns) {
  llm::Gateway g(std::make_shared<SyntheticBackend>(9));
  const scene::ScenarioBank bank(scene::generate_bank(10, 9));
  const auto trace = scene::run_simulation(g, bank, fixture::make_dyad("d1"), fixture::small_config(4), 17);
  ASSERT_TRUE(trace.valid) << trace.error;
  EXPECT_TRUE(validate_trace(trace).ok());
  EXPECT_FALSE(trace.scenes.empty());
}
