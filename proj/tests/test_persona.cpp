// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "relate/persona.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::persona;

namespace {

std::shared_ptr<llm::ScriptedBackend> scripted(std::string role, std::vector<std::string> responses) {
  return std::make_shared<llm::ScriptedBackend>(
      std::vector<llm::ScriptRule>{{std::move(role), std::nullopt, std::move(responses), nullptr}});
}

std::string fusion_reply(std::size_t words, std::size_t rules) {
  Json j;
  j["narrative"] = fixture::n_words(words);
  j["playbook"] = Json::array();
  for (std::size_t i = 0; i < rules; ++i) j["playbook"].push_back({{"condition", "if pressed"}, {"action", "then pause"}});
  return j.dump();
}

const std::vector<InstrumentSynopsis> kSynopses = {
    {InstrumentKind::Ctss, Reporter::Self, "Goes quiet in arguments.", {"goes quiet"}},
    {InstrumentKind::Ctss, Reporter::Partner, "Partner says they shut down.", {}}};

const std::string kStonewalling =
    "When we argue I usually stop talking and leave the room. I would rather wait until things cool "
    "down than keep going.";

}  // namespace

TEST(Summarize, EmptyDocumentIsAnError) {
  llm::Gateway g(scripted("instrument_summary", {}));
  Warnings w;
  EXPECT_THROW(summarize_instrument(g, {InstrumentKind::Ctss, "s__A", "  \n ", Reporter::Self}, w),
               std::invalid_argument);
}

TEST(Summarize, FabricatedQuoteIsDropped) {
  llm::Gateway g(scripted("instrument_summary",
                          {Json{{"synopsis", "Withdraws from conflict."},
                                {"evidence", Json::array({"stop talking and leave the room", "I scream at them"})}}
                               .dump()}));
  Warnings w;
  const auto s = summarize_instrument(g, {InstrumentKind::Ctss, "s__A", kStonewalling, Reporter::Self}, w);
  EXPECT_EQ(s.evidence, std::vector<std::string>{"stop talking and leave the room"});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("I scream at them"), std::string::npos);
}

TEST(Summarize, StonewallingDocumentGolden) {
  auto backend = scripted("instrument_summary",
                          {Json{{"synopsis", "In conflict you withdraw: you stop talking and leave until things cool "
                                             "down."},
                                {"evidence", Json::array({"I usually stop  talking\nand leave the room"})}}
                               .dump()});
  llm::Gateway g(backend);
  Warnings w;
  const auto s = summarize_instrument(g, {InstrumentKind::Ctss, "s__A", kStonewalling, Reporter::Partner}, w);
  EXPECT_TRUE(w.empty());
  EXPECT_NE(s.text.find("withdraw"), std::string::npos);
  ASSERT_EQ(s.evidence.size(), 1u);
  EXPECT_EQ(s.kind, InstrumentKind::Ctss);
  EXPECT_EQ(s.reporter, Reporter::Partner);
  const auto rendered = backend->calls().at(0).rendered;
  EXPECT_NE(rendered.find("reported by partner"), std::string::npos);
  EXPECT_NE(rendered.find(kStonewalling), std::string::npos);
}

TEST(Evidence, WhitespaceNormalizedSubstring) {
  EXPECT_TRUE(evidence_in_source("a  b\nc", "x a b c y"));
  EXPECT_FALSE(evidence_in_source("a b d", "x a b c y"));
  EXPECT_EQ(normalize_whitespace("  a \t b  "), "a b");
}

TEST(Fuse, MidRangeAccepted) {
  llm::Gateway g(scripted("persona_fusion", {fusion_reply(250, 6)}));
  const auto p = fuse_persona(g, kSynopses);
  EXPECT_EQ(word_count(p.narrative), 250u);
  EXPECT_EQ(p.playbook.size(), 6u);
  EXPECT_EQ(p.source_synopses, kSynopses);
}

TEST(Fuse, ExactlyTwoHundredWordsAccepted) {
  llm::Gateway g(scripted("persona_fusion", {fusion_reply(200, 5)}));
  EXPECT_EQ(word_count(fuse_persona(g, kSynopses).narrative), 200u);
}

TEST(Fuse, ShortNarrativeFailsAfterRetry) {
  auto backend = scripted("persona_fusion", {fusion_reply(150, 6), fusion_reply(150, 6)});
  llm::Gateway g(backend);
  EXPECT_THROW(fuse_persona(g, kSynopses), SynthesisError);
  EXPECT_EQ(backend->call_count("persona_fusion"), 2u);
  EXPECT_NE(backend->calls()[1].rendered.find("150 words"), std::string::npos);
}

TEST(Fuse, RetryCanRecover) {
  llm::Gateway g(scripted("persona_fusion", {fusion_reply(250, 9), fusion_reply(250, 7)}));
  EXPECT_EQ(fuse_persona(g, kSynopses).playbook.size(), 7u);
}

TEST(Fuse, EmptyInputIsAnError) {
  llm::Gateway g(scripted("persona_fusion", {}));
  EXPECT_THROW(fuse_persona(g, std::vector<InstrumentSynopsis>{}), std::invalid_argument);
}

TEST(BuildPersona, MixedSubjectsRejected) {
  llm::Gateway g(scripted("instrument_summary", {}));
  Warnings w;
  const std::vector<InstrumentDoc> docs = {{InstrumentKind::Ctss, "a__A", "x", Reporter::Self},
                                           {InstrumentKind::Ctss, "b__A", "y", Reporter::Self}};
  EXPECT_THROW(build_persona(g, docs, w), std::invalid_argument);
}

TEST(BaselineCommitment, ScoreIsPassedThrough) {
  llm::Gateway g(scripted("baseline_commitment", {R"({"score": 3.0, "rationale": "steady"})"}));
  Warnings w;
  const auto e = infer_baseline_commitment(g, fixture::make_persona("a"), fixture::make_persona("b"), w);
  EXPECT_DOUBLE_EQ(e.score, 3.0);
  EXPECT_EQ(e.rationale, "steady");
  EXPECT_TRUE(w.empty());
}

TEST(BaselineCommitment, OutOfRangeIsClamped) {
  llm::Gateway g(scripted("baseline_commitment", {R"({"score": 7, "rationale": "very keen"})"}));
  Warnings w;
  const auto e = infer_baseline_commitment(g, fixture::make_persona("a"), fixture::make_persona("b"), w);
  EXPECT_DOUBLE_EQ(e.score, 5.0);
  EXPECT_EQ(w.size(), 1u);
}

TEST(PairDyads, PairsBySuffixAndReportsStragglers) {
  std::map<std::string, Persona> personas = {{"d2__B", fixture::make_persona("2b")},
                                             {"d1__A", fixture::make_persona("1a")},
                                             {"d2__A", fixture::make_persona("2a")},
                                             {"d1__B", fixture::make_persona("1b")},
                                             {"d3__A", fixture::make_persona("3a")},
                                             {"loner", fixture::make_persona("l")}};
  Warnings w;
  const auto dyads = pair_dyads(personas, w);
  ASSERT_EQ(dyads.size(), 2u);
  EXPECT_EQ(dyads[0].dyad_id, "d1");
  EXPECT_EQ(dyads[1].a, personas["d2__A"]);
  EXPECT_EQ(dyads[1].b, personas["d2__B"]);
  EXPECT_EQ(w.size(), 2u);
}

TEST(RenderPersona, PlaybookLines) {
  Persona p;
  p.narrative = "You listen.";
  p.playbook = {{"if criticized", "then ask a question"}};
  EXPECT_EQ(render_persona(p), "You listen.\nPlaybook:\n- if criticized -> then ask a question");
}

TEST(SyntheticCohort, SeededAndComplete) {
  const auto a = generate_synthetic_cohort(5, 11);
  const auto b = generate_synthetic_cohort(5, 11);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].dyad_id, b[i].dyad_id);
    ASSERT_EQ(a[i].docs.size(), 14u);
    for (std::size_t d = 0; d < a[i].docs.size(); ++d) EXPECT_EQ(a[i].docs[d].text, b[i].docs[d].text);
  }
  EXPECT_NE(generate_synthetic_cohort(5, 12)[0].docs[0].text + generate_synthetic_cohort(5, 12)[1].docs[0].text,
            a[0].docs[0].text + a[1].docs[0].text);
}

TEST(Files, InstrumentDirAndPersonaRoundTrip) {
  fixture::TempDir dir;
  const auto cohort = generate_synthetic_cohort(2, 3);
  std::vector<InstrumentDoc> docs;
  for (const auto& d : cohort) docs.insert(docs.end(), d.docs.begin(), d.docs.end());
  write_instrument_dir(dir.path() / "in", docs);
  const auto loaded = load_instrument_dir(dir.path() / "in");
  EXPECT_EQ(loaded.size(), 4u);
  std::size_t total = 0;
  for (const auto& [subject, list] : loaded) total += list.size();
  EXPECT_EQ(total, docs.size());

  const auto p = fixture::make_persona("x");
  save_persona(dir.path() / "p.json", p);
  EXPECT_EQ(load_persona(dir.path() / "p.json"), p);
}
