// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "relate/domain.hpp"
#include "test_support.hpp"

using namespace relate;

namespace {

bool has_violation(const ValidationReport& r, std::string_view text) {
  for (const auto& v : r.violations) {
    if (v.message.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Tokens, EveryValueRoundTrips) {
  for (auto c : all_values<Conflict>()) EXPECT_EQ(parse_token<Conflict>(to_token(c)), c);
  for (auto c : all_values<TurningPointCategory>()) EXPECT_EQ(parse_token<TurningPointCategory>(to_token(c)), c);
  for (auto c : all_values<OutcomeLabel>()) EXPECT_EQ(parse_token<OutcomeLabel>(to_token(c)), c);
  EXPECT_EQ(to_token(BreakupMarker::Hard), "hard");
  EXPECT_EQ(to_token(OutcomeLabel::BrokenUpOrDivorced), "broken_up_or_divorced");
}

TEST(Tokens, UnknownStringsAreRejected) {
  EXPECT_FALSE(parse_token<Conflict>("simmering"));
  EXPECT_FALSE(parse_token<TurningPointCategory>("Romance"));
  EXPECT_FALSE(parse_token<Clarity>("Explicit"));
  try {
    parse_token_or_throw<Conflict>("simmering", "/conflict");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/conflict");
    EXPECT_NE(std::string(e.what()).find("simmering"), std::string::npos);
  }
}

TEST(StateFields, SetRejectsOutOfVocabulary) {
  RelationshipState s;
  EXPECT_TRUE(s.all_unknown());
  EXPECT_TRUE(set_state_field(s, "clarity", "explicit"));
  EXPECT_EQ(s.clarity, Clarity::Explicit);
  EXPECT_FALSE(set_state_field(s, "clarity", "simmering"));
  EXPECT_EQ(s.clarity, Clarity::Explicit);
  EXPECT_FALSE(set_state_field(s, "mood", "none"));
  EXPECT_EQ(state_field_token(s, "clarity"), "explicit");
  EXPECT_EQ(state_vocabulary("network").size(), 5u);
  EXPECT_TRUE(state_vocabulary("mood").empty());
}

TEST(Affect, RangeIsEnforced) {
  std::array<double, kAffectDims> v{};
  v[4] = 1.4;
  EXPECT_THROW(AffectVector{v}, std::invalid_argument);
  const auto c = AffectVector::clamped(v);
  EXPECT_DOUBLE_EQ(c.get("anger"), 1.0);
  EXPECT_EQ(c.dominant(), 4u);
  v[4] = std::nan("");
  EXPECT_DOUBLE_EQ(AffectVector::clamped(v).get("anger"), 0.0);
}

TEST(WordCount, HyphenatedWordsCountOnce) {
  EXPECT_EQ(word_count("a long-term  plan\n here"), 4u);
  EXPECT_EQ(word_count("   "), 0u);
}

TEST(Options, ProblemsAreReported) {
  OptionSet set;
  set.acting_partner = Partner::B;
  for (int i = 1; i <= 5; ++i) set.options.push_back({fmt::format("o{}", i), fmt::format("act {}", i), Partner::B});
  ASSERT_EQ(option_set_problems(set).size(), 1u);
  EXPECT_EQ(option_set_problems(set)[0], "options length 5 ∉ [3,4]");
  set.options.resize(3);
  EXPECT_TRUE(option_set_problems(set).empty());
  set.options[2].actor = Partner::A;
  set.options[1].description = set.options[0].description;
  EXPECT_EQ(option_set_problems(set).size(), 2u);
}

TEST(ValidateTrace, SampleTraceIsValid) {
  const auto trace = fixture::sample_trace();
  ASSERT_TRUE(trace.valid) << trace.error;
  const auto r = validate_trace(trace);
  EXPECT_TRUE(r.ok()) << (r.violations.empty() ? "" : r.violations[0].message);
}

TEST(ValidateTrace, FiveOptionsIsAViolation) {
  auto trace = fixture::sample_trace(1);
  auto& set = trace.scenes[0].option_sets[0];
  set.options.push_back({"o4", "Goes for a walk", set.acting_partner});
  set.options.push_back({"o5", "Calls a friend", set.acting_partner});
  EXPECT_TRUE(has_violation(validate_trace(trace), "options length 5 ∉ [3,4]"));
}

TEST(ValidateTrace, AllUnknownStateIsValid) {
  auto trace = fixture::sample_trace(1);
  trace.scenes[0].inferred_state = RelationshipState{};
  EXPECT_TRUE(validate_trace(trace).ok());
}

TEST(ValidateTrace, FinalCommitmentMustMatchLastScene) {
  auto trace = fixture::sample_trace();
  trace.final_commitment->score = 4.5;
  EXPECT_TRUE(has_violation(validate_trace(trace), "final commitment"));
}

TEST(ValidateTrace, ChosenIdMustBePresented) {
  auto trace = fixture::sample_trace(1);
  trace.scenes[0].decisions[0].chosen_option_id = "o9";
  EXPECT_FALSE(validate_trace(trace).ok());
}

TEST(ValidateTrace, CommitmentOutOfRange) {
  auto trace = fixture::sample_trace(1);
  trace.scenes[0].commitment.score = 0.5;
  trace.final_commitment = trace.scenes[0].commitment;
  EXPECT_FALSE(validate_trace(trace).ok());
}

TEST(ValidateTrace, ParseFailureIsOneViolation) {
  const auto r = validate_trace_text("{not json");
  ASSERT_EQ(r.violations.size(), 1u);
}

TEST(Canonical, TraceRoundTripIsByteIdentical) {
  const auto trace = fixture::sample_trace();
  const auto text = serialize_trace(trace);
  const auto parsed = parse_trace(text);
  EXPECT_EQ(parsed, trace);
  EXPECT_EQ(serialize_trace(parsed), text);
}

TEST(Canonical, DyadRoundTrip) {
  auto d = fixture::make_dyad("d9");
  d.identity_memories_a = {"We met at a bus stop."};
  EXPECT_EQ(from_json<Dyad>(to_json(d)), d);
}

TEST(Canonical, MissingFieldNamesPath) {
  Json j = to_json(fixture::make_persona("x"));
  j.erase("playbook");
  try {
    from_json<Persona>(j, "/persona_a");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(e.path().find("/persona_a"), std::string::npos);
  }
}
