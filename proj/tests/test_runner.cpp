// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "relate/runner.hpp"
#include "relate/synthetic_backend.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::runner;

namespace {

std::vector<Dyad> two_dyads() { return {fixture::make_dyad("d1"), fixture::make_dyad("d2")}; }

RunConfig config_in(const std::filesystem::path& dir, int runs = 5, int scenes = 2) {
  RunConfig c;
  c.runs_per_dyad = runs;
  c.concurrency = 4;
  c.simulation.num_scenes = scenes;
  c.seed = 99;
  c.output_dir = dir;
  return c;
}

std::map<std::string, std::string> tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = fixture::slurp(e.path());
  }
  return out;
}

}  // namespace

TEST(Runner, OneTracePerRunAndDeterministic) {
  fixture::TempDir dir;
  const auto dyads = two_dyads();
  const auto bank = fixture::small_bank();
  const auto a = run_batch(dyads, bank, config_in(dir.path() / "a"), fixture::world(), fixture::fast_gateway());
  const auto b = run_batch(dyads, bank, config_in(dir.path() / "b"), fixture::world(), fixture::fast_gateway());
  ASSERT_EQ(a.traces.size(), 10u);
  const auto ta = tree(dir.path() / "a");
  EXPECT_EQ(ta.size(), 10u);
  EXPECT_EQ(ta, tree(dir.path() / "b"));
  EXPECT_TRUE(ta.contains("d2/run_4.jsonl"));
  for (const auto& [name, text] : ta) EXPECT_TRUE(validate_trace_text(text).ok()) << name;
  EXPECT_EQ(a.traces[0].dyad_id, "d1");
  EXPECT_EQ(a.traces[9].run_index, 4);
  EXPECT_LE(a.peak_in_flight, 4u);
  EXPECT_GE(a.peak_in_flight, 1u);
}

TEST(Runner, RunSeedsAreDistinct) {
  EXPECT_NE(run_seed(1, "d1", 0), run_seed(1, "d1", 1));
  EXPECT_NE(run_seed(1, "d1", 0), run_seed(1, "d2", 0));
  EXPECT_NE(run_seed(1, "d1", 0), run_seed(2, "d1", 0));
  EXPECT_EQ(run_seed(1, "d1", 0), run_seed(1, "d1", 0));
}

TEST(Runner, FailingRunsDoNotStopTheBatch) {
  fixture::TempDir dir;
  auto rules = fixture::world_rules();
  // Partner A of d2 always answers with an action that matches no option.
  rules.insert(rules.begin(), llm::ScriptRule{"decision", std::string("d2-alpha"), {}, [](const llm::PromptSpec&) {
                                                return std::string(R"({"action": "Adopts a cat", "reasoning": "r"})");
                                              }});
  auto backend = std::make_shared<llm::ScriptedBackend>(std::move(rules));
  const auto dyads = two_dyads();
  const auto result =
      run_batch(dyads, fixture::small_bank(), config_in(dir.path()), backend, fixture::fast_gateway());
  ASSERT_EQ(result.runs.size(), 10u);
  int valid = 0;
  for (const auto& r : result.runs) {
    if (r.valid) {
      ++valid;
      EXPECT_EQ(r.dyad_id, "d1");
    } else {
      EXPECT_EQ(r.dyad_id, "d2");
      EXPECT_FALSE(r.error.empty());
    }
  }
  EXPECT_EQ(valid, 5);
  const auto files = tree(dir.path());
  EXPECT_TRUE(files.contains("d2/run_0.jsonl"));
  EXPECT_FALSE(parse_trace(files.at("d2/run_0.jsonl")).valid);
  EXPECT_FALSE(std::filesystem::exists(checkpoint_dir(dir.path(), "d1", 0)));
}

TEST(Runner, AbortedBatchResumesToTheSameBytes) {
  fixture::TempDir dir;
  const auto dyads = two_dyads();
  const auto bank = fixture::small_bank(3);
  auto reference = config_in(dir.path() / "ref", 2, 3);
  reference.concurrency = 1;
  run_batch(dyads, bank, reference, fixture::world(), fixture::fast_gateway());

  auto interrupted = config_in(dir.path() / "resumed", 2, 3);
  interrupted.concurrency = 1;
  interrupted.abort_after_scenes = 5;
  const auto first = run_batch(dyads, bank, interrupted, fixture::world(), fixture::fast_gateway());
  EXPECT_TRUE(first.aborted);
  EXPECT_LT(first.traces.size(), 4u);

  interrupted.abort_after_scenes.reset();
  const auto second = run_batch(dyads, bank, interrupted, fixture::world(), fixture::fast_gateway());
  EXPECT_FALSE(second.aborted);
  ASSERT_EQ(second.traces.size(), 4u);
  int resumed = 0, reused = 0;
  for (const auto& r : second.runs) {
    resumed += r.resumed_scenes > 0;
    reused += r.reused;
  }
  EXPECT_EQ(resumed, 1);
  EXPECT_EQ(reused, 1);
  EXPECT_EQ(tree(dir.path() / "resumed"), tree(dir.path() / "ref"));

  const auto third = run_batch(dyads, bank, interrupted, fixture::world(), fixture::fast_gateway());
  for (const auto& r : third.runs) EXPECT_TRUE(r.reused);
}

TEST(Runner, ConcurrencyBoundHolds) {
  fixture::TempDir dir;
  std::vector<Dyad> dyads;
  for (int i = 0; i < 6; ++i) dyads.push_back(fixture::make_dyad(fmt::format("d{}", i)));
  auto c = config_in(dir.path(), 3, 2);
  c.concurrency = 3;
  const auto r = run_batch(dyads, scene::ScenarioBank(scene::generate_bank(5, 1)), c,
                           std::make_shared<synth::SyntheticBackend>(1));
  EXPECT_EQ(r.traces.size(), 18u);
  EXPECT_LE(r.peak_in_flight, 3u);
}

TEST(Runner, ConfigValidation) {
  RunConfig c;
  c.output_dir = "x";
  c.runs_per_dyad = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c.runs_per_dyad = 1;
  c.concurrency = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  const std::vector<Dyad> dup = {fixture::make_dyad("d"), fixture::make_dyad("d")};
  c.concurrency = 1;
  EXPECT_THROW(run_batch(dup, fixture::small_bank(), c, fixture::world()), std::invalid_argument);
}

TEST(Runner, DyadFileRoundTrip) {
  fixture::TempDir dir;
  const auto dyads = two_dyads();
  fixture::spit(dir.path() / "dyads.jsonl", serialize_dyads(dyads));
  EXPECT_EQ(load_dyads(dir.path() / "dyads.jsonl"), dyads);
}
