// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "relate/memory.hpp"
#include "test_support.hpp"

using namespace relate;
using namespace relate::memory;

namespace {

MemoryEntry entry(std::string id, MemoryLayer layer, std::vector<double> sem, std::array<double, kAffectDims> aff = {},
                  std::optional<int> scene = std::nullopt) {
  MemoryEntry e;
  e.id = std::move(id);
  e.layer = layer;
  e.text = e.id;
  e.semantic_embedding = std::move(sem);
  e.affect_embedding = AffectVector(aff);
  e.created_at_scene = scene;
  return e;
}

std::shared_ptr<llm::ScriptedBackend> scripted(std::string role, std::vector<std::string> responses) {
  return std::make_shared<llm::ScriptedBackend>(
      std::vector<llm::ScriptRule>{{std::move(role), std::nullopt, std::move(responses), nullptr}});
}

const std::array<double, kAffectDims> kFear = {0.1, 0, 0.8, 0, 0, 0, 0, 0};

}  // namespace

TEST(Cosine, ZeroVectorIsZeroAndLengthsMustMatch) {
  const std::vector<double> z = {0, 0}, x = {1, 0};
  EXPECT_EQ(cosine(z, x), 0.0);
  EXPECT_NEAR(cosine(x, x), 1.0, 1e-15);
  EXPECT_THROW(cosine(x, std::vector<double>{1, 0, 0}), std::invalid_argument);
}

TEST(HybridSimilarity, LambdaZeroIsSemanticOnly) {
  const auto m = entry("m", MemoryLayer::Identity, {1, 2, 3}, kFear);
  const std::vector<double> c = {3, 1, 2};
  EXPECT_DOUBLE_EQ(hybrid_similarity(m, c, AffectVector({0, 1, 0, 0, 0, 0, 0, 0}), 0.0), cosine(m.semantic_embedding, c));
}

TEST(HybridSimilarity, IdenticalVectorsAtHalfLambda) {
  const auto m = entry("m", MemoryLayer::Identity, {0.3, -0.4, 0.5}, kFear);
  EXPECT_NEAR(hybrid_similarity(m, m.semantic_embedding, AffectVector(kFear), 0.5), 1.5, 1e-12);
}

TEST(HybridSimilarity, OrthogonalSemanticsIdenticalAffect) {
  const auto m = entry("m", MemoryLayer::Identity, {1, 0}, kFear);
  EXPECT_NEAR(hybrid_similarity(m, std::vector<double>{0, 1}, AffectVector(kFear), 0.5), 0.5, 1e-12);
}

TEST(HybridSimilarity, AffineInLambda) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    std::array<double, kAffectDims> a{}, b{};
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const auto m = entry("m", MemoryLayer::Identity, {u(rng) - 0.5, u(rng) - 0.5, u(rng)}, a);
    const std::vector<double> c = {u(rng), u(rng) - 0.5, u(rng)};
    const double slope = cosine(a, b);
    const double base = hybrid_similarity(m, c, AffectVector(b), 0.0);
    const double lambda = 2 * u(rng);
    EXPECT_NEAR(hybrid_similarity(m, c, AffectVector(b), lambda), base + lambda * slope, 1e-12);
  }
  EXPECT_THROW(hybrid_similarity(entry("m", MemoryLayer::Identity, {1}), std::vector<double>{1}, {}, -0.1),
               std::invalid_argument);
}

TEST(MemoryStore, AddEnforcesInvariants) {
  MemoryStore s(2);
  s.add(entry("id-0001", MemoryLayer::Identity, {1, 0}));
  EXPECT_THROW(s.add(entry("id-0001", MemoryLayer::Identity, {1, 0})), std::invalid_argument);
  EXPECT_THROW(s.add(entry("x", MemoryLayer::Identity, {1, 0, 0})), std::invalid_argument);
  EXPECT_THROW(s.add(entry("y", MemoryLayer::Simulation, {1, 0})), std::invalid_argument);
  EXPECT_THROW(s.add(entry("z", MemoryLayer::Identity, {1, 0}, {}, 3)), std::invalid_argument);
  EXPECT_EQ(s.size(), 1u);
}

TEST(MemoryStore, SnapshotRoundTrip) {
  MemoryStore s(2);
  s.add(entry(s.next_id(MemoryLayer::Identity), MemoryLayer::Identity, {1, 0}));
  s.add(entry(s.next_id(MemoryLayer::Simulation), MemoryLayer::Simulation, {0.5, 0.5}, kFear, 2));
  s.add(entry(s.next_id(MemoryLayer::Scene), MemoryLayer::Scene, {0, 1}, {}, 2));
  const auto copy = MemoryStore::from_snapshot(s.snapshot());
  EXPECT_EQ(copy, s);
  s.clear_scene_layer();
  EXPECT_EQ(s.size(MemoryLayer::Scene), 0u);
  EXPECT_EQ(s.size(), 2u);
}

TEST(Retrieve, KLargerThanStoreReturnsAllSorted) {
  MemoryStore s(2);
  s.add(entry("id-1", MemoryLayer::Identity, {1, 0}));
  s.add(entry("id-2", MemoryLayer::Identity, {0, 1}));
  s.add(entry("id-3", MemoryLayer::Identity, {1, 1}));
  const auto r = retrieve_top_k(s, std::vector<double>{1, 0.1}, {}, 5, 0.5);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].entry.id, "id-1");
  EXPECT_EQ(r[1].entry.id, "id-3");
  EXPECT_EQ(r[2].entry.id, "id-2");
}

TEST(Retrieve, KOnePicksArgmax) {
  MemoryStore s(2);
  // Cosines against (1, 0) of 0.9 and 0.2.
  s.add(entry("id-lo", MemoryLayer::Identity, {0.2, std::sqrt(1 - 0.04)}));
  s.add(entry("id-hi", MemoryLayer::Identity, {0.9, std::sqrt(1 - 0.81)}));
  const auto r = retrieve_top_k(s, std::vector<double>{1, 0}, {}, 1, 0.5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].entry.id, "id-hi");
  EXPECT_NEAR(r[0].score, 0.9, 1e-12);
}

TEST(Retrieve, TiesPreferRecentSceneThenId) {
  MemoryStore s(2);
  s.add(entry("id-a", MemoryLayer::Identity, {1, 0}));
  s.add(entry("sim-b", MemoryLayer::Simulation, {1, 0}, {}, 1));
  s.add(entry("sim-a", MemoryLayer::Simulation, {1, 0}, {}, 1));
  s.add(entry("sim-c", MemoryLayer::Simulation, {1, 0}, {}, 4));
  const auto r = retrieve_top_k(s, std::vector<double>{1, 0}, {}, 4, 0.0);
  std::vector<std::string> ids;
  for (const auto& x : r) ids.push_back(x.entry.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"sim-c", "sim-a", "sim-b", "id-a"}));
}

TEST(Retrieve, SceneLayerIsNeverRetrieved) {
  MemoryStore s(2);
  s.add(entry("scn-1", MemoryLayer::Scene, {1, 0}, {}, 0));
  s.add(entry("id-1", MemoryLayer::Identity, {0, 1}));
  const auto r = retrieve_top_k(s, std::vector<double>{1, 0}, {}, 5, 0.5);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].entry.id, "id-1");
  EXPECT_EQ(retrieve_top_k(s, std::vector<double>{1, 0}, {}, 5, 0.5, {MemoryLayer::Scene}).size(), 1u);
}

TEST(Retrieve, Preconditions) {
  MemoryStore s(2);
  EXPECT_THROW(retrieve_top_k(s, std::vector<double>{1, 0}, {}, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(retrieve_top_k(s, std::vector<double>{1, 0, 0}, {}, 1, 0.5), std::invalid_argument);
}

TEST(Appraise, ScriptedComponentsPassThrough) {
  Json reply = {{"joy", 0.1}, {"sadness", 0}, {"fear", 0.8}, {"surprise", 0}, {"anger", 0},
                {"disgust", 0}, {"trust", 0.2}, {"anticipation", 0}, {"internal_thought", "Uh oh."}};
  llm::Gateway g(scripted("appraisal", {reply.dump()}));
  Warnings w;
  const auto a = appraise(g, fixture::make_persona("p"), {}, "A door slams.", w);
  EXPECT_DOUBLE_EQ(a.affect.get("fear"), 0.8);
  EXPECT_DOUBLE_EQ(a.affect.get("joy"), 0.1);
  EXPECT_EQ(a.internal_thought, "Uh oh.");
  EXPECT_TRUE(w.empty());
}

TEST(Appraise, MissingTrustDefaultsToZeroWithWarning) {
  Json reply = {{"joy", 0.1}, {"sadness", 0}, {"fear", 0.8}, {"surprise", 0}, {"anger", 0},
                {"disgust", 0}, {"anticipation", 0}, {"internal_thought", "Hm."}};
  llm::Gateway g(scripted("appraisal", {reply.dump()}));
  Warnings w;
  const auto a = appraise(g, fixture::make_persona("p"), {}, "ctx", w);
  EXPECT_EQ(a.affect.get("trust"), 0.0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("trust"), std::string::npos);
}

TEST(Appraise, OutOfRangeIsClampedWithWarning) {
  Json reply = {{"joy", 0}, {"sadness", 0}, {"fear", 0}, {"surprise", 0}, {"anger", 1.4},
                {"disgust", 0}, {"trust", 0}, {"anticipation", 0}, {"internal_thought", "Grr."}};
  llm::Gateway g(scripted("appraisal", {reply.dump()}));
  Warnings w;
  EXPECT_DOUBLE_EQ(appraise(g, fixture::make_persona("p"), {}, "ctx", w).affect.get("anger"), 1.0);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_THROW(appraise(g, fixture::make_persona("p"), {}, "", w), std::invalid_argument);
}

TEST(AffectEmbed, CachedAndDeterministic) {
  Json anger = {{"joy", 0}, {"sadness", 0.1}, {"fear", 0}, {"surprise", 0.2},
                {"anger", 0.9}, {"disgust", 0.1}, {"trust", 0}, {"anticipation", 0}};
  auto backend = scripted("affect_embed", {anger.dump()});
  llm::Gateway g(backend);
  AffectEmbedder embed;
  Warnings w;
  const auto v = embed(g, "I was furious and slammed the door", w);
  EXPECT_EQ(kAffectNames[v.dominant()], "anger");
  EXPECT_EQ(embed(g, "I was furious and slammed the door", w), v);
  EXPECT_EQ(backend->call_count(), 1u);
  EXPECT_EQ(embed.cache_size(), 1u);
  EXPECT_THROW(embed(g, "", w), std::invalid_argument);

  AffectEmbedder restored;
  restored.restore(embed.snapshot());
  EXPECT_EQ(restored(g, "I was furious and slammed the door", w), v);
}

TEST(RecordEpisode, AppendsAndIsSelfRetrievable) {
  llm::Gateway g(fixture::world());
  AffectEmbedder embed;
  MemoryStore store(g.embedding_dimension());
  Warnings w;
  add_identity(g, embed, store, "You value honesty.", w);
  add_identity(g, embed, store, "You plan ahead.", w);
  EXPECT_EQ(store.size(MemoryLayer::Simulation), 0u);
  const auto& first = record_episode(g, embed, store, 0, "Partner A chose to apologize.", w);
  EXPECT_EQ(store.size(MemoryLayer::Simulation), 1u);
  EXPECT_EQ(first.created_at_scene, 0);
  for (int i = 1; i < 6; ++i) record_episode(g, embed, store, i, fmt::format("Episode {} happened.", i), w);
  EXPECT_EQ(store.size(MemoryLayer::Identity), 2u);
  EXPECT_EQ(store.size(MemoryLayer::Simulation), 6u);

  const auto& target = store.entries()[4];
  const auto r = retrieve_top_k(g, store, target.text, target.affect_embedding, 3, 0.5);
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r[0].entry.id, target.id);
}
