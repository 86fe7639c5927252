// SPDX-License-Identifier: Apache-2.0
//
// Three-layer agent memory (identity, simulation, scene), affect appraisal
// and hybrid semantic + affective retrieval:
//
//   score(m) = cos(e_sem(m), e_sem(c)) + lambda * cos(e_aff(m), a)

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/rubrics.hpp"

namespace relate::memory {

/// Cosine similarity; 0 when either vector is all zeros. Throws
/// std::invalid_argument on a length mismatch.
double cosine(std::span<const double> x, std::span<const double> y);

double hybrid_similarity(const MemoryEntry& m, std::span<const double> context_embedding,
                         const AffectVector& affect, double lambda);

class MemoryStore {
 public:
  explicit MemoryStore(std::size_t embedding_dimension);

  /// Adds a fully formed entry. Ids must be unique, embeddings must have the
  /// store dimension, simulation and scene entries need a scene index and
  /// identity entries must not have one.
  const MemoryEntry& add(MemoryEntry entry);

  /// Next free id for `layer`, e.g. "sim-0003".
  std::string next_id(MemoryLayer layer) const;

  void clear_scene_layer();

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t size(MemoryLayer layer) const;
  std::size_t embedding_dimension() const { return dimension_; }

  Json snapshot() const;
  static MemoryStore from_snapshot(const Json& j, const std::string& path = {});

  friend bool operator==(const MemoryStore&, const MemoryStore&) = default;

 private:
  std::size_t dimension_;
  std::vector<MemoryEntry> entries_;
  std::array<std::size_t, 3> issued_{};
};

struct ScoredEntry {
  MemoryEntry entry;
  double score = 0.0;
};

/// Scores non-increasing, at most k entries.
using RetrievalResult = std::vector<ScoredEntry>;

inline const std::vector<MemoryLayer> kRetrievalLayers = {MemoryLayer::Identity,
                                                          MemoryLayer::Simulation};

/// Ordering used to rank candidates: score descending, then the more recent
/// scene (identity entries count as oldest), then id ascending.
bool ranks_before(const ScoredEntry& x, const ScoredEntry& y);

/// Ranks against a precomputed context embedding. Throws std::invalid_argument
/// for k < 1 or a dimension mismatch.
RetrievalResult retrieve_top_k(const MemoryStore& store, std::span<const double> context_embedding,
                               const AffectVector& affect, std::size_t k, double lambda,
                               const std::vector<MemoryLayer>& layers = kRetrievalLayers);

/// Embeds `context` once through the gateway, then ranks.
RetrievalResult retrieve_top_k(llm::Gateway& gateway, const MemoryStore& store,
                               std::string_view context, const AffectVector& affect,
                               std::size_t k, double lambda,
                               const std::vector<MemoryLayer>& layers = kRetrievalLayers);

struct Appraisal {
  AffectVector affect;
  std::string internal_thought;
};

/// One chat call scoring the agent's affect for the current context.
Appraisal appraise(llm::Gateway& gateway, const Persona& persona,
                   std::span<const SceneEvent> history, std::string_view context,
                   Warnings& warnings);

/// Context-free affect scoring of a text, cached by text digest. The cache is
/// serializable so resumed runs make the same calls.
class AffectEmbedder {
 public:
  AffectVector operator()(llm::Gateway& gateway, std::string_view text, Warnings& warnings);

  std::size_t cache_size() const;
  Json snapshot() const;
  void restore(const Json& j);

 private:
  std::map<std::string, AffectVector> cache_;
};

/// Appends a simulation-layer entry with both embeddings computed.
const MemoryEntry& record_episode(llm::Gateway& gateway, AffectEmbedder& embedder,
                                  MemoryStore& store, int scene_index, std::string_view text,
                                  Warnings& warnings);

/// Preloads an identity entry.
const MemoryEntry& add_identity(llm::Gateway& gateway, AffectEmbedder& embedder,
                                MemoryStore& store, std::string_view text, Warnings& warnings);

/// Scene-layer entry: semantic embedding only, affect left at zero. Injected
/// inline into prompts rather than retrieved.
const MemoryEntry& add_scene_entry(llm::Gateway& gateway, MemoryStore& store, int scene_index,
                                   std::string_view text);

}  // namespace relate::memory
