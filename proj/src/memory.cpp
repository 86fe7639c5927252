// SPDX-License-Identifier: Apache-2.0

#include "relate/memory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "relate/hashing.hpp"
#include "relate/llm/schemas.hpp"

namespace relate::memory {

double cosine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument(
        fmt::format("cosine of vectors with different lengths ({} vs {})", x.size(), y.size()));
  }
  double dot = 0.0;
  double nx = 0.0;
  double ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

double hybrid_similarity(const MemoryEntry& m, std::span<const double> context_embedding,
                         const AffectVector& affect, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  const double sem = cosine(m.semantic_embedding, context_embedding);
  const double aff = cosine(m.affect_embedding.values(), affect.values());
  return sem + lambda * aff;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view id_prefix(MemoryLayer layer) {
  switch (layer) {
    case MemoryLayer::Identity: return "id";
    case MemoryLayer::Simulation: return "sim";
    case MemoryLayer::Scene: return "scn";
  }
  return "mem";
}

}  // namespace

MemoryStore::MemoryStore(std::size_t embedding_dimension) : dimension_(embedding_dimension) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

const MemoryEntry& MemoryStore::add(MemoryEntry entry) {
  if (entry.id.empty()) throw std::invalid_argument("memory entry needs an id");
  if (entry.semantic_embedding.size() != dimension_) {
    throw std::invalid_argument(fmt::format("memory '{}' has embedding length {}, store uses {}",
                                            entry.id, entry.semantic_embedding.size(), dimension_));
  }
  const bool identity = entry.layer == MemoryLayer::Identity;
  if (identity && entry.created_at_scene) {
    throw std::invalid_argument("identity memory '" + entry.id + "' must not carry a scene index");
  }
  if (!identity && (!entry.created_at_scene || *entry.created_at_scene < 0)) {
    throw std::invalid_argument("memory '" + entry.id + "' needs a scene index >= 0");
  }
  for (const auto& e : entries_) {
    if (e.id == entry.id) throw std::invalid_argument("duplicate memory id '" + entry.id + "'");
  }
  ++issued_[static_cast<std::size_t>(entry.layer)];
  entries_.push_back(std::move(entry));
  return entries_.back();
}

std::string MemoryStore::next_id(MemoryLayer layer) const {
  return fmt::format("{}-{:04d}", id_prefix(layer), issued_[static_cast<std::size_t>(layer)] + 1);
}

void MemoryStore::clear_scene_layer() {
  std::erase_if(entries_, [](const MemoryEntry& e) { return e.layer == MemoryLayer::Scene; });
}

std::size_t MemoryStore::size(MemoryLayer layer) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [&](const MemoryEntry& e) { return e.layer == layer; }));
}

Json MemoryStore::snapshot() const {
  Json j = Json::object();
  j["embedding_dimension"] = dimension_;
  Json issued = Json::object();
  for (auto layer : all_values<MemoryLayer>()) {
    issued[std::string(to_token(layer))] = issued_[static_cast<std::size_t>(layer)];
  }
  j["issued"] = std::move(issued);
  Json entries = Json::array();
  for (const auto& e : entries_) entries.push_back(relate::to_json(e));
  j["entries"] = std::move(entries);
  return j;
}

MemoryStore MemoryStore::from_snapshot(const Json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("embedding_dimension") || !j.contains("entries") ||
      !j.contains("issued")) {
    throw SchemaError(path, "memory snapshot needs embedding_dimension, issued and entries");
  }
  MemoryStore store(j["embedding_dimension"].get<std::size_t>());
  for (std::size_t i = 0; i < j["entries"].size(); ++i) {
    store.add(from_json<MemoryEntry>(j["entries"][i], fmt::format("{}/entries/{}", path, i)));
  }
  for (auto layer : all_values<MemoryLayer>()) {
    const auto key = std::string(to_token(layer));
    if (!j["issued"].contains(key)) throw SchemaError(path + "/issued", "missing " + key);
    store.issued_[static_cast<std::size_t>(layer)] = j["issued"][key].get<std::size_t>();
  }
  return store;
}

// ---------------------------------------------------------------------------

bool ranks_before(const ScoredEntry& x, const ScoredEntry& y) {
  if (x.score != y.score) return x.score > y.score;
  const int sx = x.entry.created_at_scene.value_or(-1);
  const int sy = y.entry.created_at_scene.value_or(-1);
  if (sx != sy) return sx > sy;
  return x.entry.id < y.entry.id;
}

RetrievalResult retrieve_top_k(const MemoryStore& store, std::span<const double> context_embedding,
                               const AffectVector& affect, std::size_t k, double lambda,
                               const std::vector<MemoryLayer>& layers) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (context_embedding.size() != store.embedding_dimension()) {
    throw std::invalid_argument(fmt::format("context embedding length {} != store dimension {}",
                                            context_embedding.size(), store.embedding_dimension()));
  }
  RetrievalResult scored;
  for (const auto& e : store.entries()) {
    if (std::find(layers.begin(), layers.end(), e.layer) == layers.end()) continue;
    scored.push_back({e, hybrid_similarity(e, context_embedding, affect, lambda)});
  }
  const auto keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

RetrievalResult retrieve_top_k(llm::Gateway& gateway, const MemoryStore& store,
                               std::string_view context, const AffectVector& affect,
                               std::size_t k, double lambda,
                               const std::vector<MemoryLayer>& layers) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const auto embedding = gateway.embed(context);
  return retrieve_top_k(store, embedding, affect, k, lambda, layers);
}

// ---------------------------------------------------------------------------

namespace {

std::string affect_output_example(bool with_thought) {
  std::string out = "{";
  for (auto name : kAffectNames) out += fmt::format("\"{}\": 0.0, ", name);
  if (with_thought) {
    out += "\"internal_thought\": \"one paragraph in the first person\"}";
  } else {
    out.resize(out.size() - 2);
    out += "}";
  }
  return out;
}

std::string render_history(std::span<const SceneEvent> history, std::size_t last_n) {
  if (history.empty()) return "(nothing has happened yet)";
  std::string out;
  const auto start = history.size() > last_n ? history.size() - last_n : 0;
  for (std::size_t i = start; i < history.size(); ++i) {
    out += fmt::format("[{}] {}\n", history[i].id, history[i].text);
  }
  out.pop_back();
  return out;
}

}  // namespace

Appraisal appraise(llm::Gateway& gateway, const Persona& persona,
                   std::span<const SceneEvent> history, std::string_view context,
                   Warnings& warnings) {
  if (context.empty()) throw std::invalid_argument("appraisal needs a non-empty context");
  llm::PromptSpec spec;
  spec.role_tag = "appraisal";
  spec.response_schema = std::string(llm::schema::kAffect);
  spec.temperature = 0.2;
  spec.seed = stable_hash64(context);
  spec.sections = {
      {"Rubric", std::string(kAffectRubric) +
                     " Then write the character's internal thought about the situation."},
      {"Your Persona", persona.narrative},
      {"Recent History", render_history(history, 8)},
      {"Context", std::string(context)},
      {"Output", affect_output_example(true)},
  };
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw std::runtime_error("appraisal failed: " + reply.parse_error);
  return {affect_from_reply(*reply.parsed, warnings),
          (*reply.parsed)["internal_thought"].get<std::string>()};
}

AffectVector AffectEmbedder::operator()(llm::Gateway& gateway, std::string_view text,
                                        Warnings& warnings) {
  if (text.empty()) throw std::invalid_argument("cannot score affect of empty text");
  const auto key = sha256_hex(text);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  llm::PromptSpec spec;
  spec.role_tag = "affect_embed";
  spec.response_schema = std::string(llm::schema::kAffectScores);
  spec.temperature = 0.0;
  spec.seed = stable_hash64(text);
  spec.sections = {
      {"Rubric", std::string(kAffectRubric)},
      {"Text", std::string(text)},
      {"Output", affect_output_example(false)},
  };
  auto reply = gateway.chat(spec);
  if (!reply.ok()) throw std::runtime_error("affect scoring failed: " + reply.parse_error);
  auto vec = affect_from_reply(*reply.parsed, warnings);
  cache_.emplace(key, vec);
  return vec;
}

std::size_t AffectEmbedder::cache_size() const { return cache_.size(); }

Json AffectEmbedder::snapshot() const {
  Json j = Json::object();
  for (const auto& [key, vec] : cache_) j[key] = relate::to_json(vec);
  return j;
}

void AffectEmbedder::restore(const Json& j) {
  if (!j.is_object()) throw SchemaError("affect_cache", "expected object");
  cache_.clear();
  for (const auto& [key, value] : j.items()) {
    cache_.emplace(key, from_json<AffectVector>(value, "affect_cache/" + key));
  }
}

const MemoryEntry& record_episode(llm::Gateway& gateway, AffectEmbedder& embedder,
                                  MemoryStore& store, int scene_index, std::string_view text,
                                  Warnings& warnings) {
  if (scene_index < 0) throw std::invalid_argument("scene index must be >= 0");
  MemoryEntry e;
  e.id = store.next_id(MemoryLayer::Simulation);
  e.layer = MemoryLayer::Simulation;
  e.text = std::string(text);
  e.semantic_embedding = gateway.embed(text);
  e.affect_embedding = embedder(gateway, text, warnings);
  e.created_at_scene = scene_index;
  return store.add(std::move(e));
}

const MemoryEntry& add_identity(llm::Gateway& gateway, AffectEmbedder& embedder,
                                MemoryStore& store, std::string_view text, Warnings& warnings) {
  MemoryEntry e;
  e.id = store.next_id(MemoryLayer::Identity);
  e.layer = MemoryLayer::Identity;
  e.text = std::string(text);
  e.semantic_embedding = gateway.embed(text);
  e.affect_embedding = embedder(gateway, text, warnings);
  return store.add(std::move(e));
}

const MemoryEntry& add_scene_entry(llm::Gateway& gateway, MemoryStore& store, int scene_index,
                                   std::string_view text) {
  if (scene_index < 0) throw std::invalid_argument("scene index must be >= 0");
  MemoryEntry e;
  e.id = store.next_id(MemoryLayer::Scene);
  e.layer = MemoryLayer::Scene;
  e.text = std::string(text);
  e.semantic_embedding = gateway.embed(text);
  e.created_at_scene = scene_index;
  return store.add(std::move(e));
}

}  // namespace relate::memory
