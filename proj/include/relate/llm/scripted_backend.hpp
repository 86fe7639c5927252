// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "relate/llm/gateway.hpp"

namespace relate::llm {

/// One playback rule. A call matches when its role_tag is equal and, if
/// `contains` is set, some section text contains that substring. Responses are
/// served in order; a `responder` (if set) answers every matching call after
/// the fixed responses run out.
struct ScriptRule {
  std::string role_tag;
  std::optional<std::string> contains;
  std::vector<std::string> responses;
  std::function<std::string(const PromptSpec&)> responder;
};

struct ScriptedCall {
  std::string role_tag;
  std::string rendered;
};

/// Deterministic playback backend for tests and golden runs. Embeddings come
/// from a seeded HashEmbedder.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules, std::size_t dimension = 64,
                           std::uint64_t embed_seed = 0);

  /// Script file form: [{"role_tag": ..., "contains": ..., "responses": [...]}];
  /// object responses are serialized compactly.
  static std::shared_ptr<ScriptedBackend> from_json(const Json& script, std::size_t dimension = 64,
                                                    std::uint64_t embed_seed = 0);

  Completion complete(const PromptSpec& spec, const std::string& model) override;
  std::vector<double> embed(std::string_view text) override { return embedder_(text); }
  std::size_t embedding_dimension() const override { return embedder_.dimension(); }

  std::size_t call_count() const;
  std::size_t call_count(std::string_view role_tag) const;
  std::vector<ScriptedCall> calls() const;
  /// Fixed responses not yet served, summed over rules.
  std::size_t remaining() const;

 private:
  struct Cursor {
    ScriptRule rule;
    std::size_t next = 0;
  };
  std::vector<Cursor> rules_;
  HashEmbedder embedder_;
  std::vector<ScriptedCall> calls_;
  mutable std::mutex mutex_;
};

}  // namespace relate::llm
