// SPDX-License-Identifier: Apache-2.0
//
// Procedural stand-in for a chat model, used as the "mock" backend for batch
// runs, demos and the acceptance suite. Every reply is a pure function of the
// backend seed and the prompt, so concurrent and resumed runs reproduce
// exactly. Persona archetypes (attachment style, conflict role) written into
// persona narratives steer decisions, state changes and commitment drift.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "relate/llm/gateway.hpp"
#include "relate/persona.hpp"

namespace relate::synth {

/// Option behaviors the backend knows how to offer and interpret.
enum class Move { Repair, Commit, Withdraw, Escalate, Deflect, Rival, Exit };

std::string_view to_string(Move m);

/// Move behind one of the backend's option descriptions, if it is one.
std::optional<Move> classify_option(std::string_view description);

struct Archetype {
  persona::AttachmentStyle attachment = persona::AttachmentStyle::Secure;
  persona::ConflictRole role = persona::ConflictRole::Collaborator;
};

/// Reads the archetype markers a synthetic persona narrative carries;
/// defaults to secure / collaborator when absent.
Archetype read_archetype(std::string_view persona_text);

/// Lexicon-based intensities for the eight affect dimensions.
AffectVector lexicon_affect(std::string_view text);

class SyntheticBackend : public llm::Backend {
 public:
  explicit SyntheticBackend(std::uint64_t seed = 0, std::size_t dimension = 64);

  llm::Completion complete(const llm::PromptSpec& spec, const std::string& model) override;
  std::vector<double> embed(std::string_view text) override { return embedder_(text); }
  std::size_t embedding_dimension() const override { return embedder_.dimension(); }

 private:
  std::uint64_t seed_;
  llm::HashEmbedder embedder_;
};

}  // namespace relate::synth
