// SPDX-License-Identifier: Apache-2.0
//
// Two-stage persona synthesis: each baseline instrument is condensed into an
// evidence-linked synopsis, then all synopses are fused into a second-person
// persona with an if->then playbook. Also hosts the persona-only commitment
// baseline and a seeded generator of synthetic instrument corpora.
//
// Nothing here accepts follow-up outcomes; inputs are baseline documents only.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/rubrics.hpp"

namespace relate::persona {

struct InstrumentDoc {
  InstrumentKind kind = InstrumentKind::Other;
  std::string subject_id;
  std::string text;
  Reporter reporter = Reporter::Self;
};

Json to_json(const InstrumentDoc& doc);
InstrumentDoc doc_from_json(const Json& j, const std::string& path = {});

/// A pipeline step could not produce a usable record.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collapses whitespace runs to one space and trims.
std::string normalize_whitespace(std::string_view text);

/// True iff `snippet` occurs in `source` after whitespace normalization.
bool evidence_in_source(std::string_view snippet, std::string_view source);

/// Word-band and rule-band problems; empty when the persona is acceptable.
std::vector<std::string> persona_problems(const Persona& persona);

InstrumentSynopsis summarize_instrument(llm::Gateway& gateway, const InstrumentDoc& doc,
                                        Warnings& warnings);

/// One chat call; an out-of-band persona gets one corrective retry, after
/// which SynthesisError is thrown.
Persona fuse_persona(llm::Gateway& gateway, std::span<const InstrumentSynopsis> synopses);

/// Summarizes every document of one subject, then fuses the synopses.
/// Documents must all carry the same subject id.
Persona build_persona(llm::Gateway& gateway, std::span<const InstrumentDoc> docs, Warnings& warnings);

/// Pairs "<dyad>__A" / "<dyad>__B" personas into dyads ordered by dyad id.
/// Unpaired subjects are reported in `warnings` and left out.
std::vector<Dyad> pair_dyads(const std::map<std::string, Persona>& personas, Warnings& warnings);

/// Narrative followed by "Playbook:" and one "- condition -> action" line per rule.
std::string render_persona(const Persona& persona);

/// Persona-only commitment estimate; no simulation input.
CommitmentEstimate infer_baseline_commitment(llm::Gateway& gateway, const Persona& a,
                                             const Persona& b, Warnings& warnings);

// ---------------------------------------------------------------------------
// Files

/// Instrument layout: <dir>/<subject_id>/<name>.json, one document each.
std::map<std::string, std::vector<InstrumentDoc>> load_instrument_dir(
    const std::filesystem::path& dir);
void write_instrument_dir(const std::filesystem::path& dir, std::span<const InstrumentDoc> docs);

Persona load_persona(const std::filesystem::path& file);
void save_persona(const std::filesystem::path& file, const Persona& persona);

/// Subject ids "<dyad>__A" / "<dyad>__B" pair up into dyads.
inline constexpr std::string_view kPartnerSuffixA = "__A";
inline constexpr std::string_view kPartnerSuffixB = "__B";

// ---------------------------------------------------------------------------
// Synthetic cohorts

enum class AttachmentStyle { Secure, Anxious, Avoidant };
enum class ConflictRole { Collaborator, Pursuer, Withdrawer };

struct SyntheticProfile {
  AttachmentStyle attachment = AttachmentStyle::Secure;
  ConflictRole conflict_role = ConflictRole::Collaborator;
};

struct SyntheticDyad {
  std::string dyad_id;
  SyntheticProfile a;
  SyntheticProfile b;
  std::vector<InstrumentDoc> docs;  // both partners, seven documents each
  OutcomeLabel baseline = OutcomeLabel::Dating;
  OutcomeLabel followup = OutcomeLabel::Dating;
};

std::string_view to_string(AttachmentStyle s);
std::string_view to_string(ConflictRole r);

/// Seeded: the same (count, seed) always yields the same cohort.
std::vector<SyntheticDyad> generate_synthetic_cohort(std::size_t count, std::uint64_t seed);

}  // namespace relate::persona
