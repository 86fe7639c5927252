// SPDX-License-Identifier: Apache-2.0
//
// Versioned prompt assets shared by more than one pipeline step.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "relate/domain.hpp"

namespace relate {

using Warnings = std::vector<std::string>;

inline constexpr std::string_view kCommitmentRubricVersion = "commitment-rubric/v1";

/// Scoring guide used both for persona-only baselines and per-scene scoring.
inline constexpr std::string_view kCommitmentRubric =
    "commitment-rubric/v1\n"
    "Rate the couple's commitment on a 1 to 5 scale: 1 = dissolution is likely, 3 = ambivalent or "
    "untested, 5 = deeply committed and stable. Weigh these criteria:\n"
    "- Investments: tangible and emotional resources tied to the relationship (shared routines, "
    "leases, pets, finances, sacrifices) that raise the cost of exit.\n"
    "- Alternatives: salience of rival partners or outside options, secrecy, jealousy. Salient "
    "alternatives lower commitment; protecting the relationship from them raises it.\n"
    "- Conflict and repair: grievances raised constructively, repair attempts (apology, "
    "forgiveness, new rituals) made and acknowledged, versus criticism, contempt, defensiveness "
    "or stonewalling left unrepaired.\n"
    "- Clarity: whether labels, exclusivity and shared plans are explicit rather than assumed.\n"
    "Base the score only on the evidence given. When a previous estimate is supplied, treat it as "
    "the starting point and move it only as far as the new evidence warrants.";

/// Affect rubric for appraisal and for context-free emotion scoring.
inline constexpr std::string_view kAffectRubric =
    "Score how strongly each emotion is present, from 0.0 (absent) to 1.0 (overwhelming): joy, "
    "sadness, fear, surprise, anger, disgust, trust, anticipation.";

/// Reads {score, rationale, evidence_refs?}; out-of-range scores are clamped
/// to [1,5] with a warning.
CommitmentEstimate commitment_from_reply(const Json& reply, Warnings& warnings);

/// Reads the eight named affect intensities. Missing dimensions become 0 and
/// out-of-range values are clamped, each with a warning.
AffectVector affect_from_reply(const Json& reply, Warnings& warnings);

}  // namespace relate
