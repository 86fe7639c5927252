// SPDX-License-Identifier: Apache-2.0
//
// Names of the structured records pipeline steps ask the model for.

#pragma once

#include <string_view>

namespace relate::llm::schema {

inline constexpr std::string_view kSynopsis = "instrument_synopsis";
inline constexpr std::string_view kPersona = "persona";
inline constexpr std::string_view kCommitment = "commitment";
inline constexpr std::string_view kAffect = "affect_appraisal";
inline constexpr std::string_view kAffectScores = "affect_scores";
inline constexpr std::string_view kScenarioChoice = "scenario_choice";
inline constexpr std::string_view kSceneExpansion = "scene_expansion";
inline constexpr std::string_view kNarration = "narration_step";
inline constexpr std::string_view kOptions = "option_set";
inline constexpr std::string_view kDecision = "decision";
inline constexpr std::string_view kStateInference = "state_inference";
inline constexpr std::string_view kSummary = "rolling_summary";
inline constexpr std::string_view kEndState = "end_state_prediction";

}  // namespace relate::llm::schema
