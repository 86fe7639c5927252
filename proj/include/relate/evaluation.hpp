// SPDX-License-Identifier: Apache-2.0
//
// Outcome mapping, modal aggregation over runs, and the summary statistics
// reported for a cohort: exact binomial tests, a normal-approximate CI on
// the accuracy difference, relative improvement and cohort separation of
// commitment means. Everything reads stored traces; nothing here simulates.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/rubrics.hpp"

namespace relate::eval {

enum class EndState { Dissolved, Sustained };
enum class ChangeClass { Improved, Stagnant };

std::string_view to_string(EndState e);
std::string_view to_string(ChangeClass c);

struct DyadOutcome {
  std::string dyad_id;
  OutcomeLabel baseline = OutcomeLabel::Dating;
  OutcomeLabel followup = OutcomeLabel::Dating;
  friend bool operator==(const DyadOutcome&, const DyadOutcome&) = default;
};

Json to_json(const DyadOutcome& o);
DyadOutcome outcome_from_json(const Json& j, const std::string& path = {});

/// One record per line; duplicate dyad ids are rejected.
std::vector<DyadOutcome> parse_truth(std::string_view text, const std::string& source = "truth");
std::vector<DyadOutcome> load_truth(const std::filesystem::path& file);
std::string serialize_truth(std::span<const DyadOutcome> outcomes);

/// Improved iff dating/engaged at baseline and married at follow-up.
ChangeClass map_binary_change(const DyadOutcome& outcome);
EndState map_end_state(OutcomeLabel label);

/// Most frequent state; a tie goes to Dissolved. Throws on an empty list.
EndState modal_label(std::span<const EndState> labels);

// ---------------------------------------------------------------------------
// Statistics

/// Two-sided exact binomial test, summing every outcome whose probability is
/// no larger than the observed one. Requires 0 <= successes <= n, 0 < p0 < 1.
double exact_binomial_p(int successes, int n, double p0 = 0.5);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% normal-approximate CI of (acc_b - acc_a), in percentage points.
Interval diff_ci_normal(double acc_a, int n_a, double acc_b, int n_b);

/// acc_new / acc_base - 1. Requires acc_base > 0.
double relative_improvement(double acc_base, double acc_new);

struct CohortMeans {
  std::string name;
  double baseline = 0.0;
  double simulated = 0.0;
  std::size_t n = 0;
};

struct CohortShift {
  std::string name;
  std::size_t n = 0;
  double baseline = 0.0;
  double simulated = 0.0;
  double delta = 0.0;
  double pct_delta = 0.0;
};

struct SeparationReport {
  double gap_baseline = 0.0;
  double gap_sim = 0.0;
  /// None when the baseline gap is zero.
  std::optional<double> ratio;
  CohortShift decreased;
  CohortShift increased;
};

/// Gaps are increased minus decreased; percent deltas are relative to each
/// cohort's baseline mean.
SeparationReport group_separation(const CohortMeans& decreased, const CohortMeans& increased);

struct PredictionReport {
  std::string model;
  int n = 0;
  int correct = 0;
  double accuracy = 0.0;
  double binomial_p_vs_half = 1.0;
  /// Set on the simulation-aware row, relative to the personas-only row.
  std::optional<double> diff_vs_baseline_pp;
  std::optional<Interval> ci95_pp;
  std::optional<double> relative_improvement;
};

PredictionReport make_prediction_report(std::string model, int correct, int n,
                                        const PredictionReport* baseline = nullptr);

// ---------------------------------------------------------------------------
// Predictors

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One chat call over both personas. Throws EvaluationError on a bad reply.
OutcomeLabel predict_from_personas(llm::Gateway& gateway, const Persona& a, const Persona& b);

/// One chat call over a run's scene summaries, commitment estimates and
/// rationales, in scene order.
OutcomeLabel predict_from_trace(llm::Gateway& gateway, const SimulationTrace& trace);

llm::PromptSpec personas_only_prompt(const Persona& a, const Persona& b);
llm::PromptSpec simulation_aware_prompt(const SimulationTrace& trace);

enum class PredictionMode { PersonasOnly, SimulationAware };

/// PersonasOnly: one call on the first trace's personas. SimulationAware:
/// one call per trace, then modal_label.
EndState predict_end_state(llm::Gateway& gateway, PredictionMode mode,
                           std::span<const SimulationTrace> traces);

// ---------------------------------------------------------------------------
// Cohort evaluation

struct DyadEvaluation {
  std::string dyad_id;
  DyadOutcome truth;
  ChangeClass cohort = ChangeClass::Stagnant;
  EndState truth_end_state = EndState::Sustained;
  OutcomeLabel baseline_label = OutcomeLabel::Dating;
  std::vector<OutcomeLabel> run_labels;
  EndState baseline_prediction = EndState::Sustained;
  EndState simulation_prediction = EndState::Sustained;
  std::optional<double> baseline_commitment;
  std::vector<double> final_commitments;
};

struct EvaluationReport {
  std::vector<DyadEvaluation> dyads;
  PredictionReport baseline;
  PredictionReport simulation;
  /// Cohort means averaged per dyad first, then across dyads.
  std::optional<SeparationReport> separation;
  /// Cohort means pooled over every run.
  std::optional<SeparationReport> separation_pooled;
  Warnings warnings;
};

struct EvaluateOptions {
  /// Persona-only commitment per dyad, needed for the separation table.
  bool baseline_commitment = true;
};

/// Dyads without truth or without a valid trace are skipped with a warning.
/// Throws EvaluationError when no dyad remains.
EvaluationReport evaluate(llm::Gateway& gateway,
                          const std::map<std::string, std::vector<SimulationTrace>>& traces,
                          std::span<const DyadOutcome> truth, const EvaluateOptions& options = {});

/// Reads <dir>/<dyad>/run_<i>.jsonl, ordered by dyad id then run index.
std::map<std::string, std::vector<SimulationTrace>> load_traces(const std::filesystem::path& dir);

Json to_json(const PredictionReport& r);
Json to_json(const SeparationReport& r);
Json to_json(const EvaluationReport& r);

/// Plain-text accuracy table plus the test statistics and cohort means.
std::string render_table(const EvaluationReport& report);

}  // namespace relate::eval
