// SPDX-License-Identifier: Apache-2.0

#include "relate/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "relate/hashing.hpp"
#include "relate/llm/schemas.hpp"
#include "relate/persona.hpp"

namespace relate::eval {

std::string_view to_string(EndState e) { return e == EndState::Dissolved ? "dissolved" : "sustained"; }
std::string_view to_string(ChangeClass c) { return c == ChangeClass::Improved ? "improved" : "stagnant"; }

Json to_json(const DyadOutcome& o) {
  Json j = Json::object();
  j["dyad_id"] = o.dyad_id;
  j["baseline"] = std::string(to_token(o.baseline));
  j["followup"] = std::string(to_token(o.followup));
  return j;
}

DyadOutcome outcome_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected object");
  for (const char* key : {"dyad_id", "baseline", "followup"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw SchemaError(path + "/" + key, "missing or non-string field");
    }
  }
  DyadOutcome o;
  o.dyad_id = j["dyad_id"].get<std::string>();
  if (o.dyad_id.empty()) throw SchemaError(path + "/dyad_id", "empty dyad id");
  o.baseline = parse_token_or_throw<OutcomeLabel>(j["baseline"].get<std::string>(), path + "/baseline");
  o.followup = parse_token_or_throw<OutcomeLabel>(j["followup"].get<std::string>(), path + "/followup");
  return o;
}

std::vector<DyadOutcome> parse_truth(std::string_view text, const std::string& source) {
  std::vector<DyadOutcome> out;
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = fmt::format("{}:{}", source, line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw SchemaError(where, std::string("invalid JSON: ") + e.what());
    }
    auto o = outcome_from_json(j, where);
    if (!seen.insert(o.dyad_id).second) throw SchemaError(where, "duplicate dyad id '" + o.dyad_id + "'");
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<DyadOutcome> load_truth(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read truth file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_truth(ss.str(), file.string());
}

std::string serialize_truth(std::span<const DyadOutcome> outcomes) {
  std::string out;
  for (const auto& o : outcomes) out += canonical_dump(to_json(o)) + "\n";
  return out;
}

ChangeClass map_binary_change(const DyadOutcome& o) {
  const bool open_stage = o.baseline == OutcomeLabel::Dating || o.baseline == OutcomeLabel::Engaged;
  return open_stage && o.followup == OutcomeLabel::Married ? ChangeClass::Improved
                                                           : ChangeClass::Stagnant;
}

EndState map_end_state(OutcomeLabel label) {
  return label == OutcomeLabel::BrokenUpOrDivorced ? EndState::Dissolved : EndState::Sustained;
}

EndState modal_label(std::span<const EndState> labels) {
  if (labels.empty()) throw std::invalid_argument("modal_label needs at least one label");
  const auto dissolved = std::count(labels.begin(), labels.end(), EndState::Dissolved);
  const auto sustained = static_cast<std::ptrdiff_t>(labels.size()) - dissolved;
  return dissolved >= sustained ? EndState::Dissolved : EndState::Sustained;
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

double log_binomial_pmf(int k, int n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
         k * std::log(p) + (n - k) * std::log1p(-p);
}

}  // namespace

double exact_binomial_p(int successes, int n, double p0) {
  if (n < 0 || successes < 0 || successes > n) {
    throw std::invalid_argument(fmt::format("need 0 <= successes <= n, got {} of {}", successes, n));
  }
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie strictly between 0 and 1");
  const double observed = log_binomial_pmf(successes, n, p0);
  // Relative slack so outcomes tied with the observed one in exact arithmetic
  // are not lost to rounding.
  const double threshold = observed + std::log1p(1e-7);
  double p = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double lp = log_binomial_pmf(k, n, p0);
    if (lp <= threshold) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

Interval diff_ci_normal(double acc_a, int n_a, double acc_b, int n_b) {
  for (double acc : {acc_a, acc_b}) {
    if (!(acc >= 0.0 && acc <= 1.0)) throw std::invalid_argument("accuracies must lie in [0, 1]");
  }
  if (n_a <= 0 || n_b <= 0) throw std::invalid_argument("sample sizes must be positive");
  const double diff = acc_b - acc_a;
  const double se = std::sqrt(acc_a * (1.0 - acc_a) / n_a + acc_b * (1.0 - acc_b) / n_b);
  return {100.0 * (diff - 1.96 * se), 100.0 * (diff + 1.96 * se)};
}

double relative_improvement(double acc_base, double acc_new) {
  if (!(acc_base > 0.0)) throw std::invalid_argument("baseline accuracy must be positive");
  return acc_new / acc_base - 1.0;
}

SeparationReport group_separation(const CohortMeans& decreased, const CohortMeans& increased) {
  for (const auto* c : {&decreased, &increased}) {
    if (!std::isfinite(c->baseline) || !std::isfinite(c->simulated)) {
      throw std::invalid_argument("cohort '" + c->name + "' has a non-finite mean");
    }
    if (c->baseline == 0.0) throw std::invalid_argument("cohort '" + c->name + "' has a zero baseline mean");
  }
  auto shift = [](const CohortMeans& c) {
    CohortShift s{c.name, c.n, c.baseline, c.simulated, c.simulated - c.baseline, 0.0};
    s.pct_delta = 100.0 * s.delta / c.baseline;
    return s;
  };
  SeparationReport r;
  r.decreased = shift(decreased);
  r.increased = shift(increased);
  r.gap_baseline = increased.baseline - decreased.baseline;
  r.gap_sim = increased.simulated - decreased.simulated;
  if (r.gap_baseline != 0.0) r.ratio = r.gap_sim / r.gap_baseline;
  return r;
}

PredictionReport make_prediction_report(std::string model, int correct, int n,
                                        const PredictionReport* baseline) {
  if (n <= 0 || correct < 0 || correct > n) {
    throw std::invalid_argument(fmt::format("need 0 <= correct <= n and n > 0, got {} of {}", correct, n));
  }
  PredictionReport r;
  r.model = std::move(model);
  r.n = n;
  r.correct = correct;
  r.accuracy = static_cast<double>(correct) / n;
  r.binomial_p_vs_half = exact_binomial_p(correct, n);
  if (baseline) {
    r.diff_vs_baseline_pp = 100.0 * (r.accuracy - baseline->accuracy);
    r.ci95_pp = diff_ci_normal(baseline->accuracy, baseline->n, r.accuracy, r.n);
    if (baseline->accuracy > 0.0) r.relative_improvement = relative_improvement(baseline->accuracy, r.accuracy);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Predictors

namespace {

constexpr std::string_view kLabelTask =
    "Predict this couple's relationship status two years from now. Choose exactly one label: "
    "broken_up_or_divorced, dating, engaged or married.";

constexpr std::string_view kLabelOutput = R"({"label": "broken_up_or_divorced | dating | engaged | married"})";

std::string render_final_state(const RelationshipState& s) {
  std::string out;
  for (auto field : kStateFields) out += fmt::format("\n{}: {}", field, state_field_token(s, field));
  return out;
}

OutcomeLabel ask_label(llm::Gateway& gateway, llm::PromptSpec spec) {
  spec.seed = stable_hash64(spec.render());
  const auto reply = gateway.chat(spec);
  if (!reply.ok()) {
    throw EvaluationError("end-state prediction failed after " + std::to_string(reply.attempts) +
                          " attempts: " + reply.parse_error);
  }
  return parse_token_or_throw<OutcomeLabel>((*reply.parsed)["label"].get<std::string>(), "label");
}

}  // namespace

llm::PromptSpec personas_only_prompt(const Persona& a, const Persona& b) {
  llm::PromptSpec spec;
  spec.role_tag = "end_state";
  spec.response_schema = std::string(llm::schema::kEndState);
  spec.temperature = 0.0;
  spec.sections = {
      {"Task", std::string(kLabelTask) + " You only have the two partner personas."},
      {"Partner A Persona", persona::render_persona(a)},
      {"Partner B Persona", persona::render_persona(b)},
      {"Output", std::string(kLabelOutput)},
  };
  return spec;
}

llm::PromptSpec simulation_aware_prompt(const SimulationTrace& trace) {
  std::string summaries;
  std::string estimates;
  for (const auto& scene : trace.scenes) {
    const auto n = scene.index + 1;
    summaries += fmt::format("{}Scene {} ({}): {}", summaries.empty() ? "" : "\n", n,
                             to_token(scene.category), scene.rolling_summary);
    estimates += fmt::format("{}Scene {}: {:.2f} ({})", estimates.empty() ? "" : "\n", n,
                             scene.commitment.score, scene.commitment.rationale);
  }
  if (summaries.empty()) summaries = "(no scenes)";
  if (estimates.empty()) estimates = "(no scenes)";
  std::string outcome = trace.terminated_early
                            ? "Ended early: " + trace.termination_reason
                            : fmt::format("Completed {} of {} scenes.", trace.scenes.size(),
                                          trace.config.num_scenes);
  if (!trace.scenes.empty()) {
    outcome += "\nFinal relationship state:" + render_final_state(trace.scenes.back().inferred_state);
  }

  llm::PromptSpec spec;
  spec.role_tag = "end_state";
  spec.response_schema = std::string(llm::schema::kEndState);
  spec.temperature = 0.0;
  spec.sections = {
      {"Task", std::string(kLabelTask) +
                   " Use the simulated scenes below, in order, together with the per-scene "
                   "commitment estimates and their rationales."},
      {"Partner A Persona", persona::render_persona(trace.persona_a)},
      {"Partner B Persona", persona::render_persona(trace.persona_b)},
      {"Scene Summaries", summaries},
      {"Commitment Estimates", estimates},
      {"Run Outcome", outcome},
      {"Output", std::string(kLabelOutput)},
  };
  return spec;
}

OutcomeLabel predict_from_personas(llm::Gateway& gateway, const Persona& a, const Persona& b) {
  return ask_label(gateway, personas_only_prompt(a, b));
}

OutcomeLabel predict_from_trace(llm::Gateway& gateway, const SimulationTrace& trace) {
  return ask_label(gateway, simulation_aware_prompt(trace));
}

EndState predict_end_state(llm::Gateway& gateway, PredictionMode mode,
                           std::span<const SimulationTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("predict_end_state needs at least one trace");
  if (mode == PredictionMode::PersonasOnly) {
    return map_end_state(predict_from_personas(gateway, traces.front().persona_a, traces.front().persona_b));
  }
  std::vector<EndState> labels;
  for (const auto& t : traces) labels.push_back(map_end_state(predict_from_trace(gateway, t)));
  return modal_label(labels);
}

// ---------------------------------------------------------------------------
// Cohort evaluation

namespace {

constexpr std::string_view kDecreasedCohort = "Decreased-Status";
constexpr std::string_view kIncreasedCohort = "Increased-Status";

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::optional<SeparationReport> separation_from(const std::vector<DyadEvaluation>& dyads, bool pooled) {
  std::map<ChangeClass, std::vector<double>> base, sim;
  for (const auto& d : dyads) {
    if (!d.baseline_commitment || d.final_commitments.empty()) continue;
    base[d.cohort].push_back(*d.baseline_commitment);
    if (pooled) {
      sim[d.cohort].insert(sim[d.cohort].end(), d.final_commitments.begin(), d.final_commitments.end());
    } else {
      sim[d.cohort].push_back(mean(d.final_commitments));
    }
  }
  if (base[ChangeClass::Stagnant].empty() || base[ChangeClass::Improved].empty()) return std::nullopt;
  auto cohort = [&](ChangeClass c, std::string_view name) {
    return CohortMeans{std::string(name), mean(base[c]), mean(sim[c]), base[c].size()};
  };
  return group_separation(cohort(ChangeClass::Stagnant, kDecreasedCohort),
                          cohort(ChangeClass::Improved, kIncreasedCohort));
}

}  // namespace

EvaluationReport evaluate(llm::Gateway& gateway,
                          const std::map<std::string, std::vector<SimulationTrace>>& traces,
                          std::span<const DyadOutcome> truth, const EvaluateOptions& options) {
  EvaluationReport report;
  std::map<std::string, const DyadOutcome*> truth_by_id;
  for (const auto& t : truth) truth_by_id[t.dyad_id] = &t;

  for (const auto& [dyad_id, runs] : traces) {
    const auto found = truth_by_id.find(dyad_id);
    if (found == truth_by_id.end()) {
      report.warnings.push_back("dyad " + dyad_id + ": no truth record, skipped");
      continue;
    }
    std::vector<const SimulationTrace*> valid;
    for (const auto& run : runs) {
      if (run.valid) {
        valid.push_back(&run);
      } else {
        report.warnings.push_back(fmt::format("dyad {} run {}: invalid trace skipped ({})", dyad_id,
                                              run.run_index, run.error));
      }
    }
    if (valid.empty()) {
      report.warnings.push_back("dyad " + dyad_id + ": no valid trace, skipped");
      continue;
    }

    DyadEvaluation d;
    d.dyad_id = dyad_id;
    d.truth = *found->second;
    d.cohort = map_binary_change(d.truth);
    d.truth_end_state = map_end_state(d.truth.followup);
    const auto& first = *valid.front();
    d.baseline_label = predict_from_personas(gateway, first.persona_a, first.persona_b);
    d.baseline_prediction = map_end_state(d.baseline_label);
    std::vector<EndState> states;
    for (const auto* run : valid) {
      d.run_labels.push_back(predict_from_trace(gateway, *run));
      states.push_back(map_end_state(d.run_labels.back()));
      if (run->final_commitment) d.final_commitments.push_back(run->final_commitment->score);
    }
    d.simulation_prediction = modal_label(states);
    if (options.baseline_commitment) {
      Warnings w;
      d.baseline_commitment =
          persona::infer_baseline_commitment(gateway, first.persona_a, first.persona_b, w).score;
      for (auto& msg : w) report.warnings.push_back("dyad " + dyad_id + ": " + msg);
    }
    report.dyads.push_back(std::move(d));
  }
  for (const auto& t : truth) {
    if (!traces.contains(t.dyad_id)) report.warnings.push_back("dyad " + t.dyad_id + ": no traces");
  }
  if (report.dyads.empty()) throw EvaluationError("no dyad has both a truth record and a valid trace");

  const int n = static_cast<int>(report.dyads.size());
  int base_correct = 0;
  int sim_correct = 0;
  for (const auto& d : report.dyads) {
    base_correct += d.baseline_prediction == d.truth_end_state;
    sim_correct += d.simulation_prediction == d.truth_end_state;
  }
  report.baseline = make_prediction_report("Baseline (personas-only)", base_correct, n);
  report.simulation = make_prediction_report("Simulation-aware", sim_correct, n, &report.baseline);
  report.separation = separation_from(report.dyads, false);
  report.separation_pooled = separation_from(report.dyads, true);
  return report;
}

std::map<std::string, std::vector<SimulationTrace>> load_traces(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("trace directory not found: " + dir.string());
  static const std::regex run_re(R"(run_(\d+)\.jsonl)");
  std::map<std::string, std::vector<SimulationTrace>> out;
  std::vector<fs::path> dyad_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) dyad_dirs.push_back(entry.path());
  }
  std::sort(dyad_dirs.begin(), dyad_dirs.end());
  for (const auto& dyad_dir : dyad_dirs) {
    std::vector<std::pair<int, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dyad_dir)) {
      std::smatch m;
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && std::regex_match(name, m, run_re)) {
        files.emplace_back(std::stoi(m[1].str()), entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& [index, file] : files) {
      std::ifstream in(file, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      auto trace = parse_trace(ss.str());
      out[trace.dyad_id].push_back(std::move(trace));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

Json to_json(const PredictionReport& r) {
  Json j = Json::object();
  j["model"] = r.model;
  j["n"] = r.n;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  j["binomial_p_vs_half"] = r.binomial_p_vs_half;
  j["diff_vs_baseline_pp"] = r.diff_vs_baseline_pp ? Json(*r.diff_vs_baseline_pp) : Json(nullptr);
  j["ci95_pp"] = r.ci95_pp ? Json::array({r.ci95_pp->lo, r.ci95_pp->hi}) : Json(nullptr);
  j["relative_improvement"] = r.relative_improvement ? Json(*r.relative_improvement) : Json(nullptr);
  return j;
}

namespace {

Json shift_json(const CohortShift& s) {
  Json j = Json::object();
  j["cohort"] = s.name;
  j["n"] = s.n;
  j["baseline"] = s.baseline;
  j["simulated"] = s.simulated;
  j["delta"] = s.delta;
  j["pct_delta"] = s.pct_delta;
  return j;
}

}  // namespace

Json to_json(const SeparationReport& r) {
  Json j = Json::object();
  j["gap_baseline"] = r.gap_baseline;
  j["gap_sim"] = r.gap_sim;
  j["ratio"] = r.ratio ? Json(*r.ratio) : Json(nullptr);
  j["cohorts"] = Json::array({shift_json(r.decreased), shift_json(r.increased)});
  return j;
}

Json to_json(const EvaluationReport& r) {
  Json j = Json::object();
  j["format"] = "relate-evaluation/1";
  j["baseline"] = to_json(r.baseline);
  j["simulation_aware"] = to_json(r.simulation);
  j["separation_per_dyad"] = r.separation ? to_json(*r.separation) : Json(nullptr);
  j["separation_pooled"] = r.separation_pooled ? to_json(*r.separation_pooled) : Json(nullptr);
  Json dyads = Json::array();
  for (const auto& d : r.dyads) {
    Json dj = Json::object();
    dj["dyad_id"] = d.dyad_id;
    dj["baseline_status"] = std::string(to_token(d.truth.baseline));
    dj["followup_status"] = std::string(to_token(d.truth.followup));
    dj["cohort"] = std::string(to_string(d.cohort));
    dj["truth_end_state"] = std::string(to_string(d.truth_end_state));
    dj["baseline_label"] = std::string(to_token(d.baseline_label));
    dj["baseline_prediction"] = std::string(to_string(d.baseline_prediction));
    Json labels = Json::array();
    for (auto l : d.run_labels) labels.push_back(std::string(to_token(l)));
    dj["run_labels"] = labels;
    dj["simulation_prediction"] = std::string(to_string(d.simulation_prediction));
    dj["baseline_commitment"] = d.baseline_commitment ? Json(*d.baseline_commitment) : Json(nullptr);
    dj["final_commitments"] = d.final_commitments;
    dyads.push_back(std::move(dj));
  }
  j["dyads"] = dyads;
  j["warnings"] = r.warnings;
  return j;
}

std::string render_table(const EvaluationReport& r) {
  std::string out = "Accuracy on two-way end state (dissolved vs. sustained)\n";
  out += fmt::format("{:<26}{:>13}{:>10}\n", "Model", "Correct / N", "Accuracy");
  for (const auto* row : {&r.baseline, &r.simulation}) {
    out += fmt::format("{:<26}{:>13}{:>9.1f}%\n", row->model, fmt::format("{}/{}", row->correct, row->n),
                       100.0 * row->accuracy);
  }
  out += "\n";
  for (const auto* row : {&r.baseline, &r.simulation}) {
    out += fmt::format("{}: exact binomial vs. 0.5, p = {:.3f}\n", row->model, row->binomial_p_vs_half);
  }
  if (r.simulation.diff_vs_baseline_pp && r.simulation.ci95_pp) {
    out += fmt::format("Absolute gain: {:+.1f} pp, 95% CI [{:+.1f}, {:+.1f}] pp\n",
                       *r.simulation.diff_vs_baseline_pp, r.simulation.ci95_pp->lo,
                       r.simulation.ci95_pp->hi);
  }
  if (r.simulation.relative_improvement) {
    out += fmt::format("Relative improvement: {:.1f}%\n", 100.0 * *r.simulation.relative_improvement);
  }
  auto separation = [&](const SeparationReport& s, std::string_view title) {
    out += fmt::format("\nCommitment means by cohort ({})\n", title);
    out += fmt::format("{:<18}{:>5}{:>10}{:>12}{:>10}{:>9}\n", "Cohort", "n", "Baseline", "Simulation",
                       "Delta", "%Delta");
    for (const auto* c : {&s.decreased, &s.increased}) {
      out += fmt::format("{:<18}{:>5}{:>10.4f}{:>12.4f}{:>+10.4f}{:>+8.1f}%\n", c->name, c->n,
                         c->baseline, c->simulated, c->delta, c->pct_delta);
    }
    out += fmt::format("Gap: baseline {:.4f}, simulation {:.4f}, ratio {}\n", s.gap_baseline, s.gap_sim,
                       s.ratio ? fmt::format("{:.2f}", *s.ratio) : std::string("none"));
  };
  if (r.separation) separation(*r.separation, "dyad means first");
  if (r.separation_pooled) separation(*r.separation_pooled, "pooled over runs");
  return out;
}

}  // namespace relate::eval
