// SPDX-License-Identifier: Apache-2.0
//
// relate-sim: persona synthesis, batch simulation, evaluation, the rehearsal
// session server, scenario bank generation and synthetic cohorts.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/evaluation.hpp"
#include "relate/llm/http_backend.hpp"
#include "relate/persona.hpp"
#include "relate/runner.hpp"
#include "relate/scenario_bank.hpp"
#include "relate/session.hpp"
#include "relate/synthetic_backend.hpp"

namespace {

namespace fs = std::filesystem;
using namespace relate;

struct BackendOptions {
  std::string kind = "mock";
  std::uint64_t seed = 0;
  std::string model = "default";
  std::string cassette;
  bool record = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--backend", kind, "Model backend")->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--model", model, "Model name sent to the http backend");
    cmd->add_option("--cassette", cassette, "Replay http responses from this directory");
    cmd->add_flag("--record", record, "With --cassette: call the live service and record");
  }

  std::shared_ptr<llm::Backend> make() const {
    if (kind == "mock") return std::make_shared<synth::SyntheticBackend>(seed);
    if (!cassette.empty()) {
      std::shared_ptr<llm::HttpTransport> inner;
      if (record) {
        const char* base = std::getenv("RELATE_API_BASE");
        const char* key = std::getenv("RELATE_API_KEY");
        if (!base) throw llm::ConfigError("RELATE_API_BASE is not set");
        inner = std::make_shared<llm::HttplibTransport>(base, key ? key : "");
      }
      auto transport = std::make_shared<llm::CassetteTransport>(
          cassette, record ? llm::CassetteTransport::Mode::Record : llm::CassetteTransport::Mode::Replay,
          inner);
      return std::make_shared<llm::HttpBackend>(transport);
    }
    return llm::HttpBackend::from_environment();
  }

  llm::GatewayConfig gateway_config() const {
    llm::GatewayConfig c;
    c.default_model = model;
    return c;
  }
};

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t concurrency, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(concurrency, count); ++t) {
    pool.emplace_back([&] {
      for (auto i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

int cmd_synth(std::size_t count, std::uint64_t seed, const fs::path& out) {
  const auto cohort = persona::generate_synthetic_cohort(count, seed);
  std::vector<persona::InstrumentDoc> docs;
  std::vector<eval::DyadOutcome> truth;
  for (const auto& d : cohort) {
    docs.insert(docs.end(), d.docs.begin(), d.docs.end());
    truth.push_back({d.dyad_id, d.baseline, d.followup});
  }
  persona::write_instrument_dir(out / "instruments", docs);
  runner::write_atomic(out / "truth.jsonl", eval::serialize_truth(truth));
  std::cout << fmt::format("wrote {} dyads ({} documents) to {}\n", cohort.size(), docs.size(), out.string());
  return 0;
}

int cmd_persona(const fs::path& in, const fs::path& out, const BackendOptions& backend,
                std::size_t concurrency) {
  const auto by_subject = persona::load_instrument_dir(in);
  if (by_subject.empty()) throw std::runtime_error("no instrument documents under " + in.string());
  std::vector<std::string> subjects;
  for (const auto& [s, _] : by_subject) subjects.push_back(s);

  auto shared = backend.make();
  auto limiter = std::make_shared<llm::InflightLimiter>(concurrency);
  std::map<std::string, Persona> personas;
  std::mutex mutex;
  std::atomic<int> failures{0};
  parallel_for(subjects.size(), concurrency, [&](std::size_t i) {
    const auto& subject = subjects[i];
    llm::Gateway gateway(shared, backend.gateway_config(), limiter);
    Warnings warnings;
    try {
      auto p = persona::build_persona(gateway, by_subject.at(subject), warnings);
      persona::save_persona(out / "personas" / (subject + ".json"), p);
      std::lock_guard lock(mutex);
      personas.emplace(subject, std::move(p));
    } catch (const std::exception& e) {
      ++failures;
      spdlog::error("{}: {}", subject, e.what());
    }
    for (const auto& w : warnings) spdlog::warn("{}: {}", subject, w);
  });
  Warnings warnings;
  const auto dyads = persona::pair_dyads(personas, warnings);
  for (const auto& w : warnings) spdlog::warn("{}", w);
  runner::write_atomic(out / "dyads.jsonl", runner::serialize_dyads(dyads));
  std::cout << fmt::format("{} personas, {} dyads written to {}\n", personas.size(), dyads.size(), out.string());
  return failures == 0 ? 0 : 1;
}

int cmd_simulate(const fs::path& dyads_file, const fs::path& bank_file, runner::RunConfig config,
                 const BackendOptions& backend) {
  const auto dyads = runner::load_dyads(dyads_file);
  const auto bank = scene::ScenarioBank::load(bank_file);
  auto limiter = std::make_shared<llm::InflightLimiter>(config.concurrency);
  const auto result =
      runner::run_batch(dyads, bank, config, backend.make(), backend.gateway_config(), limiter);
  int invalid = 0;
  for (const auto& r : result.runs) {
    if (!r.valid) {
      ++invalid;
      spdlog::error("{} run {}: {}", r.dyad_id, r.run_index, r.error);
    }
  }
  std::cout << fmt::format("{} runs, {} invalid, peak {} in flight, traces in {}\n", result.runs.size(),
                           invalid, result.peak_in_flight, config.output_dir.string());
  return invalid == 0 && !result.aborted ? 0 : 1;
}

int cmd_evaluate(const fs::path& traces_dir, const fs::path& truth_file, const fs::path& report_file,
                 const std::string& table_file, const BackendOptions& backend) {
  const auto traces = eval::load_traces(traces_dir);
  const auto truth = eval::load_truth(truth_file);
  llm::Gateway gateway(backend.make(), backend.gateway_config());
  const auto report = eval::evaluate(gateway, traces, truth);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  runner::write_atomic(report_file, canonical_dump(eval::to_json(report)) + "\n");
  const auto table = eval::render_table(report);
  if (!table_file.empty()) runner::write_atomic(table_file, table);
  std::cout << table;
  return 0;
}

std::atomic<session::Server*> g_server{nullptr};

int cmd_serve(const std::string& host, int port, const fs::path& bank_file, const std::string& dyads_file,
              int scenes, const std::string& token, const BackendOptions& backend) {
  const auto bank = scene::ScenarioBank::load(bank_file);
  SimulationConfig defaults;
  defaults.num_scenes = scenes;
  session::SessionManager manager(bank, backend.make(), defaults, backend.seed);
  if (!dyads_file.empty()) {
    for (auto& d : runner::load_dyads(dyads_file)) manager.register_dyad(std::move(d));
  }
  session::Server::Options options;
  if (!token.empty()) options.token = token;
  session::Server server(manager, options);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (auto* s = g_server.load()) s->stop();
  });
  spdlog::info("serving on {}:{}", host, port);
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  if (!ok) {
    spdlog::error("could not listen on {}:{}", host, port);
    return 1;
  }
  return 0;
}

int cmd_genbank(const fs::path& out, std::size_t per_category, std::uint64_t seed) {
  const scene::ScenarioBank bank(scene::generate_bank(per_category, seed));
  runner::write_atomic(out, bank.serialize());
  std::cout << fmt::format("wrote {} scenarios to {}\n", bank.size(), out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relationship turning-point simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  // persona
  auto* persona_cmd = app.add_subcommand("persona", "Synthesize personas and dyads from instrument documents");
  std::string persona_in, persona_out;
  std::size_t persona_concurrency = 16;
  BackendOptions persona_backend;
  persona_cmd->add_option("--in", persona_in, "Instrument directory")->required();
  persona_cmd->add_option("--out", persona_out, "Output directory")->required();
  persona_cmd->add_option("--concurrency", persona_concurrency)->check(CLI::PositiveNumber);
  persona_cmd->add_option("--seed", persona_backend.seed, "Mock backend seed");
  persona_backend.attach(persona_cmd);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Run every dyad through the scene loop");
  std::string sim_dyads, sim_bank, sim_out;
  runner::RunConfig run_config;
  BackendOptions sim_backend;
  sim_cmd->add_option("--dyads", sim_dyads, "Dyads JSONL")->required();
  sim_cmd->add_option("--bank", sim_bank, "Scenario bank JSONL")->required();
  sim_cmd->add_option("--out", sim_out, "Trace output directory")->required();
  sim_cmd->add_option("--runs", run_config.runs_per_dyad, "Runs per dyad")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--concurrency", run_config.concurrency, "Runs in flight")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--scenes", run_config.simulation.num_scenes, "Scenes per run")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--lambda", run_config.simulation.affect_lambda, "Affect weight in retrieval")
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--k", run_config.simulation.retrieval_k, "Memories retrieved per decision")
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", run_config.seed, "Batch seed");
  sim_cmd->add_flag("--keep-checkpoints", run_config.keep_checkpoints, "Keep per-scene checkpoints");
  sim_cmd->add_flag("!--no-prompt-log", run_config.simulation.log_prompts, "Do not store decision prompts");
  sim_backend.attach(sim_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score stored traces against follow-up outcomes");
  std::string eval_traces, eval_truth, eval_report, eval_table;
  BackendOptions eval_backend;
  eval_cmd->add_option("--traces", eval_traces, "Trace directory")->required();
  eval_cmd->add_option("--truth", eval_truth, "Truth JSONL")->required();
  eval_cmd->add_option("--report", eval_report, "JSON report output")->required();
  eval_cmd->add_option("--table", eval_table, "Also write the text table here");
  eval_cmd->add_option("--seed", eval_backend.seed, "Mock backend seed");
  eval_backend.attach(eval_cmd);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the rehearsal session HTTP service");
  std::string serve_host = "127.0.0.1", serve_bank, serve_dyads, serve_token;
  int serve_port = 8080;
  int serve_scenes = 8;
  BackendOptions serve_backend;
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port)->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--bank", serve_bank, "Scenario bank JSONL")->required();
  serve_cmd->add_option("--dyads", serve_dyads, "Dyads selectable by id");
  serve_cmd->add_option("--scenes", serve_scenes, "Scenes per session")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--token", serve_token, "Require this bearer token");
  serve_cmd->add_option("--seed", serve_backend.seed, "Session and mock seed");
  serve_backend.attach(serve_cmd);

  // genbank
  auto* bank_cmd = app.add_subcommand("genbank", "Generate a scenario bank");
  std::string bank_out;
  std::size_t bank_per_category = 60;
  std::uint64_t bank_seed = 0;
  bank_cmd->add_option("--out", bank_out)->required();
  bank_cmd->add_option("--per-category", bank_per_category)->check(CLI::PositiveNumber);
  bank_cmd->add_option("--seed", bank_seed);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic cohort of instruments and outcomes");
  std::string synth_out;
  std::size_t synth_count = 71;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--dyads", synth_count)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_seed);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (*persona_cmd) return cmd_persona(persona_in, persona_out, persona_backend, persona_concurrency);
    if (*sim_cmd) {
      run_config.output_dir = sim_out;
      sim_backend.seed = run_config.seed;
      return cmd_simulate(sim_dyads, sim_bank, run_config, sim_backend);
    }
    if (*eval_cmd) return cmd_evaluate(eval_traces, eval_truth, eval_report, eval_table, eval_backend);
    if (*serve_cmd) {
      return cmd_serve(serve_host, serve_port, serve_bank, serve_dyads, serve_scenes, serve_token, serve_backend);
    }
    if (*bank_cmd) return cmd_genbank(bank_out, bank_per_category, bank_seed);
    if (*synth_cmd) return cmd_synth(synth_count, synth_seed, synth_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
