// SPDX-License-Identifier: Apache-2.0

#include "relate/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"
#include "relate/scene_master.hpp"

namespace relate::runner {

namespace fs = std::filesystem;

void validate(const RunConfig& config) {
  if (config.runs_per_dyad < 1) throw std::invalid_argument("runs_per_dyad must be at least 1");
  if (config.concurrency < 1) throw std::invalid_argument("concurrency must be at least 1");
  if (config.simulation.num_scenes < 1) throw std::invalid_argument("num_scenes must be at least 1");
  if (config.simulation.affect_lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (config.simulation.retrieval_k < 1) throw std::invalid_argument("k must be at least 1");
  if (config.output_dir.empty()) throw std::invalid_argument("output directory is required");
}

std::uint64_t run_seed(std::uint64_t batch_seed, std::string_view dyad_id, int run_index) {
  return derive_seed(batch_seed, {std::string(dyad_id), std::to_string(run_index)});
}

fs::path trace_path(const fs::path& out, std::string_view dyad_id, int run_index) {
  return out / std::string(dyad_id) / fmt::format("run_{}.jsonl", run_index);
}

fs::path checkpoint_dir(const fs::path& out, std::string_view dyad_id, int run_index) {
  return out / std::string(dyad_id) / fmt::format("run_{}.ckpt", run_index);
}

void write_atomic(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

namespace {

std::optional<std::string> read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_run(const SimulationTrace& t, const Dyad& dyad, int run_index, std::uint64_t seed,
              const SimulationConfig& config) {
  return t.dyad_id == dyad.dyad_id && t.run_index == run_index && t.run_seed == seed &&
         t.config == config && t.persona_a == dyad.a && t.persona_b == dyad.b;
}

/// Latest readable checkpoint for this run, if any.
std::optional<scene::Checkpoint> latest_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) return std::nullopt;
  static const std::regex name_re(R"(scene_(\d+)\.json)");
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, name_re)) files.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  std::sort(files.rbegin(), files.rend());
  for (const auto& [index, file] : files) {
    try {
      auto text = read_file(file);
      if (!text) continue;
      return scene::checkpoint_from_json(Json::parse(*text), file.string());
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable checkpoint {}: {}", file.string(), e.what());
    }
  }
  return std::nullopt;
}

struct Job {
  const Dyad* dyad;
  int run_index;
};

class PeakCounter {
 public:
  void enter() {
    const auto now = ++current_;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
  }
  void leave() { --current_; }
  std::size_t peak() const { return peak_.load(); }

 private:
  std::atomic<std::size_t> current_{0};
  std::atomic<std::size_t> peak_{0};
};

}  // namespace

BatchResult run_batch(std::span<const Dyad> dyads, const scene::ScenarioBank& bank,
                      const RunConfig& config, std::shared_ptr<llm::Backend> backend,
                      llm::GatewayConfig gateway_config,
                      std::shared_ptr<llm::InflightLimiter> limiter) {
  validate(config);
  if (bank.empty()) throw std::invalid_argument("scenario bank is empty");
  if (!backend) throw std::invalid_argument("backend is required");
  {
    std::set<std::string, std::less<>> ids;
    for (const auto& d : dyads) {
      if (!ids.insert(d.dyad_id).second) throw std::invalid_argument("duplicate dyad id '" + d.dyad_id + "'");
    }
  }
  if (!limiter) limiter = std::make_shared<llm::InflightLimiter>(llm::kDefaultInflightLimit);

  std::vector<Job> jobs;
  for (const auto& d : dyads) {
    for (int r = 0; r < config.runs_per_dyad; ++r) jobs.push_back({&d, r});
  }
  std::vector<std::optional<SimulationTrace>> traces(jobs.size());
  std::vector<RunRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> scenes_checkpointed{0};
  std::atomic<bool> aborted{false};
  PeakCounter in_flight;

  auto run_job = [&](std::size_t j) {
    const auto& dyad = *jobs[j].dyad;
    const int run_index = jobs[j].run_index;
    const auto seed = run_seed(config.seed, dyad.dyad_id, run_index);
    const auto out_file = trace_path(config.output_dir, dyad.dyad_id, run_index);
    const auto ckpt_dir = checkpoint_dir(config.output_dir, dyad.dyad_id, run_index);
    auto& record = records[j];
    record.dyad_id = dyad.dyad_id;
    record.run_index = run_index;

    if (auto text = read_file(out_file)) {
      try {
        auto existing = parse_trace(*text);
        if (existing.valid && same_run(existing, dyad, run_index, seed, config.simulation)) {
          record.valid = true;
          record.reused = true;
          traces[j] = std::move(existing);
          return;
        }
      } catch (const std::exception& e) {
        spdlog::warn("rerunning {}: {}", out_file.string(), e.what());
      }
    }

    std::optional<scene::Checkpoint> resume = latest_checkpoint(ckpt_dir);
    if (resume && !same_run(resume->trace, dyad, run_index, seed, config.simulation)) {
      spdlog::warn("checkpoint in {} belongs to another configuration; starting over", ckpt_dir.string());
      resume.reset();
    }
    record.resumed_scenes = resume ? static_cast<int>(resume->trace.scenes.size()) : 0;

    scene::RunHooks hooks;
    hooks.on_scene_complete = [&](const scene::Checkpoint& c) {
      const auto k = c.trace.scenes.size() - 1;
      write_atomic(ckpt_dir / fmt::format("scene_{}.json", k), canonical_dump(scene::to_json(c)));
      if (config.abort_after_scenes && ++scenes_checkpointed >= *config.abort_after_scenes) {
        aborted = true;
      }
      if (aborted) throw std::runtime_error("batch aborted");
    };

    llm::Gateway gateway(backend, gateway_config, limiter);
    in_flight.enter();
    auto trace = scene::run_simulation(gateway, bank, dyad, config.simulation, seed, run_index, hooks,
                                       std::move(resume));
    in_flight.leave();
    if (aborted) return;

    write_atomic(out_file, serialize_trace(trace));
    if (!config.keep_checkpoints && trace.valid) fs::remove_all(ckpt_dir);
    record.valid = trace.valid;
    record.error = trace.error;
    traces[j] = std::move(trace);
  };

  auto worker = [&] {
    for (;;) {
      if (aborted) return;
      const auto j = next++;
      if (j >= jobs.size()) return;
      try {
        run_job(j);
      } catch (const std::exception& e) {
        // Persistence failures land here; the run is recorded, the batch goes on.
        records[j].valid = false;
        records[j].error = e.what();
        spdlog::error("run {} #{} failed: {}", jobs[j].dyad->dyad_id, jobs[j].run_index, e.what());
      }
    }
  };

  const auto threads = std::min(config.concurrency, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  BatchResult result;
  result.aborted = aborted;
  result.peak_in_flight = in_flight.peak();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (traces[j]) result.traces.push_back(std::move(*traces[j]));
    if (!records[j].dyad_id.empty()) result.runs.push_back(std::move(records[j]));
  }
  return result;
}

std::vector<Dyad> load_dyads(const fs::path& file) {
  auto text = read_file(file);
  if (!text) throw std::runtime_error("cannot read dyads file " + file.string());
  std::vector<Dyad> out;
  std::istringstream in(*text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = fmt::format("{}:{}", file.string(), line_no);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw SchemaError(where, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(from_json<Dyad>(j, where));
  }
  return out;
}

std::string serialize_dyads(std::span<const Dyad> dyads) {
  std::string out;
  for (const auto& d : dyads) out += canonical_dump(to_json(d)) + "\n";
  return out;
}

}  // namespace relate::runner
