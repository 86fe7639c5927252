// SPDX-License-Identifier: Apache-2.0
//
// Batch orchestration: runs every dyad several times with bounded
// concurrency, persists one canonical trace per run plus per-scene
// checkpoints, and resumes interrupted batches from those checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/scenario_bank.hpp"

namespace relate::runner {

struct RunConfig {
  int runs_per_dyad = 5;
  std::size_t concurrency = 16;
  SimulationConfig simulation;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  /// Keep run_<i>.ckpt/ after the run's trace is written.
  bool keep_checkpoints = false;
  /// Test hook: stop the batch once this many scenes have been checkpointed,
  /// leaving unfinished runs to be resumed.
  std::optional<int> abort_after_scenes;
};

/// Throws std::invalid_argument on a config that cannot run.
void validate(const RunConfig& config);

std::uint64_t run_seed(std::uint64_t batch_seed, std::string_view dyad_id, int run_index);

std::filesystem::path trace_path(const std::filesystem::path& out, std::string_view dyad_id, int run_index);
std::filesystem::path checkpoint_dir(const std::filesystem::path& out, std::string_view dyad_id,
                                     int run_index);

struct RunRecord {
  std::string dyad_id;
  int run_index = 0;
  bool valid = false;
  std::string error;
  /// Already complete on disk; nothing was simulated.
  bool reused = false;
  /// Scenes restored from a checkpoint before simulating.
  int resumed_scenes = 0;
};

struct BatchResult {
  /// Ordered by dyad (input order) then run index; only finished runs.
  std::vector<SimulationTrace> traces;
  std::vector<RunRecord> runs;
  /// Highest number of runs simulating at once.
  std::size_t peak_in_flight = 0;
  bool aborted = false;
};

/// Each run gets its own Gateway over the shared backend and limiter, so the
/// backend must be safe to call from several threads.
BatchResult run_batch(std::span<const Dyad> dyads, const scene::ScenarioBank& bank,
                      const RunConfig& config, std::shared_ptr<llm::Backend> backend,
                      llm::GatewayConfig gateway_config = {},
                      std::shared_ptr<llm::InflightLimiter> limiter = nullptr);

/// Writes via a temporary file and rename.
void write_atomic(const std::filesystem::path& file, std::string_view content);

std::vector<Dyad> load_dyads(const std::filesystem::path& file);
std::string serialize_dyads(std::span<const Dyad> dyads);

}  // namespace relate::runner
