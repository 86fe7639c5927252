// SPDX-License-Identifier: Apache-2.0
//
// Human-in-the-loop rehearsal sessions. Each session runs one simulation on
// its own thread; when the human-controlled partner must act, the loop parks
// until a choice arrives, and the agent's own pick is kept as a shadow for
// choice-alignment reporting. The HTTP layer is a thin JSON front end.

#pragma once

#include <condition_variable>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "relate/domain.hpp"
#include "relate/llm/gateway.hpp"
#include "relate/scenario_bank.hpp"
#include "relate/scene_master.hpp"

namespace relate::session {

enum class Status { Running, AwaitingChoice, Completed, Failed };

std::string_view to_string(Status s);

struct HumanDecisionRecord {
  int scene_index = 0;
  OptionSet options;
  std::string option_id;
  std::string rationale;
  std::string shadow_option_id;
};

struct AlignmentReport {
  double choice_alignment = 0.0;
  int matches = 0;
  std::vector<HumanDecisionRecord> decisions;
};

/// Throws std::logic_error when there are no decisions yet.
AlignmentReport alignment_report(const std::vector<HumanDecisionRecord>& decisions);
Json to_json(const AlignmentReport& r);

/// Raised by Session::submit_choice.
class NoPendingDecision : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InvalidChoice : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionOptions {
  std::optional<Partner> human_controls;
  SimulationConfig simulation;
  std::uint64_t seed = 0;
};

class Session {
 public:
  Session(std::string id, Dyad dyad, SessionOptions options, const scene::ScenarioBank& bank,
          std::shared_ptr<llm::Backend> backend, std::shared_ptr<llm::InflightLimiter> limiter);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  /// Current scene frame, transcript, pending options and latest state.
  Json state_json() const;

  /// Returns the agent's shadow option id.
  std::string submit_choice(const std::string& option_id, const std::string& rationale);

  std::vector<HumanDecisionRecord> decisions() const;
  Status status() const;
  std::optional<SimulationTrace> trace() const;

  /// Blocks until the session awaits a choice or has finished.
  bool wait_until_settled(std::chrono::milliseconds timeout) const;

 private:
  void run();
  scene::HumanChoice park(const scene::DecisionPoint& point);

  std::string id_;
  Dyad dyad_;
  SessionOptions options_;
  const scene::ScenarioBank& bank_;
  std::shared_ptr<llm::Backend> backend_;
  std::shared_ptr<llm::InflightLimiter> limiter_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  Status status_ = Status::Running;
  bool closing_ = false;
  int scene_index_ = -1;
  std::optional<scene::ExpandedScene> scene_;
  std::vector<SceneEvent> transcript_;
  RelationshipState state_;
  std::optional<scene::DecisionPoint> pending_;
  std::optional<scene::HumanChoice> answer_;
  std::vector<HumanDecisionRecord> decisions_;
  std::optional<SimulationTrace> trace_;
  std::thread thread_;
};

class SessionManager {
 public:
  SessionManager(const scene::ScenarioBank& bank, std::shared_ptr<llm::Backend> backend,
                 SimulationConfig defaults = {}, std::uint64_t seed = 0);

  std::shared_ptr<Session> create(Dyad dyad, SessionOptions options);
  /// Null when unknown.
  std::shared_ptr<Session> find(const std::string& id) const;

  /// Dyads loaded at startup, selectable by id in create requests.
  void register_dyad(Dyad dyad);
  const Dyad* dyad(const std::string& id) const;

  const SimulationConfig& defaults() const { return defaults_; }
  std::uint64_t seed() const { return seed_; }

 private:
  const scene::ScenarioBank& bank_;
  std::shared_ptr<llm::Backend> backend_;
  std::shared_ptr<llm::InflightLimiter> limiter_;
  SimulationConfig defaults_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::uint64_t counter_ = 0;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Dyad> dyads_;
};

/// HTTP front end for a SessionManager.
class Server {
 public:
  struct Options {
    /// When set, requests other than OPTIONS and healthz need "Authorization: Bearer <token>".
    std::optional<std::string> token;
  };

  explicit Server(SessionManager& manager, Options options = {});
  ~Server();

  /// Blocks serving until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace relate::session
