// SPDX-License-Identifier: Apache-2.0

#include "relate/session.hpp"

#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"

namespace relate::session {

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::AwaitingChoice: return "awaiting_choice";
    case Status::Completed: return "completed";
    case Status::Failed: return "failed";
  }
  return "running";
}

AlignmentReport alignment_report(const std::vector<HumanDecisionRecord>& decisions) {
  if (decisions.empty()) throw std::logic_error("no completed decisions yet");
  AlignmentReport r;
  r.decisions = decisions;
  for (const auto& d : decisions) r.matches += d.option_id == d.shadow_option_id;
  r.choice_alignment = static_cast<double>(r.matches) / static_cast<double>(decisions.size());
  return r;
}

Json to_json(const AlignmentReport& r) {
  Json j = Json::object();
  j["choice_alignment"] = r.choice_alignment;
  j["matches"] = r.matches;
  j["total"] = r.decisions.size();
  Json records = Json::array();
  for (const auto& d : r.decisions) {
    Json dj = Json::object();
    dj["scene_index"] = d.scene_index;
    dj["option_id"] = d.option_id;
    dj["shadow_option_id"] = d.shadow_option_id;
    dj["match"] = d.option_id == d.shadow_option_id;
    dj["rationale"] = d.rationale;
    dj["options"] = relate::to_json(d.options);
    records.push_back(std::move(dj));
  }
  j["decisions"] = records;
  return j;
}

// ---------------------------------------------------------------------------
// Session

Session::Session(std::string id, Dyad dyad, SessionOptions options, const scene::ScenarioBank& bank,
                 std::shared_ptr<llm::Backend> backend, std::shared_ptr<llm::InflightLimiter> limiter)
    : id_(std::move(id)),
      dyad_(std::move(dyad)),
      options_(std::move(options)),
      bank_(bank),
      backend_(std::move(backend)),
      limiter_(std::move(limiter)) {
  thread_ = std::thread([this] { run(); });
}

Session::~Session() {
  {
    std::lock_guard lock(mutex_);
    closing_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void Session::run() {
  scene::RunHooks hooks;
  hooks.human_controls = options_.human_controls;
  hooks.on_decision = [this](const scene::DecisionPoint& point) { return park(point); };
  hooks.on_scene_start = [this](int index, const scene::ExpandedScene& scene) {
    std::lock_guard lock(mutex_);
    if (closing_) throw std::runtime_error("session closed");
    scene_index_ = index;
    scene_ = scene;
    transcript_.clear();
  };
  hooks.on_event = [this](int, const SceneEvent& event) {
    std::lock_guard lock(mutex_);
    transcript_.push_back(event);
  };
  hooks.on_scene_complete = [this](const scene::Checkpoint& c) {
    std::lock_guard lock(mutex_);
    state_ = c.state;
  };

  llm::Gateway gateway(backend_, {}, limiter_);
  auto trace = scene::run_simulation(gateway, bank_, dyad_, options_.simulation, options_.seed, 0, hooks);
  {
    std::lock_guard lock(mutex_);
    status_ = trace.valid ? Status::Completed : Status::Failed;
    pending_.reset();
    trace_ = std::move(trace);
  }
  cv_.notify_all();
}

scene::HumanChoice Session::park(const scene::DecisionPoint& point) {
  std::unique_lock lock(mutex_);
  pending_ = point;
  answer_.reset();
  status_ = Status::AwaitingChoice;
  cv_.notify_all();
  cv_.wait(lock, [this] { return answer_.has_value() || closing_; });
  if (closing_) throw std::runtime_error("session closed");
  auto choice = *answer_;
  answer_.reset();
  pending_.reset();
  status_ = Status::Running;
  return choice;
}

std::string Session::submit_choice(const std::string& option_id, const std::string& rationale) {
  std::string shadow;
  {
    std::lock_guard lock(mutex_);
    if (!pending_ || answer_) throw NoPendingDecision("no decision is pending");
    const auto& options = pending_->options.options;
    const bool known = std::any_of(options.begin(), options.end(),
                                   [&](const Option& o) { return o.id == option_id; });
    if (!known) throw InvalidChoice("option_id '" + option_id + "' is not in the pending option set");
    shadow = pending_->shadow.chosen_option_id;
    decisions_.push_back({pending_->scene_index, pending_->options, option_id, rationale, shadow});
    answer_ = scene::HumanChoice{option_id, rationale};
  }
  cv_.notify_all();
  return shadow;
}

Json Session::state_json() const {
  std::lock_guard lock(mutex_);
  Json j = Json::object();
  j["session_id"] = id_;
  j["status"] = std::string(to_string(status_));
  j["human_controls"] = options_.human_controls ? Json(std::string(to_token(*options_.human_controls)))
                                                : Json("none");
  j["scene_index"] = scene_index_;
  if (scene_) {
    Json s = relate::to_json(scene_->scene_state);
    s["category"] = std::string(to_token(scene_->category));
    s["stakes"] = scene_->stakes;
    s["scenario_id"] = scene_->source_scenario_id;
    j["scene"] = s;
  } else {
    j["scene"] = nullptr;
  }
  Json narration = Json::array();
  for (const auto& e : transcript_) narration.push_back(relate::to_json(e));
  j["narration"] = narration;
  j["pending"] = pending_ && !answer_ ? relate::to_json(pending_->options) : Json(nullptr);
  j["state"] = relate::to_json(state_);
  j["decisions_made"] = decisions_.size();
  j["error"] = trace_ && !trace_->valid ? Json(trace_->error) : Json(nullptr);
  return j;
}

std::vector<HumanDecisionRecord> Session::decisions() const {
  std::lock_guard lock(mutex_);
  return decisions_;
}

Status Session::status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

std::optional<SimulationTrace> Session::trace() const {
  std::lock_guard lock(mutex_);
  return trace_;
}

bool Session::wait_until_settled(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [this] {
    return status_ != Status::Running && !(status_ == Status::AwaitingChoice && answer_);
  });
}

// ---------------------------------------------------------------------------
// Manager

SessionManager::SessionManager(const scene::ScenarioBank& bank, std::shared_ptr<llm::Backend> backend,
                               SimulationConfig defaults, std::uint64_t seed)
    : bank_(bank),
      backend_(std::move(backend)),
      limiter_(std::make_shared<llm::InflightLimiter>(llm::kDefaultInflightLimit)),
      defaults_(defaults),
      seed_(seed) {}

std::shared_ptr<Session> SessionManager::create(Dyad dyad, SessionOptions options) {
  std::lock_guard lock(mutex_);
  const auto n = ++counter_;
  const auto id = fmt::format("s{:04d}-{}", n, sha256_hex(fmt::format("{}|{}|{}", seed_, n, dyad.dyad_id)).substr(0, 8));
  auto session = std::make_shared<Session>(id, std::move(dyad), std::move(options), bank_, backend_, limiter_);
  sessions_[id] = session;
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void SessionManager::register_dyad(Dyad dyad) {
  std::lock_guard lock(mutex_);
  auto id = dyad.dyad_id;
  dyads_[id] = std::move(dyad);
}

const Dyad* SessionManager::dyad(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = dyads_.find(id);
  return it == dyads_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// HTTP

struct Server::Impl {
  Impl(SessionManager& m, Options o) : manager(m), options(std::move(o)) {}
  SessionManager& manager;
  Options options;
  httplib::Server http;
  std::thread thread;
};

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
  send_json(res, status, Json{{"error", std::string(message)}});
}

}  // namespace

Server::Server(SessionManager& manager, Options options)
    : impl_(std::make_unique<Impl>(manager, std::move(options))) {
  auto& http = impl_->http;
  auto* impl = impl_.get();

  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                            {"Access-Control-Allow-Headers", "Content-Type, Authorization"}});
  http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.set_pre_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    if (!impl->options.token || req.method == "OPTIONS" || req.path == "/v1/healthz") {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") != "Bearer " + *impl->options.token) {
      send_error(res, 401, "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "unknown error");
    }
  });

  http.Get("/v1/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, Json{{"status", "ok"}});
  });

  http.Post("/v1/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::parse_error&) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("dyad")) return send_error(res, 422, "field 'dyad' is required");
    SessionOptions options;
    options.simulation = impl->manager.defaults();
    options.seed = impl->manager.seed();
    Dyad dyad;
    try {
      if (body["dyad"].is_string()) {
        const auto* known = impl->manager.dyad(body["dyad"].get<std::string>());
        if (!known) return send_error(res, 422, "unknown dyad id '" + body["dyad"].get<std::string>() + "'");
        dyad = *known;
      } else {
        dyad = from_json<Dyad>(body["dyad"], "/dyad");
      }
      if (body.contains("human_controls")) {
        if (!body["human_controls"].is_string()) return send_error(res, 422, "human_controls must be A, B or none");
        const auto hc = body["human_controls"].get<std::string>();
        if (hc != "none") {
          const auto p = parse_token<Partner>(hc);
          if (!p) return send_error(res, 422, "human_controls must be A, B or none");
          options.human_controls = *p;
        }
      }
      if (body.contains("num_scenes")) {
        if (!body["num_scenes"].is_number_integer() || body["num_scenes"].get<int>() < 1) {
          return send_error(res, 422, "num_scenes must be a positive integer");
        }
        options.simulation.num_scenes = body["num_scenes"].get<int>();
      }
      if (body.contains("seed")) {
        if (!body["seed"].is_number_unsigned()) return send_error(res, 422, "seed must be a non-negative integer");
        options.seed = body["seed"].get<std::uint64_t>();
      }
    } catch (const SchemaError& e) {
      return send_error(res, 422, e.what());
    }
    auto session = impl->manager.create(std::move(dyad), std::move(options));
    send_json(res, 201, Json{{"session_id", session->id()}});
  });

  http.Get(R"(/v1/sessions/([^/]+)/state)", [impl](const httplib::Request& req, httplib::Response& res) {
    auto session = impl->manager.find(req.matches[1]);
    if (!session) return send_error(res, 404, "session not found");
    send_json(res, 200, session->state_json());
  });

  http.Post(R"(/v1/sessions/([^/]+)/choice)", [impl](const httplib::Request& req, httplib::Response& res) {
    auto session = impl->manager.find(req.matches[1]);
    if (!session) return send_error(res, 404, "session not found");
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::parse_error&) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("option_id") || !body["option_id"].is_string()) {
      return send_error(res, 422, "field 'option_id' (string) is required");
    }
    std::string rationale;
    if (body.contains("rationale")) {
      if (!body["rationale"].is_string()) return send_error(res, 422, "rationale must be a string");
      rationale = body["rationale"].get<std::string>();
    }
    try {
      const auto shadow = session->submit_choice(body["option_id"].get<std::string>(), rationale);
      send_json(res, 200, Json{{"accepted", true}, {"agent_shadow_choice", shadow}});
    } catch (const NoPendingDecision& e) {
      send_error(res, 409, e.what());
    } catch (const InvalidChoice& e) {
      send_error(res, 422, e.what());
    }
  });

  http.Get(R"(/v1/sessions/([^/]+)/report)", [impl](const httplib::Request& req, httplib::Response& res) {
    auto session = impl->manager.find(req.matches[1]);
    if (!session) return send_error(res, 404, "session not found");
    try {
      send_json(res, 200, to_json(alignment_report(session->decisions())));
    } catch (const std::logic_error& e) {
      send_error(res, 409, e.what());
    }
  });
}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::start_background(const std::string& host) {
  const int port = impl_->http.bind_to_any_port(host);
  if (port < 0) throw std::runtime_error("could not bind a port on " + host);
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace relate::session
