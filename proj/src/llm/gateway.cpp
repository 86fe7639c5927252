// SPDX-License-Identifier: Apache-2.0

#include "relate/llm/gateway.hpp"

#include <cmath>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "relate/hashing.hpp"

namespace relate::llm {

std::string PromptSpec::render() const {
  std::string out;
  for (const auto& s : sections) {
    if (!out.empty()) out += "\n\n";
    out += s.name;
    out += ":\n";
    out += s.text;
  }
  return out;
}

const std::string* PromptSpec::section(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s.text;
  }
  return nullptr;
}

std::string PromptSpec::sections_digest() const { return sha256_hex(render()).substr(0, 16); }

// ---------------------------------------------------------------------------

void SchemaRegistry::add(std::string name, SchemaValidator validator) {
  validators_[std::move(name)] = std::move(validator);
}

const SchemaValidator* SchemaRegistry::find(std::string_view name) const {
  auto it = validators_.find(name);
  return it == validators_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

InflightLimiter::InflightLimiter(std::size_t limit) : limit_(limit) {
  if (limit_ == 0) throw ConfigError("in-flight limit must be at least 1");
}

void InflightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void InflightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t InflightLimiter::peak() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config,
                 std::shared_ptr<InflightLimiter> limiter,
                 std::shared_ptr<const SchemaRegistry> schemas)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      limiter_(std::move(limiter)),
      schemas_(std::move(schemas)) {
  if (!backend_) throw ConfigError("gateway needs a backend");
  if (!schemas_) throw ConfigError("gateway needs a schema registry");
}

const std::string& Gateway::model_for(const std::string& role_tag) const {
  auto it = config_.model_overrides.find(role_tag);
  return it == config_.model_overrides.end() ? config_.default_model : it->second;
}

Completion Gateway::complete_with_retries(const PromptSpec& spec) {
  const auto& model = model_for(spec.role_tag);
  for (int attempt = 0;; ++attempt) {
    try {
      chat_calls_.fetch_add(1);
      InflightLimiter::Guard guard(limiter_.get());
      return backend_->complete(spec, model);
    } catch (const RateLimitError& e) {
      if (attempt >= config_.transport_retries) throw;
      const std::chrono::milliseconds backoff = config_.backoff_base * (1LL << attempt);
      spdlog::warn("rate limited on '{}' (attempt {}), retrying", spec.role_tag, attempt + 1);
      std::this_thread::sleep_for(std::max(backoff, e.retry_after()));
    } catch (const TransportError& e) {
      if (attempt >= config_.transport_retries) throw;
      spdlog::warn("transport error on '{}' (attempt {}): {}", spec.role_tag, attempt + 1, e.what());
      std::this_thread::sleep_for(config_.backoff_base * (1LL << attempt));
    }
  }
}

// Rejected replies are echoed back in the repair section, up to this length.
constexpr std::size_t kRepairEchoChars = 600;

StructuredResponse Gateway::chat(const PromptSpec& spec) {
  const SchemaValidator* validator = schemas_->find(spec.response_schema);
  if (!validator) throw ConfigError("unknown response schema '" + spec.response_schema + "'");

  StructuredResponse response;
  PromptSpec attempt_spec = spec;
  for (int attempt = 0; attempt <= config_.schema_repair_retries; ++attempt) {
    Completion completion = complete_with_retries(attempt_spec);
    response.raw_text = std::move(completion.text);
    response.usage.prompt_tokens += completion.usage.prompt_tokens;
    response.usage.completion_tokens += completion.usage.completion_tokens;
    response.attempts = attempt + 1;

    std::string error;
    auto parsed = extract_json_object(response.raw_text, &error);
    if (parsed) {
      if (auto problem = (*validator)(*parsed)) {
        error = *problem;
      } else {
        response.parsed = std::move(parsed);
        response.parse_error.clear();
        return response;
      }
    }
    response.parse_error = error;
    spdlog::debug("schema '{}' rejected reply for '{}': {}", spec.response_schema, spec.role_tag,
                  error);
    attempt_spec = spec;
    attempt_spec.sections.push_back(
        {"Repair", "Your previous reply was rejected (" + error + "):\n" +
                       response.raw_text.substr(0, kRepairEchoChars) +
                       "\nReply again with only a JSON object in the required format."});
  }
  return response;
}

std::vector<double> Gateway::embed(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  embed_calls_.fetch_add(1);
  InflightLimiter::Guard guard(limiter_.get());
  return backend_->embed(text);
}

// ---------------------------------------------------------------------------

std::optional<Json> extract_json_object(std::string_view text, std::string* error) {
  auto fail = [&](std::string message) -> std::optional<Json> {
    if (error) *error = std::move(message);
    return std::nullopt;
  };
  const auto first = text.find('{');
  const auto last = text.rfind('}');
  if (first == std::string_view::npos || last == std::string_view::npos || last < first) {
    return fail("reply contains no JSON object");
  }
  try {
    return Json::parse(text.substr(first, last - first + 1));
  } catch (const Json::parse_error& e) {
    return fail(std::string("malformed JSON: ") + e.what());
  }
}

std::vector<double> HashEmbedder::operator()(std::string_view text) const {
  std::string key = std::to_string(seed_);
  key += '\x1f';
  key += text;
  std::mt19937_64 rng(stable_hash64(key));
  std::vector<double> v(dimension_);
  double norm = 0.0;
  for (auto& x : v) {
    // Map raw 64-bit draws to [-1,1) directly; distribution objects are not
    // portable across standard libraries.
    x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace relate::llm
