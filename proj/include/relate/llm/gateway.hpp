// SPDX-License-Identifier: Apache-2.0
//
// Model access for every pipeline step. Callers describe a prompt as named
// sections plus the name of the structured record they expect back; the
// gateway renders it, calls the configured backend, retries transport
// failures with exponential backoff, and re-asks with a repair instruction
// when the reply does not validate.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relate/domain.hpp"

namespace relate::llm {

struct PromptSection {
  std::string name;
  std::string text;
};

struct PromptSpec {
  /// Pipeline step that issued the prompt, e.g. "decision".
  std::string role_tag;
  std::vector<PromptSection> sections;
  std::string response_schema;
  double temperature = 0.7;
  std::optional<std::uint64_t> seed;

  /// Sections in order, each as "Name:\n<text>" separated by blank lines.
  std::string render() const;
  const std::string* section(std::string_view name) const;
  /// sha256 of the rendered sections, used in diagnostics and cassette keys.
  std::string sections_digest() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;
};

struct StructuredResponse {
  std::string raw_text;
  std::optional<Json> parsed;
  std::string parse_error;
  Usage usage;
  int attempts = 0;

  bool ok() const { return parsed.has_value(); }
};

/// Retryable failure talking to the model service.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RateLimitError : public TransportError {
 public:
  RateLimitError(const std::string& what, std::chrono::milliseconds retry_after)
      : TransportError(what), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

/// Non-retryable misuse: unknown schema, bad backend settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scripted backend could not serve a call (no rule matched or exhausted).
class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const PromptSpec& spec, const std::string& model) = 0;
  virtual std::vector<double> embed(std::string_view text) = 0;
  virtual std::size_t embedding_dimension() const = 0;
};

/// Returns an error message when `value` does not match the schema.
using SchemaValidator = std::function<std::optional<std::string>(const Json& value)>;

class SchemaRegistry {
 public:
  void add(std::string name, SchemaValidator validator);
  const SchemaValidator* find(std::string_view name) const;

  /// Registry holding every schema the pipeline uses (see schemas.hpp).
  static std::shared_ptr<const SchemaRegistry> standard();

 private:
  std::map<std::string, SchemaValidator, std::less<>> validators_;
};

/// Counting gate for concurrent backend requests. Records the peak so tests
/// can assert the bound held.
class InflightLimiter {
 public:
  explicit InflightLimiter(std::size_t limit);

  void acquire();
  void release();
  std::size_t limit() const { return limit_; }
  std::size_t peak() const;

  class Guard {
   public:
    explicit Guard(InflightLimiter* limiter) : limiter_(limiter) {
      if (limiter_) limiter_->acquire();
    }
    ~Guard() {
      if (limiter_) limiter_->release();
    }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InflightLimiter* limiter_;
  };

 private:
  std::size_t limit_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
};

inline constexpr std::size_t kDefaultInflightLimit = 16;

struct GatewayConfig {
  int schema_repair_retries = 2;
  int transport_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  std::string default_model = "default";
  /// Per-role_tag model routing.
  std::map<std::string, std::string> model_overrides;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {},
                   std::shared_ptr<InflightLimiter> limiter = nullptr,
                   std::shared_ptr<const SchemaRegistry> schemas = SchemaRegistry::standard());

  /// Throws ConfigError for an unknown schema, TransportError once retries are
  /// spent. A reply that never validates comes back with `parsed` empty.
  StructuredResponse chat(const PromptSpec& spec);

  /// Throws std::invalid_argument on empty text.
  std::vector<double> embed(std::string_view text);
  std::size_t embedding_dimension() const { return backend_->embedding_dimension(); }

  /// Backend chat invocations so far, including retries.
  std::uint64_t chat_calls() const { return chat_calls_.load(); }
  std::uint64_t embed_calls() const { return embed_calls_.load(); }

  const std::string& model_for(const std::string& role_tag) const;
  Backend& backend() { return *backend_; }

 private:
  Completion complete_with_retries(const PromptSpec& spec);

  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  std::shared_ptr<InflightLimiter> limiter_;
  std::shared_ptr<const SchemaRegistry> schemas_;
  std::atomic<std::uint64_t> chat_calls_{0};
  std::atomic<std::uint64_t> embed_calls_{0};
};

/// Pulls the JSON object out of a model reply, tolerating code fences and
/// surrounding prose.
std::optional<Json> extract_json_object(std::string_view text, std::string* error = nullptr);

/// Deterministic pseudo-random unit vectors keyed by text.
class HashEmbedder {
 public:
  HashEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {}
  std::vector<double> operator()(std::string_view text) const;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

}  // namespace relate::llm
