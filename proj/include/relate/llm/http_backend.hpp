// SPDX-License-Identifier: Apache-2.0
//
// Chat-completions wire protocol over HTTP, plus a cassette transport that
// records and replays response bodies keyed by request digest.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "relate/llm/gateway.hpp"

namespace relate::llm {

struct HttpResult {
  int status = 0;
  std::string body;
  std::optional<std::string> retry_after;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// `path` is relative to the base URL, e.g. "/chat/completions".
  virtual HttpResult post(const std::string& path, const std::string& body) = 0;
};

struct Endpoint {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1"
};

/// Splits "https://host[:port][/prefix]"; throws ConfigError when malformed.
Endpoint parse_base_url(const std::string& base_url);

/// Live transport backed by cpp-httplib.
class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::string api_key, int timeout_seconds = 120);
  HttpResult post(const std::string& path, const std::string& body) override;

 private:
  Endpoint endpoint_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Cassette: one file per request, named by sha256(path + "\n" + body).
/// Replay mode never touches the network; a miss is a ConfigError.
class CassetteTransport : public HttpTransport {
 public:
  enum class Mode { Replay, Record };

  CassetteTransport(std::filesystem::path dir, Mode mode,
                    std::shared_ptr<HttpTransport> inner = nullptr);
  HttpResult post(const std::string& path, const std::string& body) override;

  static std::string request_digest(const std::string& path, const std::string& body);

 private:
  std::filesystem::path dir_;
  Mode mode_;
  std::shared_ptr<HttpTransport> inner_;
  std::mutex mutex_;
};

struct HttpBackendConfig {
  std::string embedding_model = "text-embedding-3-small";
  /// 0 = take the dimension of the first embedding returned, then enforce it.
  std::size_t embedding_dimension = 0;
  std::string system_prompt =
      "You are one step of a relationship simulation pipeline. Answer with a single JSON object "
      "and nothing else.";
};

class HttpBackend : public Backend {
 public:
  HttpBackend(std::shared_ptr<HttpTransport> transport, HttpBackendConfig config = {});

  /// Transport from RELATE_API_BASE / RELATE_API_KEY.
  static std::shared_ptr<HttpBackend> from_environment(HttpBackendConfig config = {});

  Completion complete(const PromptSpec& spec, const std::string& model) override;
  std::vector<double> embed(std::string_view text) override;
  std::size_t embedding_dimension() const override;

  /// Request body for a chat call, exactly as sent on the wire.
  std::string chat_request_body(const PromptSpec& spec, const std::string& model) const;
  std::string embedding_request_body(std::string_view text) const;

 private:
  HttpResult post_checked(const std::string& path, const std::string& body);

  std::shared_ptr<HttpTransport> transport_;
  HttpBackendConfig config_;
  mutable std::mutex dimension_mutex_;
  std::size_t dimension_;
};

}  // namespace relate::llm
