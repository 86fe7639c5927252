// SPDX-License-Identifier: Apache-2.0

#include "relate/llm/http_backend.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "relate/hashing.hpp"

namespace relate::llm {

Endpoint parse_base_url(const std::string& base_url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, kUrl)) {
    throw ConfigError("malformed base URL '" + base_url + "'");
  }
  Endpoint e{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

HttplibTransport::HttplibTransport(const std::string& base_url, std::string api_key,
                                   int timeout_seconds)
    : endpoint_(parse_base_url(base_url)),
      api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (endpoint_.scheme_host_port.rfind("https://", 0) == 0) {
    throw ConfigError("https base URL requires a build with OpenSSL support");
  }
#endif
}

HttpResult HttplibTransport::post(const std::string& path, const std::string& body) {
  httplib::Client client(endpoint_.scheme_host_port);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(endpoint_.path_prefix + path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + path + " failed: " + httplib::to_string(res.error()));
  }
  HttpResult out{res->status, res->body, std::nullopt};
  if (res->has_header("Retry-After")) out.retry_after = res->get_header_value("Retry-After");
  return out;
}

// ---------------------------------------------------------------------------

CassetteTransport::CassetteTransport(std::filesystem::path dir, Mode mode,
                                     std::shared_ptr<HttpTransport> inner)
    : dir_(std::move(dir)), mode_(mode), inner_(std::move(inner)) {
  if (mode_ == Mode::Record) {
    if (!inner_) throw ConfigError("recording cassette needs a live transport");
    std::filesystem::create_directories(dir_);
  }
}

std::string CassetteTransport::request_digest(const std::string& path, const std::string& body) {
  return sha256_hex(path + "\n" + body);
}

HttpResult CassetteTransport::post(const std::string& path, const std::string& body) {
  const auto file = dir_ / (request_digest(path, body) + ".json");
  if (mode_ == Mode::Replay) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cassette miss for " + path + " (" + file.filename().string() + ")");
    std::ostringstream ss;
    ss << in.rdbuf();
    return {200, ss.str(), std::nullopt};
  }
  HttpResult result = inner_->post(path, body);
  if (result.status == 200) {
    std::lock_guard lock(mutex_);
    std::ofstream(file, std::ios::binary) << result.body;
    std::ofstream(dir_ / (request_digest(path, body) + ".request.json"), std::ios::binary) << body;
  }
  return result;
}

// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(std::shared_ptr<HttpTransport> transport, HttpBackendConfig config)
    : transport_(std::move(transport)),
      config_(std::move(config)),
      dimension_(config_.embedding_dimension) {
  if (!transport_) throw ConfigError("http backend needs a transport");
}

std::shared_ptr<HttpBackend> HttpBackend::from_environment(HttpBackendConfig config) {
  const char* base = std::getenv("RELATE_API_BASE");
  if (!base || !*base) throw ConfigError("RELATE_API_BASE is not set");
  const char* key = std::getenv("RELATE_API_KEY");
  return std::make_shared<HttpBackend>(
      std::make_shared<HttplibTransport>(base, key ? key : ""), std::move(config));
}

std::string HttpBackend::chat_request_body(const PromptSpec& spec, const std::string& model) const {
  Json body = Json::object();
  body["model"] = model;
  body["messages"] = Json::array({Json{{"role", "system"}, {"content", config_.system_prompt}},
                                  Json{{"role", "user"}, {"content", spec.render()}}});
  body["temperature"] = spec.temperature;
  if (spec.seed) body["seed"] = *spec.seed;
  return canonical_dump(body);
}

std::string HttpBackend::embedding_request_body(std::string_view text) const {
  Json body = Json::object();
  body["model"] = config_.embedding_model;
  body["input"] = std::string(text);
  return canonical_dump(body);
}

HttpResult HttpBackend::post_checked(const std::string& path, const std::string& body) {
  HttpResult result = transport_->post(path, body);
  if (result.status == 429) {
    std::chrono::milliseconds wait{1000};
    if (result.retry_after) {
      try {
        wait = std::chrono::milliseconds(static_cast<long long>(std::stod(*result.retry_after) * 1000));
      } catch (const std::exception&) {
      }
    }
    throw RateLimitError("rate limited on " + path, wait);
  }
  if (result.status >= 500 || result.status == 408) {
    throw TransportError("server error " + std::to_string(result.status) + " on " + path);
  }
  if (result.status != 200) {
    throw ConfigError("request to " + path + " rejected with status " +
                      std::to_string(result.status) + ": " + result.body.substr(0, 200));
  }
  return result;
}

Completion HttpBackend::complete(const PromptSpec& spec, const std::string& model) {
  auto result = post_checked("/chat/completions", chat_request_body(spec, model));
  Json reply;
  try {
    reply = Json::parse(result.body);
  } catch (const Json::parse_error& e) {
    throw TransportError(std::string("unparseable chat reply: ") + e.what());
  }
  const auto choices = reply.find("choices");
  if (choices == reply.end() || !choices->is_array() || choices->empty() ||
      !(*choices)[0].contains("message") || !(*choices)[0]["message"].contains("content") ||
      !(*choices)[0]["message"]["content"].is_string()) {
    throw TransportError("chat reply without choices[0].message.content");
  }
  Completion out;
  out.text = (*choices)[0]["message"]["content"].get<std::string>();
  if (reply.contains("usage") && reply["usage"].is_object()) {
    out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  return out;
}

std::vector<double> HttpBackend::embed(std::string_view text) {
  auto result = post_checked("/embeddings", embedding_request_body(text));
  Json reply;
  try {
    reply = Json::parse(result.body);
  } catch (const Json::parse_error& e) {
    throw TransportError(std::string("unparseable embedding reply: ") + e.what());
  }
  if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].empty() ||
      !reply["data"][0].contains("embedding") || !reply["data"][0]["embedding"].is_array()) {
    throw TransportError("embedding reply without data[0].embedding");
  }
  auto v = reply["data"][0]["embedding"].get<std::vector<double>>();
  std::lock_guard lock(dimension_mutex_);
  if (dimension_ == 0) dimension_ = v.size();
  if (v.size() != dimension_) {
    throw TransportError("embedding dimension " + std::to_string(v.size()) + " differs from " +
                         std::to_string(dimension_));
  }
  return v;
}

std::size_t HttpBackend::embedding_dimension() const {
  std::lock_guard lock(dimension_mutex_);
  return dimension_;
}

}  // namespace relate::llm
