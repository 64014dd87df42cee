#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "seal/remote.hpp"

namespace seal {

/// Chat-completions client for OpenAI-compatible servers. The credential is taken from the
/// environment variable named in the config at construction time and is only held in memory.
class HttpCompletion : public TextCompletion {
 public:
  explicit HttpCompletion(RemoteConfig config) : config_(std::move(config)), limiter_(config_.requests_per_second) {
    if (const char* key = std::getenv(config_.credential_env.c_str()); key && *key) {
      token_ = key;
    } else {
      throw BackendError("environment variable " + config_.credential_env + " is not set");
    }
    const auto scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: " + config_.endpoint);
    const auto path_start = config_.endpoint.find('/', scheme_end + 3);
    base_ = config_.endpoint.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : config_.endpoint.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config_.endpoint.rfind("https://", 0) == 0) throw ConfigError("built without TLS support; use an http:// endpoint");
#endif
  }

  std::string complete(const std::string& prompt) override {
    limiter_.acquire();
    httplib::Client cli(base_);
    cli.set_connection_timeout(config_.timeout_seconds);
    cli.set_read_timeout(config_.timeout_seconds);
    cli.set_bearer_token_auth(token_);
    const nlohmann::json body = {{"model", config_.model},
                                 {"temperature", 0},
                                 {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(prefix_ + "/v1/chat/completions", body.dump(), "application/json");
    if (!res) throw BackendError("request to " + base_ + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw BackendError("endpoint returned HTTP " + std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected completion payload: ") + e.what());
    }
  }

 private:
  RemoteConfig config_;
  RateLimiter limiter_;
  std::string token_;
  std::string base_;
  std::string prefix_;
};

}  // namespace seal
