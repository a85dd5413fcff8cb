//
// Copyright 2026 The UnlearnLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "unlearnlab/clients.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "unlearnlab/errors.hpp"
#include "unlearnlab/hashing.hpp"

namespace unlearnlab::clients {

namespace {

namespace fs = std::filesystem;

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string path;    // /... (at least "/")
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string cache_file(const EndpointConfig& config,
                       const std::string& prompt) {
  return (fs::path(config.cache_dir) /
          (cache_key(config.base_url, prompt) + ".json"))
      .string();
}

void write_atomic(const std::string& path, const std::string& contents) {
  fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << contents;
  }
  fs::rename(tmp, path);
}

void log_exchange(const EndpointConfig& config, const std::string& prompt,
                  const std::string& completion, int status) {
  if (!config.verbose) return;
  fs::create_directories(config.log_dir);
  std::ofstream log(fs::path(config.log_dir) / "llm.log", std::ios::app);
  nlohmann::json j;
  j["url"] = config.base_url;
  j["status"] = status;
  j["prompt"] = prompt;
  j["completion"] = completion;
  j["api_key"] = "<redacted>";
  log << j.dump() << '\n';
}

httplib::Client make_http_client(const EndpointConfig& config,
                                 const ParsedUrl& url) {
  httplib::Client cli(url.origin);
  const auto timeout = std::chrono::microseconds(
      static_cast<int64_t>(config.timeout_s * 1e6));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  if (const char* key = std::getenv(config.api_key_env.c_str());
      key != nullptr && *key != '\0') {
    cli.set_default_headers(
        {{"Authorization", std::string("Bearer ") + key}});
  }
  return cli;
}

}  // namespace

void EndpointConfig::validate() const {
  if (timeout_s <= 0.0) throw ConfigError("endpoint timeout must be > 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (concurrency_limit < 1) {
    throw ConfigError("concurrency_limit must be >= 1");
  }
}

EndpointConfig EndpointConfig::from_env() {
  EndpointConfig config;
  if (const char* url = std::getenv("LLM_ENDPOINT"); url != nullptr) {
    config.base_url = url;
  }
  return config;
}

std::string cache_key(const std::string& base_url,
                      const std::string& prompt) {
  return hashing::sha256_hex(base_url + "\n" + prompt);
}

std::string post_completion(const EndpointConfig& config,
                            const std::string& prompt) {
  config.validate();

  const std::string cached_path = cache_file(config, prompt);
  if (fs::exists(cached_path)) {
    std::ifstream in(cached_path, std::ios::binary);
    std::string body((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return nlohmann::json::parse(body).at("completion").get<std::string>();
  }
  if (config.offline) {
    throw EndpointError("offline mode: no cached completion for prompt");
  }

  const ParsedUrl url = parse_url(config.base_url);
  nlohmann::json request;
  request["prompt"] = prompt;
  const std::string body = request.dump();

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      const int wait_ms = config.backoff_base_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    }
    auto cli = make_http_client(config, url);
    auto res = cli.Post(url.path, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw ClientError("endpoint rejected request with status " +
                        std::to_string(res->status));
    }
    const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("completion")) {
      throw EndpointError("malformed endpoint response body");
    }
    const std::string completion = parsed.at("completion").get<std::string>();

    nlohmann::json record;
    record["url"] = config.base_url;
    record["prompt"] = prompt;
    record["completion"] = completion;
    write_atomic(cached_path, record.dump());
    log_exchange(config, prompt, completion, res->status);
    return completion;
  }
  throw EndpointError(
      "endpoint unreachable after " +
          std::to_string(config.max_retries + 1) + " attempts: " + last_error,
      config.max_retries + 1);
}

bool health_check(const EndpointConfig& config) {
  try {
    config.validate();
    const ParsedUrl url = parse_url(config.base_url);
    auto cli = make_http_client(config, url);
    auto res = cli.Get(url.path);
    return res && res->status >= 200 && res->status < 300;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace unlearnlab::clients
