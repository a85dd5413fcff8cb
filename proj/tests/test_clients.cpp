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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "unlearnlab/clients.hpp"
#include "unlearnlab/errors.hpp"

using namespace unlearnlab;

namespace {

namespace fs = std::filesystem;

/// In-process completion stub with scriptable status codes.
class StubServer {
 public:
  explicit StubServer(std::vector<int> status_plan = {200})
      : status_plan_(std::move(status_plan)) {
    server_.Post("/v1/complete", [this](const httplib::Request& req,
                                        httplib::Response& res) {
      const size_t n = hits_.fetch_add(1);
      last_body_ = req.body;
      const int status =
          status_plan_[std::min(n, status_plan_.size() - 1)];
      res.status = status;
      if (status == 200) {
        nlohmann::json reply;
        reply["completion"] = "ok";
        res.set_content(reply.dump(), "application/json");
      }
    });
    server_.Get("/v1/complete", [this](const httplib::Request&,
                                       httplib::Response& res) {
      if (slow_ms_ > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(slow_ms_));
      }
      res.set_content("up", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete";
  }
  size_t hits() const { return hits_.load(); }
  const std::string& last_body() const { return last_body_; }
  void set_slow(int ms) { slow_ms_ = ms; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::vector<int> status_plan_;
  std::atomic<size_t> hits_{0};
  std::string last_body_;
  int slow_ms_ = 0;
};

clients::EndpointConfig test_config(const std::string& url,
                                    const std::string& cache_tag) {
  clients::EndpointConfig config;
  config.base_url = url;
  config.cache_dir = "/tmp/unlearnlab_client_cache_" + cache_tag;
  config.backoff_base_ms = 1;
  config.timeout_s = 2.0;
  fs::remove_all(config.cache_dir);
  return config;
}

}  // namespace

TEST_CASE("post_completion returns the stub reply and caches it") {
  StubServer stub;
  auto config = test_config(stub.url(), "basic");
  CHECK(clients::post_completion(config, "hello") == "ok");
  CHECK(stub.hits() == 1);
  CHECK(stub.last_body().find("hello") != std::string::npos);

  // second call is served from cache: no new request
  CHECK(clients::post_completion(config, "hello") == "ok");
  CHECK(stub.hits() == 1);
  fs::remove_all(config.cache_dir);
}

TEST_CASE("a warm cache needs no reachable endpoint") {
  std::string cached_url;
  {
    StubServer stub;
    auto config = test_config(stub.url(), "warm");
    CHECK(clients::post_completion(config, "offline ready") == "ok");
    cached_url = stub.url();
  }
  // stub is gone; the cached completion still answers
  clients::EndpointConfig config;
  config.base_url = cached_url;
  config.cache_dir = "/tmp/unlearnlab_client_cache_warm";
  config.backoff_base_ms = 1;
  CHECK(clients::post_completion(config, "offline ready") == "ok");
  fs::remove_all(config.cache_dir);
}

TEST_CASE("transient 5xx responses are retried until success") {
  StubServer stub({500, 500, 200});
  auto config = test_config(stub.url(), "retry");
  config.max_retries = 3;
  CHECK(clients::post_completion(config, "please retry") == "ok");
  CHECK(stub.hits() == 3);
  fs::remove_all(config.cache_dir);
}

TEST_CASE("exhausted retries raise EndpointError with the attempt count") {
  StubServer stub({500});
  auto config = test_config(stub.url(), "exhaust");
  config.max_retries = 2;
  try {
    clients::post_completion(config, "never works");
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.attempts() == 3);
  }
  CHECK(stub.hits() == 3);
  fs::remove_all(config.cache_dir);
}

TEST_CASE("4xx responses fail immediately without retry") {
  StubServer stub({404});
  auto config = test_config(stub.url(), "clienterr");
  config.max_retries = 3;
  CHECK_THROWS_AS(clients::post_completion(config, "bad request"),
                  ClientError);
  CHECK(stub.hits() == 1);
  fs::remove_all(config.cache_dir);
}

TEST_CASE("offline mode errors on cache misses") {
  auto config = test_config("http://127.0.0.1:1/v1/complete", "offline");
  config.offline = true;
  CHECK_THROWS_AS(clients::post_completion(config, "not cached"),
                  EndpointError);
  fs::remove_all(config.cache_dir);
}

TEST_CASE("cache keys depend on both url and prompt") {
  CHECK(clients::cache_key("http://a/x", "p") ==
        clients::cache_key("http://a/x", "p"));
  CHECK(clients::cache_key("http://a/x", "p") !=
        clients::cache_key("http://a/x", "q"));
  CHECK(clients::cache_key("http://a/x", "p") !=
        clients::cache_key("http://b/x", "p"));
}

TEST_CASE("health_check distinguishes live, dead, and slow endpoints") {
  StubServer stub;
  auto config = test_config(stub.url(), "health");
  CHECK(clients::health_check(config));

  auto dead = test_config("http://127.0.0.1:1/v1/complete", "dead");
  dead.timeout_s = 0.2;
  CHECK_FALSE(clients::health_check(dead));

  stub.set_slow(500);
  auto slow = test_config(stub.url(), "slow");
  slow.timeout_s = 0.001;
  CHECK_FALSE(clients::health_check(slow));
  fs::remove_all(config.cache_dir);
}

TEST_CASE("config validation") {
  clients::EndpointConfig config;
  config.base_url = "http://x/y";
  config.timeout_s = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.timeout_s = 1.0;
  config.max_retries = -1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  CHECK_THROWS_AS(clients::post_completion(
                      clients::EndpointConfig{.base_url = "no-scheme"}, "p"),
                  ConfigError);
}
