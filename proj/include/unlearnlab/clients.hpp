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

#pragma once

#include <string>

namespace unlearnlab::clients {

/// Connection settings for the completion endpoints (rewriter, judge).
/// The protocol is a single POST of {"prompt": ...} answered by
/// {"completion": ...}.
struct EndpointConfig {
  std::string base_url;  // full URL including path
  std::string api_key_env = "LLM_API_KEY";
  double timeout_s = 10.0;
  int max_retries = 2;
  int concurrency_limit = 4;
  std::string cache_dir = "cache/llm";
  bool offline = false;       // serve from cache only; miss is an error
  int backoff_base_ms = 1000; // doubles per retry
  bool verbose = false;
  std::string log_dir = "logs";

  void validate() const;

  /// Reads base_url from LLM_ENDPOINT when unset.
  static EndpointConfig from_env();
};

/// Cache key for a (url, prompt) pair: identical pairs always map to the
/// same key.
std::string cache_key(const std::string& base_url, const std::string& prompt);

/// Returns the cached completion for the prompt when present; otherwise
/// POSTs it, retrying 5xx and transport failures with exponential
/// backoff, and caches the result atomically. Throws ClientError on 4xx
/// and EndpointError when retries are exhausted or offline mode misses.
std::string post_completion(const EndpointConfig& config,
                            const std::string& prompt);

/// True iff a trivial GET round-trip succeeds within the timeout.
bool health_check(const EndpointConfig& config);

}  // namespace unlearnlab::clients
