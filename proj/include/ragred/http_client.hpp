#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ragred/error.hpp"

namespace ragred {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubles per attempt
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /v1/... (defaults to "/")
};

inline SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Bounded in-flight requests per endpoint origin.
class InflightLimiter {
public:
  static InflightLimiter& instance() {
    static InflightLimiter limiter;
    return limiter;
  }

  class Slot {
  public:
    Slot(InflightLimiter& limiter, const std::string& key, int limit)
        : limiter_(limiter), key_(key) {
      std::unique_lock<std::mutex> lock(limiter_.mu_);
      limiter_.cv_.wait(lock, [&] { return limiter_.active_[key_] < limit; });
      ++limiter_.active_[key_];
    }
    ~Slot() {
      {
        std::lock_guard<std::mutex> lock(limiter_.mu_);
        --limiter_.active_[key_];
      }
      limiter_.cv_.notify_one();
    }

  private:
    InflightLimiter& limiter_;
    std::string key_;
  };

private:
  friend class Slot;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, int> active_;
};

}  // namespace detail

// Reads the credential from the named environment variable. Credentials
// never travel through flags or config files.
inline std::optional<std::string> credential_from_env(const std::string& env_name) {
  if (env_name.empty()) return std::nullopt;
  const char* v = std::getenv(env_name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// POST a JSON body, retrying transport failures and 5xx/429 responses with
// exponential backoff. Returns the parsed JSON response.
inline nlohmann::json post_json_with_retry(const std::string& endpoint, const nlohmann::json& body,
                                           const std::string& credential_env,
                                           const RetryPolicy& retry, int max_in_flight = 4) {
  const auto url = detail::split_url(endpoint);
  std::string last_error;
  auto delay = retry.backoff;
  for (int attempt = 1; attempt <= std::max(retry.max_attempts, 1); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    detail::InflightLimiter::Slot slot(detail::InflightLimiter::instance(), url.origin,
                                       std::max(max_in_flight, 1));
    httplib::Client client(url.origin);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (auto cred = credential_from_env(credential_env)) {
      headers.emplace("Authorization", "Bearer " + *cred);
    }
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("provider returned status " + std::to_string(res->status) + " for " +
                          endpoint);
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw ProviderError("provider returned invalid JSON from " + endpoint);
    return parsed;
  }
  throw ProviderError("provider unreachable after " + std::to_string(retry.max_attempts) +
                      " attempts (" + endpoint + "): " + last_error);
}

}  // namespace ragred
