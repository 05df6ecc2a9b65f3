#pragma once

// HTTP clients for remote scorer and policy backends.
//
// Scorer:  POST {base}/v1/evaluate  {"queries": [MaskedQuery...]}
//          -> {"results": [{"MATH": {"p_pos", "p_neg"}, ...}, ...]}
// Policy:  POST {base}/v1/propose   {question, steps_so_far, n, stop, seed}
//          -> {"candidates": [...]}
//
// Transient failures (connection errors, timeouts, 429, 5xx) are retried with
// exponential backoff; other 4xx responses are never retried. A 409 is the
// backend rejecting our template hash and surfaces as ProtocolError.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "hprm/core.hpp"
#include "hprm/scorer.hpp"
#include "hprm/search.hpp"

namespace hprm::remote {

struct HttpLimits {
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{200};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds backoff_max{5000};
  std::size_t batch_size = 16;
};

struct HttpAuth {
  std::optional<std::string> bearer_token;

  /// Token read from the named environment variable; empty name means none.
  /// Throws ValidationError when the variable is named but unset.
  static HttpAuth from_env(const std::string& var);
};

struct ChannelTelemetry {
  std::size_t requests = 0;  // logical requests
  std::size_t attempts = 0;  // HTTP round trips
  std::size_t retries = 0;
  std::size_t failures = 0;
};

class HttpChannel {
 public:
  /// `url` is http://host[:port][/path]; without a path, default_path is used.
  HttpChannel(const std::string& url, const std::string& default_path, HttpAuth auth, HttpLimits limits);
  ~HttpChannel();

  json post(const json& body);
  ChannelTelemetry telemetry() const;
  const HttpLimits& limits() const { return limits_; }
  std::string endpoint() const { return host_ + path_; }

 private:
  std::string host_;
  std::string path_;
  HttpAuth auth_;
  HttpLimits limits_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> attempts_{0};
  std::atomic<std::size_t> retries_{0};
  std::atomic<std::size_t> failures_{0};
};

class RemoteScorerBackend : public scorer::ScorerBackend {
 public:
  RemoteScorerBackend(const std::string& url, HttpAuth auth = {}, HttpLimits limits = {});

  scorer::MaskDistribution evaluate(const scorer::MaskedQuery& query) override;
  std::vector<scorer::MaskDistribution> evaluate_batch(std::span<const scorer::MaskedQuery> queries) override;
  scorer::BackendCapabilities capabilities() const override;
  std::string id() const override { return "remote:" + channel_.endpoint(); }

  ChannelTelemetry telemetry() const { return channel_.telemetry(); }

 private:
  HttpChannel channel_;
};

class RemotePolicyBackend : public search::PolicyBackend {
 public:
  RemotePolicyBackend(const std::string& url, HttpAuth auth = {}, HttpLimits limits = {});

  std::vector<std::string> propose(const search::ProposeRequest& request) override;
  std::string id() const override { return "remote:" + channel_.endpoint(); }

  ChannelTelemetry telemetry() const { return channel_.telemetry(); }

 private:
  HttpChannel channel_;
};

json to_json(const search::ProposeRequest& r);
search::ProposeRequest propose_request_from_json(const json& j);

}  // namespace hprm::remote
