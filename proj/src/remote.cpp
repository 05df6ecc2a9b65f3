#include "hprm/remote.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "hprm/errors.hpp"

namespace hprm::remote {

HttpAuth HttpAuth::from_env(const std::string& var) {
  HttpAuth a;
  if (var.empty()) return a;
  const char* value = std::getenv(var.c_str());
  if (value == nullptr || *value == '\0') throw ValidationError("auth environment variable " + var + " is not set");
  a.bearer_token = value;
  return a;
}

HttpChannel::HttpChannel(const std::string& url, const std::string& default_path, HttpAuth auth, HttpLimits limits)
    : auth_(std::move(auth)), limits_(limits) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) throw ValidationError("backend URL must start with http://, got \"" + url + "\"");
  const auto slash = url.find('/', kScheme.size());
  host_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "" : url.substr(slash);
  if (path_.empty() || path_ == "/") path_ = default_path;
  if (host_.size() == kScheme.size()) throw ValidationError("backend URL has no host: \"" + url + "\"");
  if (limits_.max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
  if (limits_.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(limits_.max_in_flight));
}

HttpChannel::~HttpChannel() = default;

ChannelTelemetry HttpChannel::telemetry() const { return {requests_, attempts_, retries_, failures_}; }

json HttpChannel::post(const json& body) {
  ++requests_;
  slots_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*slots_};

  const std::string payload = body.dump();
  httplib::Headers headers;
  if (auth_.bearer_token) headers.emplace("Authorization", "Bearer " + *auth_.bearer_token);

  auto backoff = limits_.backoff_initial;
  TransportKind last_kind = TransportKind::Connection;
  std::string last_message;
  int last_status = 0;
  const int attempts_allowed = limits_.max_retries + 1;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    ++attempts_;
    httplib::Client client(host_);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(limits_.timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(limits_.timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, payload, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - started;

    if (!res) {
      const auto err = res.error();
      // httplib reports an expired read as a generic read failure.
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= limits_.timeout * 9 / 10);
      last_kind = timed_out ? TransportKind::Timeout : TransportKind::Connection;
      last_message = httplib::to_string(err);
      last_status = 0;
    } else if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        ++failures_;
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
      }
    } else if (res->status == 409) {
      ++failures_;
      throw ProtocolError("backend rejected request (template mismatch?): " + res->body);
    } else if (res->status == 429 || res->status >= 500) {
      last_kind = TransportKind::HttpStatus;
      last_status = res->status;
      last_message = "HTTP " + std::to_string(res->status);
    } else {
      ++failures_;
      throw TransportError(TransportKind::HttpStatus, "HTTP " + std::to_string(res->status) + ": " + res->body,
                           attempt, res->status);
    }

    if (attempt < attempts_allowed) {
      ++retries_;
      std::this_thread::sleep_for(backoff);
      const auto next = std::chrono::duration<double, std::milli>(backoff) * limits_.backoff_multiplier;
      backoff = std::min(std::chrono::duration_cast<std::chrono::milliseconds>(next), limits_.backoff_max);
    }
  }
  ++failures_;
  throw TransportError(last_kind,
                       host_ + path_ + ": " + last_message + " after " + std::to_string(attempts_allowed) + " attempts",
                       attempts_allowed, last_status);
}

RemoteScorerBackend::RemoteScorerBackend(const std::string& url, HttpAuth auth, HttpLimits limits)
    : channel_(url, "/v1/evaluate", std::move(auth), limits) {}

scorer::MaskDistribution RemoteScorerBackend::evaluate(const scorer::MaskedQuery& query) {
  return evaluate_batch(std::span<const scorer::MaskedQuery>(&query, 1)).front();
}

std::vector<scorer::MaskDistribution> RemoteScorerBackend::evaluate_batch(
    std::span<const scorer::MaskedQuery> queries) {
  std::vector<scorer::MaskDistribution> out;
  out.reserve(queries.size());
  const std::size_t chunk = std::max<std::size_t>(1, channel_.limits().batch_size);
  for (std::size_t begin = 0; begin < queries.size(); begin += chunk) {
    const auto part = queries.subspan(begin, std::min(chunk, queries.size() - begin));
    json envelope{{"queries", json::array()}};
    for (const auto& q : part) {
      q.validate();
      envelope["queries"].push_back(scorer::to_json(q));
    }
    const json response = channel_.post(envelope);
    if (!response.is_object() || !response.contains("results") || !response.at("results").is_array())
      throw ProtocolError("scorer response lacks a results array");
    const auto& results = response.at("results");
    if (results.size() != part.size())
      throw ProtocolError("scorer returned " + std::to_string(results.size()) + " results for " +
                          std::to_string(part.size()) + " queries");
    for (std::size_t i = 0; i < part.size(); ++i) {
      auto d = scorer::mask_distribution_from_json(results[i]);
      d.check_against(part[i]);
      out.push_back(std::move(d));
    }
  }
  return out;
}

scorer::BackendCapabilities RemoteScorerBackend::capabilities() const {
  return {channel_.limits().max_in_flight, channel_.limits().batch_size};
}

RemotePolicyBackend::RemotePolicyBackend(const std::string& url, HttpAuth auth, HttpLimits limits)
    : channel_(url, "/v1/propose", std::move(auth), limits) {}

std::vector<std::string> RemotePolicyBackend::propose(const search::ProposeRequest& request) {
  const json response = channel_.post(to_json(request));
  if (!response.is_object() || !response.contains("candidates") || !response.at("candidates").is_array())
    throw ProtocolError("policy response lacks a candidates array");
  std::vector<std::string> out;
  for (const auto& c : response.at("candidates")) {
    if (!c.is_string()) throw ProtocolError("policy candidates must be strings");
    out.push_back(c.get<std::string>());
  }
  return out;
}

json to_json(const search::ProposeRequest& r) {
  return {{"question", r.question}, {"steps_so_far", r.steps_so_far}, {"n", r.n}, {"stop", r.stop}, {"seed", r.seed}};
}

search::ProposeRequest propose_request_from_json(const json& j) {
  try {
    search::ProposeRequest r;
    r.question = j.at("question").get<std::string>();
    r.steps_so_far = j.at("steps_so_far").get<std::vector<std::string>>();
    r.n = j.at("n").get<std::size_t>();
    r.stop = j.value("stop", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed propose request: ") + e.what());
  }
}

}  // namespace hprm::remote
