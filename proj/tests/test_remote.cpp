#include <doctest.h>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "hprm/errors.hpp"
#include "hprm/mock_backend.hpp"
#include "hprm/remote.hpp"

using namespace hprm;
using namespace hprm::scorer;
using namespace std::chrono_literals;

namespace {

class TestServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit TestServer(Handler evaluate, Handler propose = {}) {
    server_.Post("/v1/evaluate", [this, evaluate](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int seen = max_in_flight_.load();
      while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
      }
      ++hits;
      evaluate(req, res);
      --in_flight_;
    });
    if (propose) server_.Post("/v1/propose", propose);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int max_in_flight() const { return max_in_flight_; }

  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

// Answers every query like the local mock oracle would.
void mock_handler(const httplib::Request& req, httplib::Response& res) {
  static MockOracleBackend mock;
  const json body = json::parse(req.body);
  json results = json::array();
  for (const auto& q : body.at("queries")) results.push_back(to_json(mock.evaluate(masked_query_from_json(q))));
  res.set_content(json{{"results", results}}.dump(), "application/json");
}

remote::HttpLimits fast_limits() {
  remote::HttpLimits l;
  l.backoff_initial = 1ms;
  l.backoff_max = 4ms;
  l.timeout = 2000ms;
  return l;
}

const std::vector<std::string> kNone;

}  // namespace

TEST_CASE("healthy server round-trips distributions") {
  TestServer server(mock_handler);
  remote::RemoteScorerBackend backend(server.url(), {}, fast_limits());
  MockOracleBackend local;
  const ReasoningTrace tr{"Q", {"a", "b [ERRMATH]", "c [SUBOPT]"}, std::nullopt, ""};
  CHECK(score_trace(backend, tr) == score_trace(local, tr));
  const auto d = backend.evaluate(build_pass1_query("Q", kNone, "a"));
  for (const auto& [slot, p] : d.slots) CHECK(p.p_pos + p.p_neg == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(backend.telemetry().retries == 0);
  CHECK(backend.id() == "remote:" + server.url() + "/v1/evaluate");
}

TEST_CASE("transient 503s are retried and counted") {
  std::atomic<int> failures{3};
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (failures-- > 0) {
      res.status = 503;
      return;
    }
    mock_handler(req, res);
  });
  remote::RemoteScorerBackend backend(server.url(), {}, fast_limits());
  CHECK(score_step(backend, "Q", kNone, "a").reward == doctest::Approx(0.95));
  const auto t = backend.telemetry();
  CHECK(t.retries == 3);
  CHECK(t.attempts == 5);
  CHECK(t.failures == 0);
}

TEST_CASE("retries exhausted surface as transport errors") {
  TestServer server([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  auto limits = fast_limits();
  limits.max_retries = 2;
  remote::RemoteScorerBackend backend(server.url(), {}, limits);
  try {
    backend.evaluate(build_pass1_query("Q", kNone, "a"));
    FAIL("expected transport error");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportKind::HttpStatus);
    CHECK(e.attempts() == 3);
    CHECK(e.http_status() == 429);
  }
  CHECK(server.hits == 3);
}

TEST_CASE("p_pos outside [0,1] is a protocol error") {
  TestServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"results":[{"MATH":{"p_pos":1.2,"p_neg":-0.2},"CONSISTENCY":{"p_pos":0.5,"p_neg":0.5}}]})",
                    "application/json");
  });
  remote::RemoteScorerBackend backend(server.url(), {}, fast_limits());
  CHECK_THROWS_AS(backend.evaluate(build_pass1_query("Q", kNone, "a")), ProtocolError);
  CHECK(server.hits == 1);
}

TEST_CASE("4xx is never retried; 409 is a template mismatch") {
  TestServer bad([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  remote::RemoteScorerBackend b1(bad.url(), {}, fast_limits());
  try {
    b1.evaluate(build_pass1_query("Q", kNone, "a"));
    FAIL("expected transport error");
  } catch (const TransportError& e) {
    CHECK(e.http_status() == 400);
    CHECK(e.attempts() == 1);
  }
  CHECK(bad.hits == 1);

  TestServer conflict([](const httplib::Request&, httplib::Response& res) { res.status = 409; });
  remote::RemoteScorerBackend b2(conflict.url(), {}, fast_limits());
  CHECK_THROWS_AS(b2.evaluate(build_pass1_query("Q", kNone, "a")), ProtocolError);
  CHECK(conflict.hits == 1);
}

TEST_CASE("timeouts and refused connections are distinguishable") {
  TestServer slow([](const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(600ms);
    mock_handler(req, res);
  });
  auto limits = fast_limits();
  limits.timeout = 150ms;
  limits.max_retries = 0;
  remote::RemoteScorerBackend b1(slow.url(), {}, limits);
  try {
    b1.evaluate(build_pass1_query("Q", kNone, "a"));
    FAIL("expected timeout");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportKind::Timeout);
  }

  // Peer that drops every connection without answering.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 8) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::thread dropper([fd] {
    for (int i = 0; i < 2; ++i) {
      const int c = ::accept(fd, nullptr, nullptr);
      if (c >= 0) ::close(c);
    }
  });
  limits.timeout = 2000ms;
  limits.max_retries = 1;
  remote::RemoteScorerBackend b2("http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port)), {}, limits);
  try {
    b2.evaluate(build_pass1_query("Q", kNone, "a"));
    FAIL("expected connection error");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportKind::Connection);
    CHECK(e.attempts() == 2);
  }
  dropper.join();
  ::close(fd);
}

TEST_CASE("malformed envelopes are protocol errors") {
  TestServer wrong_count([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"results":[]})", "application/json");
  });
  remote::RemoteScorerBackend b1(wrong_count.url(), {}, fast_limits());
  CHECK_THROWS_AS(b1.evaluate(build_pass1_query("Q", kNone, "a")), ProtocolError);

  TestServer not_json([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
  remote::RemoteScorerBackend b2(not_json.url(), {}, fast_limits());
  CHECK_THROWS_AS(b2.evaluate(build_pass1_query("Q", kNone, "a")), ProtocolError);
}

TEST_CASE("batches split by batch size and concurrency is capped") {
  TestServer server([](const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(20ms);
    mock_handler(req, res);
  });
  auto limits = fast_limits();
  limits.batch_size = 2;
  limits.max_in_flight = 2;
  remote::RemoteScorerBackend backend(server.url(), {}, limits);
  std::vector<MaskedQuery> qs;
  for (int i = 0; i < 5; ++i) qs.push_back(build_pass1_query("Q", kNone, "s" + std::to_string(i)));
  CHECK(backend.evaluate_batch(qs).size() == 5);
  CHECK(server.hits == 3);

  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&backend, i] { backend.evaluate(build_pass1_query("Q", kNone, "t" + std::to_string(i))); });
  for (auto& t : threads) t.join();
  CHECK(server.max_in_flight() <= 2);
  CHECK(server.max_in_flight() >= 1);
}

TEST_CASE("bearer token comes from the named environment variable") {
  std::string seen;
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = req.get_header_value("Authorization");
    mock_handler(req, res);
  });
  ::setenv("HPRM_TEST_TOKEN", "s3cret", 1);
  remote::RemoteScorerBackend backend(server.url(), remote::HttpAuth::from_env("HPRM_TEST_TOKEN"), fast_limits());
  backend.evaluate(build_pass1_query("Q", kNone, "a"));
  CHECK(seen == "Bearer s3cret");
  ::unsetenv("HPRM_TEST_TOKEN");
  CHECK_THROWS_AS(remote::HttpAuth::from_env("HPRM_TEST_TOKEN"), ValidationError);
  CHECK_FALSE(remote::HttpAuth::from_env("").bearer_token);
}

TEST_CASE("endpoint validation") {
  CHECK_THROWS_AS(remote::RemoteScorerBackend("https://example.com"), ValidationError);
  CHECK_THROWS_AS(remote::RemoteScorerBackend("http://"), ValidationError);
  remote::HttpLimits l;
  l.max_in_flight = 0;
  CHECK_THROWS_AS(remote::RemoteScorerBackend("http://127.0.0.1:1", {}, l), ValidationError);
}

TEST_CASE("policy client speaks the propose protocol") {
  json last;
  TestServer server(mock_handler, [&](const httplib::Request& req, httplib::Response& res) {
    last = json::parse(req.body);
    json c = json::array();
    for (std::size_t i = 0; i < last.at("n").get<std::size_t>(); ++i) c.push_back("cand " + std::to_string(i));
    res.set_content(json{{"candidates", c}}.dump(), "application/json");
  });
  remote::RemotePolicyBackend policy(server.url(), {}, fast_limits());
  const search::ProposeRequest req{"Q", {"s1"}, 3, "\\boxed{", 42};
  const auto c = policy.propose(req);
  CHECK(c == std::vector<std::string>{"cand 0", "cand 1", "cand 2"});
  CHECK(last.at("question") == "Q");
  CHECK(last.at("steps_so_far") == json::array({"s1"}));
  CHECK(last.at("stop") == "\\boxed{");
  CHECK(last.at("seed") == 42);
  const auto back = remote::propose_request_from_json(last);
  CHECK(back.n == 3);
  CHECK(back.seed == 42);
}
