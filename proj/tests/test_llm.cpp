#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "secreq/errors.hpp"
#include "secreq/llm.hpp"

using namespace secreq;

namespace {

ChatRequest make_request(const std::string& content,
                         const std::string& model = "m1") {
  ChatRequest request;
  request.model_id = model;
  request.messages.push_back({"user", content});
  return request;
}

}  // namespace

TEST_CASE("request fingerprint is stable and content-sensitive") {
  auto a = make_request("hello");
  CHECK(request_fingerprint(a) == request_fingerprint(a));
  CHECK(request_fingerprint(a) != request_fingerprint(make_request("hella")));
  CHECK(request_fingerprint(a) !=
        request_fingerprint(make_request("hello", "m2")));
  // role is part of the identity
  ChatRequest b = a;
  b.messages[0].role = "system";
  b.messages.push_back({"user", "x"});
  CHECK(request_fingerprint(a) != request_fingerprint(b));
}

TEST_CASE("scripted mock replays and reports misses") {
  ScriptedMockChat mock;
  auto request = make_request("what is tls");
  mock.add(request, "a transport security protocol");
  CHECK(mock.chat(request).content == "a transport security protocol");
  CHECK_THROWS_AS(mock.chat(make_request("something else")),
                  ScriptedMissError);
}

TEST_CASE("echo mock returns the last user message") {
  EchoMockChat echo;
  ChatRequest request;
  request.model_id = "m";
  request.messages.push_back({"system", "be brief"});
  request.messages.push_back({"user", "first"});
  request.messages.push_back({"user", "second"});
  CHECK(echo.chat(request).content == "second");
}

TEST_CASE("requests are validated before dispatch") {
  EchoMockChat echo;
  ChatRequest no_user;
  no_user.model_id = "m";
  no_user.messages.push_back({"system", "hi"});
  CHECK_THROWS_AS(echo.chat(no_user), ValidationError);
  ChatRequest empty_content = make_request("");
  CHECK_THROWS_AS(echo.chat(empty_content), ValidationError);
}

TEST_CASE("synthetic mock is deterministic and honors list requests") {
  SyntheticMockChat mock;
  auto request = make_request(
      "write 4 distinct functional requirements as a numbered list about "
      "verifying session management");
  auto first = mock.chat(request).content;
  CHECK(first == mock.chat(request).content);
  // four numbered lines
  int lines = 0;
  std::size_t pos = 0;
  while ((pos = first.find('\n', pos)) != std::string::npos) {
    ++lines;
    ++pos;
  }
  CHECK(lines == 4);
  CHECK(first.rfind("1. ", 0) == 0);
}

TEST_CASE("synthetic mock gates every Nth fingerprint with the sentinel") {
  SyntheticMockChat::Options options;
  options.gate_modulus = 1;  // everything gates
  SyntheticMockChat always(options);
  CHECK(always.chat(make_request("is this relevant")).content ==
        "NOT_APPLICABLE");

  options.gate_modulus = 0;  // gating disabled
  SyntheticMockChat never(options);
  CHECK(never.chat(make_request("is this relevant")).content !=
        "NOT_APPLICABLE");
}

TEST_CASE("retry wrapper retries transient failures with backoff") {
  EchoMockChat inner;
  FlakyChat flaky(inner, 2);
  RetryPolicy retry;
  std::vector<int> sleeps;
  auto response = chat_with_retry(flaky, make_request("ping"), retry,
                                  [&](int ms) { sleeps.push_back(ms); });
  CHECK(response.content == "ping");
  CHECK(flaky.attempts() == 3);
  CHECK(sleeps == std::vector<int>{200, 400});
}

TEST_CASE("retry wrapper gives up after max attempts") {
  EchoMockChat inner;
  FlakyChat flaky(inner, 10);
  RetryPolicy retry;
  retry.max_attempts = 3;
  try {
    chat_with_retry(flaky, make_request("ping"), retry, [](int) {});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 3);
  }
  CHECK(flaky.attempts() == 3);
}

TEST_CASE("uniform unigram scorer charges -ln(V) per token") {
  UnigramScorer scorer(4);
  auto lps = scorer.token_logprobs("alpha beta gamma");
  REQUIRE(lps.size() == 3);
  for (const auto& [token, lp] : lps)
    CHECK(lp == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(scorer.token_logprobs(""), ValidationError);
  CHECK_THROWS_AS(UnigramScorer(std::size_t{0}), ConfigError);
}

TEST_CASE("table scorer scores known tokens and penalizes unknowns") {
  UnigramScorer scorer(std::map<std::string, double>{{"session", 0.5},
                                                     {"token", 0.25}});
  auto lps = scorer.token_logprobs("session token mystery");
  REQUIRE(lps.size() == 3);
  CHECK(lps[0].second == doctest::Approx(std::log(0.5)));
  CHECK(lps[1].second == doctest::Approx(std::log(0.25)));
  CHECK(lps[2].second < std::log(0.25));  // below the rarest known token
  CHECK_THROWS_AS(UnigramScorer(std::map<std::string, double>{}), ConfigError);
  CHECK_THROWS_AS(UnigramScorer(std::map<std::string, double>{{"x", 1.5}}),
                  ConfigError);
}
