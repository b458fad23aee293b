#include "secreq/llm.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "secreq/errors.hpp"
#include "secreq/text.hpp"

namespace secreq {

using nlohmann::json;

std::uint64_t request_fingerprint(const ChatRequest& request) {
  std::string blob = request.model_id;
  for (const auto& msg : request.messages) {
    blob += '\x1f';
    blob += msg.role;
    blob += '\x1e';
    blob += msg.content;
  }
  return fnv1a64(blob);
}

namespace {

void validate_request(const ChatRequest& request) {
  bool has_user = false;
  for (const auto& msg : request.messages) {
    if (msg.content.empty())
      throw ValidationError("chat request: empty message content");
    if (msg.role == "user") has_user = true;
  }
  if (!has_user)
    throw ValidationError("chat request: at least one user message required");
}

}  // namespace

// ---- HTTP client ----

HttpChatClient::HttpChatClient(std::string endpoint, std::string credential,
                               RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      credential_(std::move(credential)),
      retry_(retry) {}

ChatResponse HttpChatClient::chat(const ChatRequest& request) {
  validate_request(request);

  json body;
  body["model"] = request.model_id;
  body["messages"] = json::array();
  for (const auto& msg : request.messages)
    body["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;

  auto scheme_end = endpoint_.find("://");
  auto path_start = scheme_end == std::string::npos
                        ? endpoint_.find('/')
                        : endpoint_.find('/', scheme_end + 3);
  std::string host = path_start == std::string::npos
                         ? endpoint_
                         : endpoint_.substr(0, path_start);
  std::string path = path_start == std::string::npos
                         ? "/v1/chat/completions"
                         : endpoint_.substr(path_start);

  auto attempt = [&]() -> ChatResponse {
    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!credential_.empty())
      headers.emplace("Authorization", "Bearer " + credential_);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res)
      throw TransportError("chat transport failure: " +
                               httplib::to_string(res.error()),
                           /*retryable=*/true);
    if (res->status == 401 || res->status == 403)
      throw TransportError("chat authentication failed (HTTP " +
                               std::to_string(res->status) + ")",
                           /*retryable=*/false);
    if (res->status == 429 || res->status >= 500)
      throw TransportError("chat HTTP " + std::to_string(res->status),
                           /*retryable=*/true);
    if (res->status != 200)
      throw TransportError("chat HTTP " + std::to_string(res->status),
                           /*retryable=*/false);
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what(),
                           /*retryable=*/false);
    }
    if (!doc.contains("choices") || doc["choices"].empty())
      throw TransportError("malformed chat response: no choices",
                           /*retryable=*/false);
    const json& choice = doc["choices"][0];
    ChatResponse response;
    response.content = choice.at("message").at("content").get<std::string>();
    response.finish_reason = choice.value("finish_reason", "stop");
    if (doc.contains("usage")) {
      response.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
      response.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
    return response;
  };

  struct Inline final : ChatClient {
    std::function<ChatResponse()> fn;
    ChatResponse chat(const ChatRequest&) override { return fn(); }
  } inline_client;
  inline_client.fn = attempt;
  return chat_with_retry(inline_client, request, retry_);
}

ChatResponse chat_with_retry(ChatClient& client, const ChatRequest& request,
                             const RetryPolicy& retry,
                             const std::function<void(int)>& sleep_ms) {
  int backoff = retry.initial_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return client.chat(request);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= retry.max_attempts)
        throw TransportError(e.what(), e.retryable(), attempt);
      if (sleep_ms)
        sleep_ms(backoff);
      else
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff = static_cast<int>(backoff * retry.backoff_multiplier);
    }
  }
}

// ---- mocks ----

ScriptedMockChat ScriptedMockChat::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad mock script: ") + e.what());
  }
  std::map<std::uint64_t, std::string> script;
  for (const auto& [key, value] : doc.items())
    script[std::stoull(key)] = value.get<std::string>();
  return ScriptedMockChat(std::move(script));
}

void ScriptedMockChat::add(const ChatRequest& request, std::string response) {
  script_[request_fingerprint(request)] = std::move(response);
}

ChatResponse ScriptedMockChat::chat(const ChatRequest& request) {
  validate_request(request);
  auto it = script_.find(request_fingerprint(request));
  if (it == script_.end())
    throw ScriptedMissError("scripted mock: no response for fingerprint " +
                            std::to_string(request_fingerprint(request)));
  return {it->second, "stop", 0, 0};
}

ChatResponse EchoMockChat::chat(const ChatRequest& request) {
  validate_request(request);
  for (auto it = request.messages.rbegin(); it != request.messages.rend();
       ++it)
    if (it->role == "user") return {it->content, "stop", 0, 0};
  throw ValidationError("echo mock: no user message");
}

SyntheticMockChat::SyntheticMockChat() : options_() {}

SyntheticMockChat::SyntheticMockChat(Options options)
    : options_(std::move(options)) {}

ChatResponse SyntheticMockChat::chat(const ChatRequest& request) {
  validate_request(request);
  const std::string* user = nullptr;
  for (auto it = request.messages.rbegin(); it != request.messages.rend();
       ++it)
    if (it->role == "user") {
      user = &it->content;
      break;
    }

  std::uint64_t fp = request_fingerprint(request);
  std::uint64_t state = fp ^ options_.seed;

  // word pool drawn from the request itself so output correlates with
  // the embedded requirement texts
  auto seq = tokenize(*user);
  std::vector<std::string> pool;
  for (const auto& token : seq.tokens)
    if (token.size() >= 4) pool.push_back(token);
  if (pool.empty()) pool = {"system", "shall", "operate"};

  auto pick = [&]() -> const std::string& {
    return pool[splitmix64(state) % pool.size()];
  };
  auto sentence = [&]() {
    std::string s = "The system shall " + pick();
    std::size_t words = 4 + splitmix64(state) % 5;
    for (std::size_t w = 0; w < words; ++w) s += " " + pick();
    s += ".";
    return s;
  };

  bool list_mode = user->find(options_.list_marker) != std::string::npos;
  if (list_mode) {
    // honor "write {count}" when present, else default to 10 lines
    int count = 10;
    auto pos = user->find("write ");
    if (pos != std::string::npos) {
      int parsed = std::atoi(user->c_str() + pos + 6);
      if (parsed > 0) count = parsed;
    }
    std::string out;
    for (int i = 1; i <= count; ++i)
      out += std::to_string(i) + ". " + sentence() + "\n";
    return {out, "stop", 0, 0};
  }

  if (options_.gate_modulus != 0 && fp % options_.gate_modulus == 0)
    return {options_.sentinel, "stop", 0, 0};
  return {sentence(), "stop", 0, 0};
}

ChatResponse FlakyChat::chat(const ChatRequest& request) {
  ++attempts_;
  if (remaining_failures_ > 0) {
    --remaining_failures_;
    throw TransportError("flaky: injected failure", /*retryable=*/true);
  }
  return inner_.chat(request);
}

// ---- scorers ----

UnigramScorer::UnigramScorer(std::size_t uniform_vocab_size)
    : uniform_(true),
      scorer_id_("unigram-uniform/" + std::to_string(uniform_vocab_size)) {
  if (uniform_vocab_size == 0)
    throw ConfigError("UnigramScorer: vocabulary size must be positive");
  uniform_logprob_ = -std::log(static_cast<double>(uniform_vocab_size));
}

UnigramScorer::UnigramScorer(std::map<std::string, double> probabilities)
    : scorer_id_("unigram-table") {
  if (probabilities.empty())
    throw ConfigError("UnigramScorer: empty probability table");
  double min_p = 1.0;
  for (const auto& [token, p] : probabilities) {
    if (p <= 0.0 || p > 1.0)
      throw ConfigError("UnigramScorer: probability out of (0, 1] for '" +
                        token + "'");
    logprobs_[token] = std::log(p);
    min_p = std::min(min_p, p);
  }
  // unseen tokens score below the rarest known token
  uniform_logprob_ = std::log(min_p) - std::log(10.0);
}

std::vector<std::pair<std::string, double>> UnigramScorer::token_logprobs(
    const std::string& text) const {
  if (text.empty())
    throw ValidationError("token_logprobs: text must be non-empty");
  auto seq = tokenize(text);
  std::vector<std::pair<std::string, double>> out;
  out.reserve(seq.size());
  for (const auto& token : seq.tokens) {
    if (uniform_) {
      out.emplace_back(token, uniform_logprob_);
    } else {
      auto it = logprobs_.find(token);
      out.emplace_back(token,
                       it == logprobs_.end() ? uniform_logprob_ : it->second);
    }
  }
  return out;
}

}  // namespace secreq
