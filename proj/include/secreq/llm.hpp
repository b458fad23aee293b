#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace secreq {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  std::optional<int> max_tokens;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason = "stop";
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

/// Order-sensitive hash over (role, content) pairs; the mock script key.
std::uint64_t request_fingerprint(const ChatRequest& request);

/// Chat-completion backend. Implementations are safe for concurrent
/// use up to their configured in-flight bound.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  int initial_backoff_ms = 200;
  double backoff_multiplier = 2.0;
};

/// HTTP JSON client in the de-facto hosted chat-completion shape:
/// POST {model, messages, temperature, seed} -> choices[0].message.content.
/// Retries transient failures with exponential backoff.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string credential,
                 RetryPolicy retry = {});
  ChatResponse chat(const ChatRequest& request) override;

 private:
  std::string endpoint_;
  std::string credential_;
  RetryPolicy retry_;
};

/// Replays canned responses keyed by request fingerprint; an unmatched
/// fingerprint raises ScriptedMissError so tests stay exhaustive.
class ScriptedMockChat final : public ChatClient {
 public:
  ScriptedMockChat() = default;
  explicit ScriptedMockChat(std::map<std::uint64_t, std::string> script)
      : script_(std::move(script)) {}

  /// Script file: JSON object, fingerprint as decimal string -> response.
  static ScriptedMockChat from_file(const std::filesystem::path& path);

  void add(const ChatRequest& request, std::string response);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  std::map<std::uint64_t, std::string> script_;
};

/// Echoes the last user message; handy in smoke tests.
class EchoMockChat final : public ChatClient {
 public:
  ChatResponse chat(const ChatRequest& request) override;
};

/// Deterministic stand-in backend for end-to-end runs without a hosted
/// model. Requests whose last user message contains `list_marker` are
/// answered with a numbered list of synthetic requirement lines built
/// from tokens of the request; other requests either yield the sentinel
/// (every `gate_modulus`-th fingerprint) or one synthetic requirement
/// sentence. Identical requests always produce identical output.
class SyntheticMockChat final : public ChatClient {
 public:
  struct Options {
    std::uint64_t seed = 7;
    std::string list_marker = "numbered list";
    std::string sentinel = "NOT_APPLICABLE";
    std::uint64_t gate_modulus = 5;  // 0 disables gating
  };

  SyntheticMockChat();
  explicit SyntheticMockChat(Options options);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  Options options_;
};

/// Wraps another client and fails the first `failures` calls with a
/// retryable transport error; exercises retry paths in tests.
class FlakyChat final : public ChatClient {
 public:
  FlakyChat(ChatClient& inner, int failures)
      : inner_(inner), remaining_failures_(failures) {}
  ChatResponse chat(const ChatRequest& request) override;
  int attempts() const { return attempts_; }

 private:
  ChatClient& inner_;
  int remaining_failures_;
  int attempts_ = 0;
};

/// Runs `call` under the retry policy, retrying retryable transport
/// errors with exponential backoff.
ChatResponse chat_with_retry(ChatClient& client, const ChatRequest& request,
                             const RetryPolicy& retry,
                             const std::function<void(int)>& sleep_ms = {});

// ---- token-logprob scoring ----

/// Scores text as natural-log token probabilities (each <= 0).
class LmScorer {
 public:
  virtual ~LmScorer() = default;
  virtual const std::string& scorer_id() const = 0;
  virtual std::vector<std::pair<std::string, double>> token_logprobs(
      const std::string& text) const = 0;
};

/// Unigram model over an explicit vocabulary; uses the unified
/// tokenizer. A uniform distribution is the common test fixture.
class UnigramScorer final : public LmScorer {
 public:
  /// Uniform over a vocabulary of the given size.
  explicit UnigramScorer(std::size_t uniform_vocab_size);
  /// Explicit per-token probabilities (must be in (0, 1]).
  explicit UnigramScorer(std::map<std::string, double> probabilities);

  const std::string& scorer_id() const override { return scorer_id_; }
  std::vector<std::pair<std::string, double>> token_logprobs(
      const std::string& text) const override;

 private:
  std::map<std::string, double> logprobs_;
  double uniform_logprob_ = 0.0;
  bool uniform_ = false;
  std::string scorer_id_;
};

}  // namespace secreq
