#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

#include "agentrag/error.hpp"

namespace agentrag {

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// Unit-norm dense vector. Constructible only through the factories, which
/// enforce the norm.
class EmbeddingVector {
 public:
  static constexpr double kNormTolerance = 1e-6;

  /// L2-normalizes `raw`. Throws ValidationError for empty, zero or
  /// non-finite input.
  static EmbeddingVector normalized(std::vector<double> raw);

  /// Wraps values that are already unit norm (e.g. read back from disk).
  /// Throws ValidationError if |‖v‖² − 1| exceeds the tolerance.
  static EmbeddingVector from_unit(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t dimension() const { return values_.size(); }

  /// Cosine similarity, computed as a dot product. Throws ValidationError on
  /// dimension mismatch.
  double dot(const EmbeddingVector& other) const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}
  std::vector<double> values_;
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One vector per text, order-preserving. Rejects an empty batch and
  /// blank texts with ValidationError.
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);
  EmbeddingVector embed(const std::string& text);

  /// Known output dimension, if the backend fixes it up front.
  virtual std::optional<std::size_t> dimension() const = 0;

 protected:
  virtual std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) = 0;
};

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

/// Hashed bag-of-words: every token increments bucket fnv1a64(token) % d,
/// then the histogram is L2-normalized.
class ScriptedEmbedder final : public Embedder {
 public:
  explicit ScriptedEmbedder(std::size_t dimension);

  std::optional<std::size_t> dimension() const override { return dimension_; }

 protected:
  std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::size_t dimension_;
};

// ---------------------------------------------------------------------------
// Chat completions
// ---------------------------------------------------------------------------

enum class ChatRole { kSystem, kUser, kAssistant };

std::string_view to_string(ChatRole role);

struct ChatMessage {
  ChatRole role = ChatRole::kUser;
  std::string content;
};

struct CompletionParams {
  /// Absent means the provider default; the field is then omitted on the wire.
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::string model_name;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;

  /// Validates the conversation (non-empty, ends with a user turn, no blank
  /// user/system content) and returns the assistant reply.
  std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params);

 protected:
  virtual std::string do_complete(const std::vector<ChatMessage>& messages,
                                  const CompletionParams& params) = 0;
};

/// A chat model together with the parameters for one role (generator,
/// summarizer, router or judge).
struct ChatEndpoint {
  std::shared_ptr<ChatModel> model;
  CompletionParams params;

  std::string ask(const std::string& user_prompt) const;
  std::string converse(const std::vector<ChatMessage>& messages) const;
};

/// Text a scripted transcript is matched against: message contents joined by
/// newlines.
std::string render_prompt(const std::vector<ChatMessage>& messages);

struct TranscriptRule {
  /// Every pattern must occur as a substring of the rendered prompt. An empty
  /// list matches anything.
  std::vector<std::string> patterns;
  std::string response;

  bool matches(std::string_view prompt) const;
};

struct ScriptedBackendSpec {
  std::size_t embedding_dimension = 64;
  std::vector<TranscriptRule> rules;
};

/// Transcript file: {"embedding_dimension": d, "rules": [{"match": "..." |
/// ["...", ...], "response": "..."}]}.
ScriptedBackendSpec load_transcript(const std::filesystem::path& path);

/// Deterministic chat backend: first matching rule wins.
class ScriptedChat final : public ChatModel {
 public:
  struct Call {
    std::string model_name;
    std::string prompt;
    std::string response;
  };

  explicit ScriptedChat(std::vector<TranscriptRule> rules);

  /// Calls served so far, in arrival order.
  std::vector<Call> calls() const;
  std::size_t call_count() const;
  std::size_t count_calls_containing(std::string_view needle) const;

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages,
                          const CompletionParams& params) override;

 private:
  std::vector<TranscriptRule> rules_;
  mutable std::mutex mutex_;
  std::vector<Call> calls_;
};

// ---------------------------------------------------------------------------
// Retry
// ---------------------------------------------------------------------------

template <class T>
struct Attempted {
  T value;
  int attempts = 1;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void sleep_for(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

/// Runs `op` until it succeeds, retrying TransportError only. The delay after
/// failed attempt a (0-based) is base_delay * 2^a. On exhaustion the last
/// TransportError is rethrown annotated with the attempt count; any other
/// error propagates immediately.
template <class Op>
auto with_retry(Op&& op, int max_attempts, std::chrono::milliseconds base_delay,
                const Sleeper& sleep = sleep_for) -> Attempted<std::invoke_result_t<Op&>> {
  if (max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
  for (int attempt = 0;; ++attempt) {
    try {
      return {op(), attempt + 1};
    } catch (const TransportError& e) {
      if (attempt + 1 >= max_attempts) {
        throw TransportError(std::string(e.what()) + " (gave up after " +
                                 std::to_string(attempt + 1) + " attempts)",
                             attempt + 1);
      }
      sleep(base_delay * (std::int64_t{1} << attempt));
    }
  }
}

// ---------------------------------------------------------------------------
// Live OpenAI-compatible backend
// ---------------------------------------------------------------------------

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal POST transport. Implementations throw TransportError when no
/// HTTP response was obtained at all.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                 const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib backed transport; `base_url` is scheme://host[:port][/prefix].
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout);

struct LiveBackendConfig {
  std::string base_url;
  std::string api_key;
  std::string embedding_model = "text-embedding-3-small";
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::seconds timeout{120};
};

/// Shared HTTP client: bearer auth, in-flight limit, retry and status mapping.
/// 408/429/5xx map to TransportError, other non-2xx to ProviderError.
class LiveClient {
 public:
  LiveClient(LiveBackendConfig config, std::unique_ptr<HttpTransport> transport,
             Sleeper sleep = sleep_for);

  /// Returns the parsed JSON response body as a string.
  std::string post(const std::string& path, const std::string& json_body);

  const LiveBackendConfig& config() const { return config_; }

 private:
  LiveBackendConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  std::counting_semaphore<> in_flight_;
};

/// POST /v1/embeddings, one request per batch.
class LiveEmbedder final : public Embedder {
 public:
  explicit LiveEmbedder(std::shared_ptr<LiveClient> client);

  std::optional<std::size_t> dimension() const override;

 protected:
  std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::shared_ptr<LiveClient> client_;
  mutable std::mutex mutex_;
  std::optional<std::size_t> dimension_;
};

/// POST /v1/chat/completions.
class LiveChat final : public ChatModel {
 public:
  explicit LiveChat(std::shared_ptr<LiveClient> client);

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages,
                          const CompletionParams& params) override;

 private:
  std::shared_ptr<LiveClient> client_;
};

/// Request bodies as sent on the wire (exposed for tests).
std::string embeddings_request_body(const std::string& model, const std::vector<std::string>& texts);
std::string chat_request_body(const std::vector<ChatMessage>& messages, const CompletionParams& params);

}  // namespace agentrag
