#include "agentrag/model_gateway.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "agentrag/corpus.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

std::string abbreviate(std::string_view text, std::size_t limit = 160) {
  if (text.size() <= limit) return std::string(text);
  return std::string(text.substr(0, limit)) + "...";
}

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingVector
// ---------------------------------------------------------------------------

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  if (raw.empty()) throw ValidationError("embedding has dimension 0");
  double sum_sq = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v)) throw ValidationError("embedding contains a non-finite value");
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) throw ValidationError("cannot normalize a zero embedding vector");
  const double norm = std::sqrt(sum_sq);
  for (double& v : raw) v /= norm;
  return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
  if (values.empty()) throw ValidationError("embedding has dimension 0");
  double sum_sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding contains a non-finite value");
    sum_sq += v * v;
  }
  if (std::abs(sum_sq - 1.0) > kNormTolerance) {
    throw ValidationError(fmt::format("embedding is not unit norm (squared norm {})", sum_sq));
  }
  return EmbeddingVector(std::move(values));
}

double EmbeddingVector::dot(const EmbeddingVector& other) const {
  if (other.dimension() != dimension()) {
    throw ValidationError(
        fmt::format("embedding dimension mismatch: {} vs {}", dimension(), other.dimension()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) sum += values_[i] * other.values_[i];
  return sum;
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed_batch called with no texts");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) throw ValidationError(fmt::format("text {} to embed is blank", i));
  }
  auto vectors = do_embed_batch(texts);
  if (vectors.size() != texts.size()) {
    throw ValidationError(
        fmt::format("embedder returned {} vectors for {} texts", vectors.size(), texts.size()));
  }
  const std::size_t d = vectors.front().dimension();
  for (const auto& v : vectors) {
    if (v.dimension() != d) throw ValidationError("embedder returned vectors of mixed dimension");
  }
  if (auto fixed = dimension(); fixed && *fixed != d) {
    throw ValidationError(fmt::format("embedder dimension changed from {} to {}", *fixed, d));
  }
  return vectors;
}

EmbeddingVector Embedder::embed(const std::string& text) { return embed_batch({text}).front(); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

ScriptedEmbedder::ScriptedEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ValidationError("scripted embedding dimension must be positive");
}

std::vector<EmbeddingVector> ScriptedEmbedder::do_embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> histogram(dimension_, 0.0);
    for (const auto& token : tokenize(text)) histogram[fnv1a64(token) % dimension_] += 1.0;
    out.push_back(EmbeddingVector::normalized(std::move(histogram)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chat
// ---------------------------------------------------------------------------

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::kSystem: return "system";
    case ChatRole::kUser: return "user";
    case ChatRole::kAssistant: return "assistant";
  }
  return "user";
}

std::string ChatModel::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  if (messages.empty()) throw ValidationError("completion request has no messages");
  if (messages.back().role != ChatRole::kUser) {
    throw ValidationError("completion request must end with a user message");
  }
  for (const auto& m : messages) {
    if (m.role != ChatRole::kAssistant && trim(m.content).empty()) {
      throw ValidationError(fmt::format("{} message has empty content", to_string(m.role)));
    }
  }
  if (params.temperature && *params.temperature < 0.0) {
    throw ValidationError("temperature must be non-negative");
  }
  if (params.max_tokens && *params.max_tokens <= 0) {
    throw ValidationError("max_tokens must be positive");
  }
  return do_complete(messages, params);
}

std::string ChatEndpoint::ask(const std::string& user_prompt) const {
  return converse({ChatMessage{ChatRole::kUser, user_prompt}});
}

std::string ChatEndpoint::converse(const std::vector<ChatMessage>& messages) const {
  if (!model) throw ConfigError("chat endpoint has no model");
  return model->complete(messages, params);
}

std::string render_prompt(const std::vector<ChatMessage>& messages) {
  std::vector<std::string> parts;
  parts.reserve(messages.size());
  for (const auto& m : messages) parts.push_back(m.content);
  return join(parts, "\n");
}

bool TranscriptRule::matches(std::string_view prompt) const {
  return std::all_of(patterns.begin(), patterns.end(),
                     [&](const std::string& p) { return prompt.find(p) != std::string_view::npos; });
}

ScriptedBackendSpec load_transcript(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("transcript '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  if (!doc.is_object()) throw LoadError(fmt::format("transcript '{}' must be a JSON object", path.string()));

  ScriptedBackendSpec spec;
  if (doc.contains("embedding_dimension")) {
    const auto& d = doc["embedding_dimension"];
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
      throw LoadError("transcript field 'embedding_dimension' must be a positive integer");
    }
    spec.embedding_dimension = d.get<std::size_t>();
  }
  if (!doc.contains("rules") || !doc["rules"].is_array()) {
    throw LoadError("transcript field 'rules' must be an array");
  }
  for (std::size_t i = 0; i < doc["rules"].size(); ++i) {
    const auto& r = doc["rules"][i];
    TranscriptRule rule;
    if (!r.is_object() || !r.contains("response") || !r["response"].is_string()) {
      throw LoadError(fmt::format("transcript rule {}: field 'response' must be a string", i));
    }
    rule.response = r["response"].get<std::string>();
    if (r.contains("match")) {
      const auto& m = r["match"];
      if (m.is_string()) {
        rule.patterns.push_back(m.get<std::string>());
      } else if (m.is_array() && std::all_of(m.begin(), m.end(), [](const json& x) { return x.is_string(); })) {
        rule.patterns = m.get<std::vector<std::string>>();
      } else {
        throw LoadError(fmt::format("transcript rule {}: field 'match' must be a string or string array", i));
      }
    }
    spec.rules.push_back(std::move(rule));
  }
  return spec;
}

ScriptedChat::ScriptedChat(std::vector<TranscriptRule> rules) : rules_(std::move(rules)) {}

std::vector<ScriptedChat::Call> ScriptedChat::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedChat::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::size_t ScriptedChat::count_calls_containing(std::string_view needle) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(calls_.begin(), calls_.end(), [&](const Call& c) {
    return c.prompt.find(needle) != std::string::npos;
  }));
}

std::string ScriptedChat::do_complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  const std::string prompt = render_prompt(messages);
  const auto rule = std::find_if(rules_.begin(), rules_.end(),
                                 [&](const TranscriptRule& r) { return r.matches(prompt); });
  if (rule == rules_.end()) {
    throw ConfigError(fmt::format("no transcript rule matches prompt \"{}\"", abbreviate(prompt)));
  }
  std::lock_guard lock(mutex_);
  calls_.push_back(Call{params.model_name, prompt, rule->response});
  return rule->response;
}

// ---------------------------------------------------------------------------
// Live backend
// ---------------------------------------------------------------------------

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) : timeout_(timeout) {
    const auto scheme_end = base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base_url.find('/', host_start);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (!httplib::Client(origin_).is_valid()) throw ConfigError(fmt::format("invalid base URL '{}'", base_url));
  }

  HttpResponse post_json(const std::string& path, const std::string& body,
                         const std::map<std::string, std::string>& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    // One client per request lets calls proceed concurrently.
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto result = client.Post(prefix_ + path, h, body, "application/json");
    if (!result) {
      throw TransportError(fmt::format("POST {}{} failed: {}", origin_, prefix_ + path,
                                       httplib::to_string(result.error())));
    }
    return HttpResponse{result->status, result->body};
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::chrono::seconds timeout_;
};

std::string provider_message(const std::string& body) {
  try {
    const auto doc = json::parse(body);
    if (doc.contains("error")) {
      const auto& err = doc["error"];
      if (err.is_object() && err.contains("message") && err["message"].is_string()) {
        return err["message"].get<std::string>();
      }
      if (err.is_string()) return err.get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return abbreviate(body, 400);
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

LiveClient::LiveClient(LiveBackendConfig config, std::unique_ptr<HttpTransport> transport, Sleeper sleep)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(config_.max_in_flight, 1))) {
  if (!transport_) throw ConfigError("live backend needs a transport");
}

std::string LiveClient::post(const std::string& path, const std::string& json_body) {
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

  auto once = [&]() -> std::string {
    in_flight_.acquire();
    HttpResponse response;
    try {
      response = transport_->post_json(path, json_body, headers);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    if (response.status >= 200 && response.status < 300) return response.body;
    const std::string message =
        fmt::format("{} returned HTTP {}: {}", path, response.status, provider_message(response.body));
    if (response.status == 408 || response.status == 429 || response.status >= 500) {
      throw TransportError(message);
    }
    throw ProviderError(message);
  };
  return with_retry(once, config_.max_attempts, config_.base_delay, sleep_).value;
}

std::string embeddings_request_body(const std::string& model, const std::vector<std::string>& texts) {
  return json{{"model", model}, {"input", texts}}.dump();
}

std::string chat_request_body(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  json wire_messages = json::array();
  for (const auto& m : messages) {
    wire_messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", params.model_name}, {"messages", std::move(wire_messages)}};
  if (params.temperature) body["temperature"] = *params.temperature;
  if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
  return body.dump();
}

LiveEmbedder::LiveEmbedder(std::shared_ptr<LiveClient> client) : client_(std::move(client)) {}

std::optional<std::size_t> LiveEmbedder::dimension() const {
  std::lock_guard lock(mutex_);
  return dimension_;
}

std::vector<EmbeddingVector> LiveEmbedder::do_embed_batch(const std::vector<std::string>& texts) {
  const auto raw = client_->post("/v1/embeddings", embeddings_request_body(client_->config().embedding_model, texts));
  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  try {
    const auto doc = json::parse(raw);
    const auto& data = doc.at("data");
    if (!data.is_array() || data.size() != texts.size()) {
      throw ProviderError(fmt::format("embeddings response has {} items for {} inputs",
                                      data.is_array() ? data.size() : 0, texts.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& item = data[i];
      const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : i;
      if (index >= texts.size()) throw ProviderError("embeddings response index out of range");
      slots[index] = EmbeddingVector::normalized(item.at("embedding").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw ProviderError(fmt::format("malformed embeddings response: {}", e.what()));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& slot : slots) {
    if (!slot) throw ProviderError("embeddings response is missing an index");
    out.push_back(std::move(*slot));
  }

  std::lock_guard lock(mutex_);
  if (!dimension_) dimension_ = out.front().dimension();
  for (const auto& v : out) {
    if (v.dimension() != *dimension_) {
      throw ValidationError(
          fmt::format("embedding dimension changed from {} to {}", *dimension_, v.dimension()));
    }
  }
  return out;
}

LiveChat::LiveChat(std::shared_ptr<LiveClient> client) : client_(std::move(client)) {}

std::string LiveChat::do_complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  const auto raw = client_->post("/v1/chat/completions", chat_request_body(messages, params));
  try {
    const auto doc = json::parse(raw);
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProviderError("chat response has no text content");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(fmt::format("malformed chat response: {}", e.what()));
  }
}

}  // namespace agentrag
