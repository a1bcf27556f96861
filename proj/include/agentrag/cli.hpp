#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentrag/agents.hpp"
#include "agentrag/corpus.hpp"
#include "agentrag/model_gateway.hpp"
#include "agentrag/pipelines.hpp"

namespace agentrag {

enum class BackendKind { kLive, kScripted };

struct AppConfig {
  std::filesystem::path manifest;
  std::filesystem::path index_dir = "index";
  ChunkingConfig chunking;
  std::size_t k = kDefaultRetrievalDepth;
  std::size_t k_doc = 2;
  std::size_t branching_factor = 10;
  std::string generator_model = "gpt-3.5-turbo";
  std::string summarizer_model = "gpt-3.5-turbo";
  std::string router_model = "gpt-3.5-turbo";
  std::string judge_model = "gpt-3.5-turbo";
  std::string embedding_model = "text-embedding-3-small";
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  BackendKind backend = BackendKind::kLive;
  std::filesystem::path transcript;
  std::filesystem::path judge_prompts;
  std::string base_url;
  std::size_t n_runs = 10;
  std::size_t concurrency = 4;

  /// Checks the cross-field invariants (scripted needs a transcript, etc.).
  void validate() const;
};

/// Reads environment variables; injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// `key = value` lines, `#` comments, optional double quotes. Relative paths
/// resolve against the file's directory. Secrets are rejected.
void apply_config_text(AppConfig& config, const std::string& text, const std::filesystem::path& base_dir);
AppConfig load_config(const std::filesystem::path& path);

/// RAG_<KEY> overrides every key, e.g. RAG_BASE_URL, RAG_N_RUNS.
void apply_env_overrides(AppConfig& config, const EnvLookup& env);

/// Hooks the CLI uses to reach the outside world.
struct CliEnvironment {
  EnvLookup env = process_env();
  std::function<std::unique_ptr<HttpTransport>(const std::string& base_url)> make_transport =
      [](const std::string& base_url) { return make_http_transport(base_url, std::chrono::seconds(120)); };
};

struct Backends {
  std::shared_ptr<Embedder> embedder;
  ChatEndpoint generator;
  ChatEndpoint summarizer;
  ChatEndpoint router;
  ChatEndpoint judge;
};

/// Scripted: one transcript-driven chat model and the hashed embedder.
/// Live: one shared HTTP client, key from RAG_API_KEY.
Backends make_backends(const AppConfig& config, const CliEnvironment& env);

/// Artifact names inside the index directory.
std::filesystem::path vector_index_file(const std::filesystem::path& dir, const std::string& doc_id);
std::filesystem::path summary_tree_file(const std::filesystem::path& dir, const std::string& doc_id);
inline constexpr char kPooledIndexFile[] = "pooled.vec.json";
inline constexpr char kToolIndexFile[] = "tools.vec.json";

struct IngestSummary {
  std::size_t documents = 0;
  std::size_t chunks = 0;
};

/// Builds every index in memory, then swaps a fully written staging
/// directory into place. Nothing is left behind on failure.
IngestSummary ingest(const AppConfig& config, const Backends& backends);

/// Reassembles the top-level agent from an index directory.
TopLevelAgent load_top_level_agent(const std::filesystem::path& index_dir, std::size_t k_doc);

/// Entry point of the `agentrag` tool. Exit codes: 0 success, 1 usage,
/// 2 runtime failure; errors go to `err` as "error: <kind>: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnvironment& env = {});

}  // namespace agentrag
