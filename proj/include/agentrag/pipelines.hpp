#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentrag/agents.hpp"
#include "agentrag/model_gateway.hpp"
#include "agentrag/vector_index.hpp"

namespace agentrag {

enum class PipelineKind { kNoRag, kDefaultRag, kAgentic };

inline constexpr PipelineKind kAllPipelineKinds[] = {PipelineKind::kNoRag, PipelineKind::kDefaultRag,
                                                     PipelineKind::kAgentic};

/// "no_rag", "default_rag", "agentic".
std::string_view to_string(PipelineKind kind);
/// Accepts the canonical names and the CLI spellings "no-rag" and "default".
PipelineKind parse_pipeline_kind(std::string_view name);

struct PipelineOutput {
  PipelineKind kind = PipelineKind::kNoRag;
  std::string answer;
  std::vector<std::string> contexts;
  /// Provenance per context: chunk ids for default RAG, doc ids for agentic.
  std::vector<std::string> context_sources;
  std::string synthesis_prompt;
  /// Agentic only.
  std::optional<AgentTrace> trace;
};

inline constexpr std::size_t kDefaultRetrievalDepth = 3;

std::string default_rag_synthesis_prompt(const std::vector<std::string>& contexts, const std::string& user_prompt);

PipelineOutput run_no_rag(const std::string& user_prompt, const ChatEndpoint& generator);

/// `global_index` pools the chunks of every document.
PipelineOutput run_default_rag(const std::string& user_prompt, const VectorIndex& global_index, std::size_t k,
                               const ChatEndpoint& generator, Embedder& embedder);

PipelineOutput run_agentic(const std::string& user_prompt, const TopLevelAgent& top, const AgentBackends& backends,
                           std::size_t max_parallel = 4);

/// Uniform handle the evaluator drives.
class Pipeline {
 public:
  virtual ~Pipeline() = default;
  virtual PipelineKind kind() const = 0;
  virtual PipelineOutput run(const std::string& user_prompt) const = 0;
};

class NoRagPipeline final : public Pipeline {
 public:
  explicit NoRagPipeline(ChatEndpoint generator) : generator_(std::move(generator)) {}
  PipelineKind kind() const override { return PipelineKind::kNoRag; }
  PipelineOutput run(const std::string& user_prompt) const override;

 private:
  ChatEndpoint generator_;
};

class DefaultRagPipeline final : public Pipeline {
 public:
  DefaultRagPipeline(std::shared_ptr<const VectorIndex> global_index, std::size_t k, ChatEndpoint generator,
                     std::shared_ptr<Embedder> embedder);
  PipelineKind kind() const override { return PipelineKind::kDefaultRag; }
  PipelineOutput run(const std::string& user_prompt) const override;

 private:
  std::shared_ptr<const VectorIndex> index_;
  std::size_t k_;
  ChatEndpoint generator_;
  std::shared_ptr<Embedder> embedder_;
};

class AgenticPipeline final : public Pipeline {
 public:
  AgenticPipeline(std::shared_ptr<const TopLevelAgent> top, AgentBackends backends, std::size_t max_parallel = 4);
  PipelineKind kind() const override { return PipelineKind::kAgentic; }
  PipelineOutput run(const std::string& user_prompt) const override;

 private:
  std::shared_ptr<const TopLevelAgent> top_;
  AgentBackends backends_;
  std::size_t max_parallel_;
};

}  // namespace agentrag
