#include "agentrag/pipelines.hpp"

#include <fmt/format.h>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

std::string_view to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::kNoRag: return "no_rag";
    case PipelineKind::kDefaultRag: return "default_rag";
    case PipelineKind::kAgentic: return "agentic";
  }
  return "no_rag";
}

PipelineKind parse_pipeline_kind(std::string_view name) {
  if (name == "no_rag" || name == "no-rag") return PipelineKind::kNoRag;
  if (name == "default_rag" || name == "default" || name == "default-rag") return PipelineKind::kDefaultRag;
  if (name == "agentic") return PipelineKind::kAgentic;
  throw UsageError(fmt::format("unknown pipeline '{}' (expected no-rag, default or agentic)", name));
}

std::string default_rag_synthesis_prompt(const std::vector<std::string>& contexts, const std::string& user_prompt) {
  return "Context information is below.\n" + join(contexts, "\n\n") +
         "\nGiven the context information and the task below, produce the output.\n" + user_prompt;
}

PipelineOutput run_no_rag(const std::string& user_prompt, const ChatEndpoint& generator) {
  PipelineOutput out;
  out.kind = PipelineKind::kNoRag;
  out.synthesis_prompt = user_prompt;
  out.answer = generator.ask(user_prompt);
  return out;
}

PipelineOutput run_default_rag(const std::string& user_prompt, const VectorIndex& global_index, std::size_t k,
                               const ChatEndpoint& generator, Embedder& embedder) {
  if (trim(user_prompt).empty()) throw ValidationError("user prompt is empty");
  PipelineOutput out;
  out.kind = PipelineKind::kDefaultRag;
  for (const auto& hit : query(global_index, user_prompt, k, embedder)) {
    out.contexts.push_back(hit.text);
    out.context_sources.push_back(hit.chunk_id);
  }
  out.synthesis_prompt = default_rag_synthesis_prompt(out.contexts, user_prompt);
  out.answer = generator.ask(out.synthesis_prompt);
  return out;
}

PipelineOutput run_agentic(const std::string& user_prompt, const TopLevelAgent& top, const AgentBackends& backends,
                           std::size_t max_parallel) {
  auto agentic = answer_agentic(top, user_prompt, backends, max_parallel);
  PipelineOutput out;
  out.kind = PipelineKind::kAgentic;
  out.answer = std::move(agentic.answer);
  for (auto& c : agentic.contexts) {
    out.contexts.push_back(std::move(c.text));
    out.context_sources.push_back(std::move(c.doc_id));
  }
  out.synthesis_prompt = agentic.trace.synthesis_prompt;
  out.trace = std::move(agentic.trace);
  return out;
}

PipelineOutput NoRagPipeline::run(const std::string& user_prompt) const { return run_no_rag(user_prompt, generator_); }

DefaultRagPipeline::DefaultRagPipeline(std::shared_ptr<const VectorIndex> global_index, std::size_t k,
                                       ChatEndpoint generator, std::shared_ptr<Embedder> embedder)
    : index_(std::move(global_index)), k_(k), generator_(std::move(generator)), embedder_(std::move(embedder)) {
  if (!index_ || !embedder_) throw ConfigError("default RAG pipeline needs an index and an embedder");
}

PipelineOutput DefaultRagPipeline::run(const std::string& user_prompt) const {
  return run_default_rag(user_prompt, *index_, k_, generator_, *embedder_);
}

AgenticPipeline::AgenticPipeline(std::shared_ptr<const TopLevelAgent> top, AgentBackends backends,
                                 std::size_t max_parallel)
    : top_(std::move(top)), backends_(std::move(backends)), max_parallel_(max_parallel) {
  if (!top_ || !backends_.embedder) throw ConfigError("agentic pipeline needs a top-level agent and an embedder");
}

PipelineOutput AgenticPipeline::run(const std::string& user_prompt) const {
  return run_agentic(user_prompt, *top_, backends_, max_parallel_);
}

}  // namespace agentrag
