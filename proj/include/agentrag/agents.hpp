#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrag/corpus.hpp"
#include "agentrag/model_gateway.hpp"
#include "agentrag/summary_index.hpp"
#include "agentrag/vector_index.hpp"

namespace agentrag {

enum class EngineKind { kVector, kSummary };

std::string_view to_string(EngineKind engine);

inline constexpr char kVectorEngineDescription[] = "answer facts about the document";
inline constexpr char kSummaryEngineDescription[] = "answer summarization questions about the document";

/// Reply marking a document as irrelevant to the query.
inline constexpr char kNoRelevantInformation[] = "NO_RELEVANT_INFORMATION";

inline constexpr char kRefineInstruction[] =
    "Answer the query using only the context below. If the context contains no relevant "
    "information, reply exactly NO_RELEVANT_INFORMATION.";

/// Number of documents the top-level agent fans a query out to.
inline constexpr std::size_t kSelectionDepth = 3;

struct AgentConfig {
  /// Chunks retrieved by a document's vector engine.
  std::size_t k_doc = 2;
  SummaryTreeConfig tree;
  /// Concurrent refine calls per query.
  std::size_t max_parallel = 4;
};

/// One document's pair of query engines.
struct DocumentAgent {
  std::string doc_id;
  VectorIndex vector_index;
  std::size_t k_doc = 2;
  SummaryTree summary_tree;
};

/// A document agent wrapped with the document's short description.
struct DocumentTool {
  std::string doc_id;
  std::string description;
  DocumentAgent agent;
};

/// Document tools plus a vector index over their descriptions (entry id =
/// doc_id).
class TopLevelAgent {
 public:
  /// Checks one tool-index entry per tool, ids matching, descriptions non-empty.
  TopLevelAgent(std::vector<DocumentTool> tools, VectorIndex tool_index);

  const std::vector<DocumentTool>& tools() const { return tools_; }
  const VectorIndex& tool_index() const { return tool_index_; }
  const DocumentTool& tool(std::string_view doc_id) const;

 private:
  std::vector<DocumentTool> tools_;
  VectorIndex tool_index_;
};

DocumentAgent build_document_agent(const Document& doc, const std::vector<Chunk>& chunks, Embedder& embedder,
                                   const ChatEndpoint& summarizer, const AgentConfig& cfg = {});

/// Indexes the tools' descriptions.
TopLevelAgent build_top_level_agent(std::vector<DocumentTool> tools, Embedder& embedder);

// ---------------------------------------------------------------------------
// Query-time operations
// ---------------------------------------------------------------------------

struct RouteDecision {
  EngineKind engine = EngineKind::kVector;
  std::string prompt;
  std::string reply;
  /// Reply named neither engine; vector was used.
  bool fallback = false;
};

std::string routing_prompt(const DocumentAgent& agent, const std::string& query);

/// First case-insensitive occurrence of "vector" or "summary" wins; neither
/// present yields vector with fallback = true.
RouteDecision parse_route_reply(std::string reply);

RouteDecision route(const DocumentAgent& agent, const std::string& query, const ChatEndpoint& router);

struct RefinedContext {
  std::string doc_id;
  EngineKind engine_used = EngineKind::kVector;
  /// Trimmed responder reply.
  std::string text;
  bool discarded = false;
};

/// Everything a refine call did, for traces.
struct RefineStep {
  RouteDecision route;
  std::vector<std::string> retrieved_chunk_ids;
  std::string prompt;
  std::string reply;
};

std::string vector_refine_prompt(const std::vector<ScoredChunk>& chunks, const std::string& query);

/// Trimmed reply equals the sentinel.
bool is_discard_reply(std::string_view reply);

RefinedContext refine(const DocumentAgent& agent, const std::string& query, Embedder& embedder,
                      const ChatEndpoint& router, const ChatEndpoint& responder, RefineStep* step = nullptr);

struct ToolSelection {
  const DocumentTool* tool = nullptr;
  double score = 0.0;
};

/// Top min(3, |tools|) tools by description similarity to the query.
std::vector<ToolSelection> select_documents(const TopLevelAgent& top, const std::string& query, Embedder& embedder);

struct DocumentStepTrace {
  std::string doc_id;
  double selection_score = 0.0;
  RefineStep refine;
  bool discarded = false;
  bool failed = false;
  std::string error;
  double elapsed_ms = 0.0;
};

struct AgentTrace {
  std::string query;
  std::vector<std::string> selected_doc_ids;
  std::vector<DocumentStepTrace> documents;
  std::string synthesis_prompt;
  std::string answer;
  bool zero_context = false;
  std::size_t routing_fallbacks = 0;
  std::size_t failed_refinements = 0;
  double elapsed_ms = 0.0;
};

nlohmann::json to_json(const AgentTrace& trace);

struct AgenticAnswer {
  std::string answer;
  /// Non-discarded contexts in selection order.
  std::vector<RefinedContext> contexts;
  AgentTrace trace;
};

inline constexpr char kNoContextNote[] = "(No relevant context was found in the document pool.)";

std::string agentic_synthesis_prompt(const std::vector<std::string>& context_texts, const std::string& user_prompt);

/// Models used at query time.
struct AgentBackends {
  std::shared_ptr<Embedder> embedder;
  ChatEndpoint router;
  /// Produces refined contexts and the final answer.
  ChatEndpoint generator;
};

/// select_documents, refine each selected document (concurrently), drop
/// discards, synthesize. A document whose refinement fails is excluded and
/// flagged in the trace; if every refinement fails the first error is
/// rethrown.
AgenticAnswer answer_agentic(const TopLevelAgent& top, const std::string& user_prompt, const AgentBackends& backends,
                             std::size_t max_parallel = 4);

}  // namespace agentrag
