#include "agentrag/agents.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

std::string_view to_string(EngineKind engine) {
  return engine == EngineKind::kSummary ? "summary" : "vector";
}

TopLevelAgent::TopLevelAgent(std::vector<DocumentTool> tools, VectorIndex tool_index)
    : tools_(std::move(tools)), tool_index_(std::move(tool_index)) {
  if (tools_.empty()) throw ValidationError("top-level agent needs at least one document tool");
  if (tool_index_.size() != tools_.size()) {
    throw ValidationError(fmt::format("tool index has {} entries for {} tools", tool_index_.size(), tools_.size()));
  }
  std::unordered_set<std::string> ids;
  for (const auto& t : tools_) {
    if (trim(t.description).empty()) throw ValidationError(fmt::format("tool '{}' has no description", t.doc_id));
    if (t.agent.doc_id != t.doc_id || t.agent.summary_tree.doc_id != t.doc_id) {
      throw ValidationError(fmt::format("tool '{}' wraps an agent for a different document", t.doc_id));
    }
    ids.insert(t.doc_id);
  }
  for (const auto& e : tool_index_.entries()) {
    if (e.chunk_id != e.doc_id || !ids.contains(e.chunk_id)) {
      throw ValidationError(fmt::format("tool index entry '{}' does not name a tool", e.chunk_id));
    }
  }
}

const DocumentTool& TopLevelAgent::tool(std::string_view doc_id) const {
  const auto it = std::find_if(tools_.begin(), tools_.end(), [&](const DocumentTool& t) { return t.doc_id == doc_id; });
  if (it == tools_.end()) throw ValidationError(fmt::format("no document tool '{}'", doc_id));
  return *it;
}

DocumentAgent build_document_agent(const Document& doc, const std::vector<Chunk>& chunks, Embedder& embedder,
                                   const ChatEndpoint& summarizer, const AgentConfig& cfg) {
  for (const auto& c : chunks) {
    if (c.doc_id != doc.doc_id) {
      throw ValidationError(fmt::format("chunk '{}' does not belong to document '{}'", c.chunk_id, doc.doc_id));
    }
  }
  if (cfg.k_doc == 0) throw ValidationError("k_doc must be positive");
  return with_error_context(fmt::format("building agent for '{}'", doc.doc_id), [&] {
    return DocumentAgent{doc.doc_id, build_index(chunks, embedder), cfg.k_doc,
                         build_summary_tree(chunks, summarizer, cfg.tree)};
  });
}

TopLevelAgent build_top_level_agent(std::vector<DocumentTool> tools, Embedder& embedder) {
  std::vector<Chunk> descriptions;
  descriptions.reserve(tools.size());
  for (std::size_t i = 0; i < tools.size(); ++i) {
    descriptions.push_back(Chunk{tools[i].doc_id, tools[i].doc_id, i, tools[i].description, {}});
  }
  auto index = build_index(descriptions, embedder);
  return TopLevelAgent(std::move(tools), std::move(index));
}

std::string routing_prompt(const DocumentAgent& agent, const std::string& query) {
  return fmt::format(
      "You decide which query engine of the document '{}' should handle a query.\n"
      "vector: use it to {}.\n"
      "summary: use it to {}.\n"
      "Reply with exactly one word, vector or summary.\n"
      "Query: {}",
      agent.doc_id, kVectorEngineDescription, kSummaryEngineDescription, query);
}

RouteDecision parse_route_reply(std::string reply) {
  const std::string lowered = to_lower(reply);
  const auto v = lowered.find("vector");
  const auto s = lowered.find("summary");
  RouteDecision decision;
  decision.reply = std::move(reply);
  if (v == std::string::npos && s == std::string::npos) {
    decision.fallback = true;
    decision.engine = EngineKind::kVector;
  } else {
    decision.engine = s < v ? EngineKind::kSummary : EngineKind::kVector;
  }
  return decision;
}

RouteDecision route(const DocumentAgent& agent, const std::string& query, const ChatEndpoint& router) {
  const std::string prompt = routing_prompt(agent, query);
  auto decision = parse_route_reply(router.ask(prompt));
  decision.prompt = prompt;
  if (decision.fallback) {
    spdlog::warn("routing fallback for '{}': reply \"{}\" names no engine, using vector", agent.doc_id,
                 decision.reply);
  }
  return decision;
}

std::string vector_refine_prompt(const std::vector<ScoredChunk>& chunks, const std::string& query) {
  std::string prompt = std::string(kRefineInstruction) + "\nContext:";
  for (const auto& c : chunks) {
    prompt += '\n';
    prompt += c.text;
  }
  return prompt + "\nQuery:" + query;
}

bool is_discard_reply(std::string_view reply) { return trim(reply) == kNoRelevantInformation; }

RefinedContext refine(const DocumentAgent& agent, const std::string& query, Embedder& embedder,
                      const ChatEndpoint& router, const ChatEndpoint& responder, RefineStep* step) {
  return with_error_context(fmt::format("refining '{}'", agent.doc_id), [&] {
    RefineStep local;
    RefineStep& s = step ? *step : local;
    s.route = route(agent, query, router);
    if (s.route.engine == EngineKind::kVector) {
      const auto hits = agentrag::query(agent.vector_index, query, agent.k_doc, embedder);
      for (const auto& h : hits) s.retrieved_chunk_ids.push_back(h.chunk_id);
      s.prompt = vector_refine_prompt(hits, query);
    } else {
      s.prompt = summary_query_prompt(agent.summary_tree, query, kRefineInstruction);
    }
    s.reply = responder.ask(s.prompt);
    RefinedContext context;
    context.doc_id = agent.doc_id;
    context.engine_used = s.route.engine;
    context.text = std::string(trim(s.reply));
    context.discarded = context.text == kNoRelevantInformation;
    return context;
  });
}

std::vector<ToolSelection> select_documents(const TopLevelAgent& top, const std::string& query, Embedder& embedder) {
  std::vector<ToolSelection> out;
  for (const auto& hit : agentrag::query(top.tool_index(), query, kSelectionDepth, embedder)) {
    out.push_back(ToolSelection{&top.tool(hit.chunk_id), hit.score});
  }
  return out;
}

std::string agentic_synthesis_prompt(const std::vector<std::string>& context_texts, const std::string& user_prompt) {
  const std::string context = context_texts.empty() ? std::string(kNoContextNote) : join(context_texts, "\n\n");
  return "Context information from multiple sources is below.\n" + context +
         "\nGiven the context information and the task below, produce the output.\n" + user_prompt;
}

AgenticAnswer answer_agentic(const TopLevelAgent& top, const std::string& user_prompt, const AgentBackends& backends,
                             std::size_t max_parallel) {
  if (!backends.embedder) throw ConfigError("agentic pipeline has no embedder");
  if (trim(user_prompt).empty()) throw ValidationError("user prompt is empty");
  const auto started = Clock::now();

  AgenticAnswer result;
  AgentTrace& trace = result.trace;
  trace.query = user_prompt;

  const auto selected = select_documents(top, user_prompt, *backends.embedder);
  trace.documents.resize(selected.size());
  std::vector<RefinedContext> refined(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    trace.selected_doc_ids.push_back(selected[i].tool->doc_id);
    trace.documents[i].doc_id = selected[i].tool->doc_id;
    trace.documents[i].selection_score = selected[i].score;
  }

  const auto errors = parallel_for(selected.size(), max_parallel, [&](std::size_t i) {
    const auto step_started = Clock::now();
    auto& step = trace.documents[i];
    try {
      refined[i] = refine(selected[i].tool->agent, user_prompt, *backends.embedder, backends.router,
                          backends.generator, &step.refine);
    } catch (...) {
      step.elapsed_ms = elapsed_ms(step_started);
      throw;
    }
    step.elapsed_ms = elapsed_ms(step_started);
  });

  std::vector<std::string> context_texts;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto& step = trace.documents[i];
    if (step.refine.route.fallback) ++trace.routing_fallbacks;
    if (errors[i]) {
      step.failed = true;
      ++trace.failed_refinements;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        step.error = e.what();
      }
      spdlog::warn("excluding '{}' from synthesis: {}", step.doc_id, step.error);
      continue;
    }
    step.discarded = refined[i].discarded;
    if (refined[i].discarded) continue;
    context_texts.push_back(refined[i].text);
    result.contexts.push_back(std::move(refined[i]));
  }
  if (!selected.empty() && trace.failed_refinements == selected.size()) std::rethrow_exception(errors.front());

  trace.zero_context = result.contexts.empty();
  trace.synthesis_prompt = agentic_synthesis_prompt(context_texts, user_prompt);
  result.answer = backends.generator.ask(trace.synthesis_prompt);
  trace.answer = result.answer;
  trace.elapsed_ms = elapsed_ms(started);
  return result;
}

nlohmann::json to_json(const AgentTrace& trace) {
  nlohmann::json documents = nlohmann::json::array();
  for (const auto& d : trace.documents) {
    documents.push_back({{"doc_id", d.doc_id},
                         {"selection_score", d.selection_score},
                         {"engine", to_string(d.refine.route.engine)},
                         {"route_prompt", d.refine.route.prompt},
                         {"route_reply", d.refine.route.reply},
                         {"route_fallback", d.refine.route.fallback},
                         {"retrieved_chunk_ids", d.refine.retrieved_chunk_ids},
                         {"refine_prompt", d.refine.prompt},
                         {"refine_reply", d.refine.reply},
                         {"discarded", d.discarded},
                         {"failed", d.failed},
                         {"error", d.error},
                         {"elapsed_ms", d.elapsed_ms}});
  }
  return {{"query", trace.query},
          {"selected_doc_ids", trace.selected_doc_ids},
          {"documents", std::move(documents)},
          {"synthesis_prompt", trace.synthesis_prompt},
          {"answer", trace.answer},
          {"zero_context", trace.zero_context},
          {"routing_fallbacks", trace.routing_fallbacks},
          {"failed_refinements", trace.failed_refinements},
          {"elapsed_ms", trace.elapsed_ms}};
}

}  // namespace agentrag
