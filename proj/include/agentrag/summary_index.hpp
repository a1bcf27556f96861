#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "agentrag/corpus.hpp"
#include "agentrag/model_gateway.hpp"

namespace agentrag {

struct SummaryNode {
  /// Summary for nodes above level 0, the chunk text for leaves.
  std::string text;
  /// Indices into the level below; empty for leaves.
  std::vector<std::size_t> child_indices;

  friend bool operator==(const SummaryNode&, const SummaryNode&) = default;
};

/// Bottom-up summary hierarchy over one document's chunks. levels[0] holds
/// the leaves, levels.back() the single root; every level above 0 has
/// ceil(|below| / branching_factor) nodes over consecutive children.
struct SummaryTree {
  std::string doc_id;
  std::size_t branching_factor = 10;
  std::vector<std::vector<SummaryNode>> levels;

  const SummaryNode& root() const { return levels.back().front(); }
  std::size_t depth() const { return levels.size() - 1; }
  std::vector<std::size_t> level_sizes() const;

  /// Half-open leaf range covered by `node` at `level`.
  std::pair<std::size_t, std::size_t> leaf_range(std::size_t level, std::size_t node) const;

  /// Throws ValidationError if any structural invariant is broken.
  void validate() const;

  friend bool operator==(const SummaryTree&, const SummaryTree&) = default;
};

struct SummaryTreeConfig {
  std::size_t branching_factor = 10;
  /// Summaries within one level are independent and may run concurrently.
  std::size_t max_parallel = 4;
};

/// ceil-division recursion n, ceil(n/b), ..., 1 (always at least one level
/// above the leaves).
std::vector<std::size_t> expected_level_sizes(std::size_t leaf_count, std::size_t branching_factor);

std::string summarizer_prompt(const std::vector<std::string>& child_texts);

/// Groups consecutive runs of at most b nodes and summarizes each group until
/// a single root remains. Summarizer failures carry the level/group position.
SummaryTree build_summary_tree(const std::vector<Chunk>& chunks, const ChatEndpoint& summarizer,
                               const SummaryTreeConfig& cfg = {});

inline constexpr char kSummaryQueryInstruction[] =
    "Answer the query using the document summaries below.";

/// Root summary plus the level-1 summaries, or plus the leaves when the root
/// sits directly above them.
std::vector<std::string> summary_context(const SummaryTree& tree);

/// "{instruction}\nContext:\n{summaries}\nQuery:{query}"
std::string summary_query_prompt(const SummaryTree& tree, const std::string& query,
                                 const std::string& instruction = kSummaryQueryInstruction);

std::string query_summary(const SummaryTree& tree, const std::string& query, const ChatEndpoint& responder,
                          const std::string& instruction = kSummaryQueryInstruction);

inline constexpr int kSummaryTreeFormatVersion = 1;

/// {"version":1,"doc_id","b","levels":[[{"summary_text","child_indices"}...]...]}
std::string serialize_tree(const SummaryTree& tree);
SummaryTree deserialize_tree(const std::string& json_text);

void save_tree(const SummaryTree& tree, const std::filesystem::path& path);
SummaryTree load_tree(const std::filesystem::path& path);

}  // namespace agentrag
