#include "agentrag/summary_index.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

std::string context_block(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    out += '\n';
    out += p;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> SummaryTree::level_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(levels.size());
  for (const auto& level : levels) sizes.push_back(level.size());
  return sizes;
}

std::pair<std::size_t, std::size_t> SummaryTree::leaf_range(std::size_t level, std::size_t node) const {
  if (level == 0) return {node, node + 1};
  const auto& children = levels.at(level).at(node).child_indices;
  return {leaf_range(level - 1, children.front()).first, leaf_range(level - 1, children.back()).second};
}

void SummaryTree::validate() const {
  if (branching_factor < 2) throw ValidationError("summary tree branching factor must be at least 2");
  if (levels.size() < 2) throw ValidationError("summary tree needs leaves and a root level");
  if (levels.front().empty()) throw ValidationError("summary tree has no leaves");
  if (levels.back().size() != 1) throw ValidationError("summary tree top level must hold exactly one node");
  for (const auto& leaf : levels.front()) {
    if (!leaf.child_indices.empty()) throw ValidationError("summary tree leaf has children");
  }
  for (std::size_t l = 1; l < levels.size(); ++l) {
    const std::size_t below = levels[l - 1].size();
    const std::size_t expected = (below + branching_factor - 1) / branching_factor;
    if (levels[l].size() != expected) {
      throw ValidationError(fmt::format("summary tree level {} has {} nodes, expected {}", l, levels[l].size(),
                                        expected));
    }
    std::size_t next_child = 0;
    for (const auto& node : levels[l]) {
      if (node.child_indices.empty() || node.child_indices.size() > branching_factor) {
        throw ValidationError(fmt::format("summary tree node at level {} has {} children", l,
                                          node.child_indices.size()));
      }
      for (std::size_t c : node.child_indices) {
        if (c != next_child++) throw ValidationError(fmt::format("summary tree level {} children are not consecutive", l));
      }
    }
    if (next_child != below) throw ValidationError(fmt::format("summary tree level {} does not cover level {}", l, l - 1));
  }
}

std::vector<std::size_t> expected_level_sizes(std::size_t leaf_count, std::size_t branching_factor) {
  std::vector<std::size_t> sizes{leaf_count};
  do {
    sizes.push_back((sizes.back() + branching_factor - 1) / branching_factor);
  } while (sizes.back() > 1);
  return sizes;
}

std::string summarizer_prompt(const std::vector<std::string>& child_texts) {
  return "Summarize the following text faithfully and concisely:\n" + join(child_texts, "\n\n");
}

SummaryTree build_summary_tree(const std::vector<Chunk>& chunks, const ChatEndpoint& summarizer,
                               const SummaryTreeConfig& cfg) {
  if (chunks.empty()) throw ValidationError("cannot build a summary tree from zero chunks");
  if (cfg.branching_factor < 2) throw ValidationError("summary tree branching factor must be at least 2");

  SummaryTree tree;
  tree.doc_id = chunks.front().doc_id;
  tree.branching_factor = cfg.branching_factor;
  auto& leaves = tree.levels.emplace_back();
  for (const auto& c : chunks) leaves.push_back(SummaryNode{c.text, {}});

  const std::size_t b = cfg.branching_factor;
  do {
    const auto& below = tree.levels.back();
    const std::size_t level = tree.levels.size();
    const std::size_t groups = (below.size() + b - 1) / b;
    std::vector<SummaryNode> nodes(groups);
    parallel_for_or_throw(groups, cfg.max_parallel, [&](std::size_t g) {
      SummaryNode& node = nodes[g];
      std::vector<std::string> texts;
      for (std::size_t c = g * b; c < std::min((g + 1) * b, below.size()); ++c) {
        node.child_indices.push_back(c);
        texts.push_back(below[c].text);
      }
      node.text = with_error_context(fmt::format("summarizing '{}' level {} group {}", tree.doc_id, level, g),
                                     [&] { return summarizer.ask(summarizer_prompt(texts)); });
    });
    tree.levels.push_back(std::move(nodes));
  } while (tree.levels.back().size() > 1);
  return tree;
}

std::vector<std::string> summary_context(const SummaryTree& tree) {
  std::vector<std::string> parts{tree.root().text};
  const auto& detail = tree.depth() >= 2 ? tree.levels[1] : tree.levels[0];
  for (const auto& node : detail) parts.push_back(node.text);
  return parts;
}

std::string summary_query_prompt(const SummaryTree& tree, const std::string& query, const std::string& instruction) {
  return instruction + "\nContext:" + context_block(summary_context(tree)) + "\nQuery:" + query;
}

std::string query_summary(const SummaryTree& tree, const std::string& query, const ChatEndpoint& responder,
                          const std::string& instruction) {
  return responder.ask(summary_query_prompt(tree, query, instruction));
}

std::string serialize_tree(const SummaryTree& tree) {
  json levels = json::array();
  for (const auto& level : tree.levels) {
    json nodes = json::array();
    for (const auto& n : level) nodes.push_back({{"summary_text", n.text}, {"child_indices", n.child_indices}});
    levels.push_back(std::move(nodes));
  }
  json doc{{"version", kSummaryTreeFormatVersion},
           {"doc_id", tree.doc_id},
           {"b", tree.branching_factor},
           {"levels", std::move(levels)}};
  return doc.dump(1) + "\n";
}

SummaryTree deserialize_tree(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("tree file is corrupt: {}", e.what()));
  }
  try {
    if (doc.at("version").get<int>() != kSummaryTreeFormatVersion) {
      throw LoadError(fmt::format("tree file: unsupported field 'version' = {}", doc["version"].dump()));
    }
    SummaryTree tree;
    tree.doc_id = doc.at("doc_id").get<std::string>();
    tree.branching_factor = doc.at("b").get<std::size_t>();
    for (const auto& level : doc.at("levels")) {
      auto& nodes = tree.levels.emplace_back();
      for (const auto& n : level) {
        nodes.push_back(SummaryNode{n.at("summary_text").get<std::string>(),
                                    n.at("child_indices").get<std::vector<std::size_t>>()});
      }
    }
    tree.validate();
    return tree;
  } catch (const json::exception& e) {
    throw LoadError(fmt::format("tree file is malformed: {}", e.what()));
  }
}

void save_tree(const SummaryTree& tree, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_tree(tree));
}

SummaryTree load_tree(const std::filesystem::path& path) {
  return with_error_context(path.string(), [&] { return deserialize_tree(read_text_file(path)); });
}

}  // namespace agentrag
