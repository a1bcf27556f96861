#include <atomic>

#include <gtest/gtest.h>

#include "agentrag/corpus.hpp"
#include "agentrag/summary_index.hpp"
#include "test_support.hpp"

namespace agentrag {
namespace {

// Names each summary after the children it was given, so tests can see
// exactly which texts were grouped together.
class TaggingSummarizer final : public ChatModel {
 public:
  std::atomic<int> calls{0};
  int fail_on_call = -1;

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages, const CompletionParams&) override {
    const int n = calls++;
    if (n == fail_on_call) throw TransportError("summarizer unavailable");
    const std::string& prompt = messages.back().content;
    const auto body = prompt.substr(prompt.find('\n') + 1);
    std::string tag = "S(";
    std::size_t pos = 0;
    for (;;) {
      const auto next = body.find("\n\n", pos);
      tag += body.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (next == std::string::npos) break;
      tag += "+";
      pos = next + 2;
    }
    return tag + ")";
  }
};

std::vector<Chunk> leaves(std::size_t n, const std::string& doc = "doc") {
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < n; ++i) {
    Chunk c;
    c.chunk_id = make_chunk_id(doc, i);
    c.doc_id = doc;
    c.ordinal = i;
    c.text = "L" + std::to_string(i);
    out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> recursion_oracle(std::size_t n, std::size_t b) {
  std::vector<std::size_t> sizes{n};
  do {
    n = (n + b - 1) / b;
    sizes.push_back(n);
  } while (n > 1);
  return sizes;
}

struct Built {
  SummaryTree tree;
  int calls;
};

Built build(std::size_t n, std::size_t b, std::size_t parallel = 4) {
  auto model = std::make_shared<TaggingSummarizer>();
  auto tree = build_summary_tree(leaves(n), testing::endpoint(model), SummaryTreeConfig{b, parallel});
  return {std::move(tree), model->calls.load()};
}

TEST(SummaryTree, NineLeavesBranchingThree) {
  const auto [tree, calls] = build(9, 3);
  EXPECT_EQ(tree.level_sizes(), (std::vector<std::size_t>{9, 3, 1}));
  EXPECT_EQ(calls, 4);
  EXPECT_EQ(tree.root().text, "S(S(L0+L1+L2)+S(L3+L4+L5)+S(L6+L7+L8))");
}

TEST(SummaryTree, SingleLeafStillGetsARootSummary) {
  const auto [tree, calls] = build(1, 3);
  EXPECT_EQ(tree.level_sizes(), (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(tree.root().text, "S(L0)");
  EXPECT_EQ(tree.depth(), 1u);
}

TEST(SummaryTree, TenLeavesBranchingThree) {
  const auto [tree, calls] = build(10, 3);
  EXPECT_EQ(tree.level_sizes(), (std::vector<std::size_t>{10, 4, 2, 1}));
  EXPECT_EQ(calls, 7);
  EXPECT_EQ(tree.levels[1][3].text, "S(L9)");
  EXPECT_EQ(tree.levels[2][1].child_indices, (std::vector<std::size_t>{3}));
}

TEST(SummaryTree, LevelSizesFollowCeilRecursion) {
  for (std::size_t b = 2; b <= 5; ++b) {
    for (std::size_t n = 1; n <= 200; ++n) {
      const auto [tree, calls] = build(n, b, 1);
      const auto want = recursion_oracle(n, b);
      ASSERT_EQ(tree.level_sizes(), want) << "n=" << n << " b=" << b;
      ASSERT_EQ(expected_level_sizes(n, b), want);
      std::size_t above_leaves = 0;
      for (std::size_t l = 1; l < want.size(); ++l) above_leaves += want[l];
      ASSERT_EQ(static_cast<std::size_t>(calls), above_leaves);
      ASSERT_NO_THROW(tree.validate());
    }
  }
}

TEST(SummaryTree, EveryLevelPartitionsTheLeaves) {
  for (std::size_t b = 2; b <= 5; ++b) {
    for (std::size_t n : {1u, 2u, 7u, 26u, 64u, 125u, 199u}) {
      const auto [tree, calls] = build(n, b);
      for (std::size_t level = 0; level < tree.levels.size(); ++level) {
        std::size_t next = 0;
        for (std::size_t node = 0; node < tree.levels[level].size(); ++node) {
          const auto [first, last] = tree.leaf_range(level, node);
          ASSERT_EQ(first, next) << "n=" << n << " b=" << b << " level=" << level;
          ASSERT_LT(first, last);
          next = last;
          const auto& children = tree.levels[level][node].child_indices;
          if (level > 0) {
            ASSERT_GE(children.size(), 1u);
            ASSERT_LE(children.size(), b);
          }
        }
        ASSERT_EQ(next, n);
      }
    }
  }
}

TEST(SummaryTree, ParallelAndSerialBuildsAgree) {
  EXPECT_EQ(build(57, 4, 1).tree, build(57, 4, 8).tree);
}

TEST(SummaryTree, SummarizerFailureNamesLevelAndGroup) {
  auto model = std::make_shared<TaggingSummarizer>();
  model->fail_on_call = 3;
  try {
    build_summary_tree(leaves(9), testing::endpoint(model), SummaryTreeConfig{3, 1});
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("level 2 group 0"), std::string::npos) << e.what();
  }
}

TEST(SummaryTree, EmptyChunkListIsRejected) {
  auto model = std::make_shared<TaggingSummarizer>();
  EXPECT_THROW(build_summary_tree({}, testing::endpoint(model)), ValidationError);
  EXPECT_THROW(build_summary_tree(leaves(3), testing::endpoint(model), SummaryTreeConfig{1, 1}), ValidationError);
}

TEST(SummarizerPrompt, JoinsChildrenWithBlankLines) {
  EXPECT_EQ(summarizer_prompt({"a", "b"}), "Summarize the following text faithfully and concisely:\na\n\nb");
}

TEST(QuerySummary, UsesRootAndLevelOneButNeverLeaves) {
  const auto [tree, calls] = build(10, 3);
  auto responder = testing::scripted_chat({testing::rule({}, "answer")});
  EXPECT_EQ(query_summary(tree, "What is covered?", testing::endpoint(responder)), "answer");
  const auto prompt = responder->calls().at(0).prompt;
  EXPECT_NE(prompt.find(tree.root().text), std::string::npos);
  for (const auto& node : tree.levels[1]) EXPECT_NE(prompt.find("\n" + node.text + "\n"), std::string::npos);
  for (const auto& leaf : tree.levels[0]) EXPECT_EQ(prompt.find("\n" + leaf.text + "\n"), std::string::npos);
  EXPECT_NE(prompt.find("Query:What is covered?"), std::string::npos);
  EXPECT_EQ(summary_context(tree).size(), 1u + 4u);
}

TEST(QuerySummary, SingleChunkTreeShowsItsSummary) {
  const auto [tree, calls] = build(1, 10);
  const auto prompt = summary_query_prompt(tree, "q");
  EXPECT_NE(prompt.find("S(L0)"), std::string::npos);
  EXPECT_NE(prompt.find("L0"), std::string::npos);
}

TEST(QuerySummary, BuildsAndPromptsAreDeterministic) {
  auto first = testing::scripted_chat({testing::rule({}, "same summary")});
  auto second = testing::scripted_chat({testing::rule({}, "same summary")});
  const auto a = build_summary_tree(leaves(23), testing::endpoint(first), {4, 4});
  const auto b = build_summary_tree(leaves(23), testing::endpoint(second), {4, 4});
  EXPECT_EQ(a, b);
  EXPECT_EQ(summary_query_prompt(a, "q"), summary_query_prompt(b, "q"));
  auto prompts = [](const ScriptedChat& chat) {
    std::vector<std::string> out;
    for (const auto& c : chat.calls()) out.push_back(c.prompt);
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(prompts(*first), prompts(*second));
}

TEST(TreePersistence, RoundTripsAndStoresLeafTexts) {
  testing::TempDir dir;
  const auto [tree, calls] = build(11, 3);
  save_tree(tree, dir / "doc.tree.json");
  const auto loaded = load_tree(dir / "doc.tree.json");
  EXPECT_EQ(loaded, tree);
  EXPECT_EQ(loaded.levels[0][4].text, "L4");
  testing::write_text(dir / "bad.json", R"({"version": 9, "doc_id": "d", "b": 3, "levels": []})");
  EXPECT_THROW(load_tree(dir / "bad.json"), LoadError);
}

}  // namespace
}  // namespace agentrag
