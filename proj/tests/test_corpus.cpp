#include <random>

#include <gtest/gtest.h>

#include "agentrag/corpus.hpp"
#include "agentrag/error.hpp"
#include "test_support.hpp"

namespace agentrag {
namespace {

using testing::TempDir;
using testing::write_text;

// Counts windows by sliding one stride at a time until the window reaches
// the end of the token sequence.
std::size_t sliding_window_count(std::size_t n, std::size_t chunk_size, std::size_t overlap) {
  const std::size_t stride = chunk_size - overlap;
  std::size_t count = 0;
  for (std::size_t start = 0;; start += stride) {
    ++count;
    if (start + chunk_size >= n) break;
  }
  return count;
}

Document doc_with_tokens(std::size_t n, std::string id = "doc") {
  Document d;
  d.doc_id = std::move(id);
  d.title = "t";
  d.description = "d";
  for (std::size_t i = 0; i < n; ++i) d.body += "t" + std::to_string(i) + (i % 7 == 0 ? "\n" : " ");
  return d;
}

TEST(Tokenize, SplitsOnAnyWhitespace) {
  EXPECT_EQ(tokenize("a  b\tc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("word"), (std::vector<std::string>{"word"}));
  EXPECT_EQ(tokenize("  lead\n\ntrail \r\n"), (std::vector<std::string>{"lead", "trail"}));
}

TEST(Tokenize, TreatsUnicodeSpacesAsSeparators) {
  // U+00A0 no-break space, U+2003 em space, U+3000 ideographic space.
  EXPECT_EQ(tokenize("a b c　d"), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(tokenize("café naïve"), (std::vector<std::string>{"café", "naïve"}));
}

TEST(ChunkDocument, TwentySixTokensSizeTenOverlapTwo) {
  const auto chunks = chunk_document(doc_with_tokens(26), {10, 2});
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].token_span, (TokenSpan{0, 10}));
  EXPECT_EQ(chunks[1].token_span, (TokenSpan{8, 18}));
  EXPECT_EQ(chunks[2].token_span, (TokenSpan{16, 26}));
}

TEST(ChunkDocument, ShortDocumentIsOneChunk) {
  const auto chunks = chunk_document(doc_with_tokens(5), {10, 2});
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].token_span, (TokenSpan{0, 5}));
  EXPECT_EQ(chunks[0].chunk_id, "doc#00000");
  EXPECT_EQ(chunks[0].text, "t0 t1 t2 t3 t4");
}

TEST(ChunkDocument, ThousandTokensMatchesSlidingWindow) {
  const auto chunks = chunk_document(doc_with_tokens(1000), {128, 16});
  EXPECT_EQ(chunks.size(), sliding_window_count(1000, 128, 16));
  EXPECT_EQ(chunks.size(), 9u);
}

TEST(ChunkCount, ClosedFormMatchesSlidingWindowOverGrid) {
  for (std::size_t n = 1; n <= 500; ++n) {
    for (std::size_t cs = 2; cs <= 64; ++cs) {
      for (std::size_t ov = 0; ov < cs; ++ov) {
        ASSERT_EQ(chunk_count(n, {cs, ov}), sliding_window_count(n, cs, ov))
            << "n=" << n << " chunk_size=" << cs << " overlap=" << ov;
      }
    }
  }
}

TEST(ChunkDocument, SpansReconstructTokensWithDeclaredOverlap) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const std::size_t cs = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
    const std::size_t ov = std::uniform_int_distribution<std::size_t>(0, cs - 1)(rng);
    const auto doc = doc_with_tokens(n);
    const auto tokens = tokenize(doc.body);
    const auto chunks = chunk_document(doc, {cs, ov});

    std::vector<std::string> rebuilt;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      ASSERT_EQ(c.ordinal, i);
      ASSERT_EQ(c.doc_id, "doc");
      ASSERT_EQ(c.text, detokenize(tokens, c.token_span));
      if (i > 0) {
        const auto& prev = chunks[i - 1].token_span;
        ASSERT_GT(c.token_span.start, prev.start);
        ASSERT_EQ(prev.end - c.token_span.start, ov) << "n=" << n << " cs=" << cs;
      }
      const std::size_t skip = i == 0 ? 0 : chunks[i - 1].token_span.end - c.token_span.start;
      for (std::size_t t = c.token_span.start + skip; t < c.token_span.end; ++t) rebuilt.push_back(tokens[t]);
    }
    ASSERT_EQ(rebuilt, tokens);
    ASSERT_EQ(chunks.back().token_span.end, n);
  }
}

TEST(ChunkDocument, IsDeterministic) {
  const auto doc = doc_with_tokens(333);
  EXPECT_EQ(chunk_document(doc, {50, 10}), chunk_document(doc, {50, 10}));
}

TEST(ChunkingConfig, RejectsOverlapNotBelowChunkSize) {
  EXPECT_THROW((ChunkingConfig{10, 10}.validate()), ValidationError);
  EXPECT_THROW((ChunkingConfig{0, 0}.validate()), ValidationError);
  EXPECT_NO_THROW((ChunkingConfig{10, 9}.validate()));
  EXPECT_NO_THROW(ChunkingConfig{}.validate());
}

TEST(LoadCorpus, ReadsEntriesInManifestOrder) {
  TempDir dir;
  write_text(dir / "docs/b.md", "# Beta\n\nSecond *document*.");
  write_text(dir / "a.txt", "First document.");
  write_text(dir / "manifest.json", R"([
    {"doc_id": "beta", "title": "Beta", "description": "Second.", "path": "docs/b.md"},
    {"doc_id": "alpha", "title": "Alpha", "description": "First.", "path": "a.txt"}
  ])");
  const auto docs = load_corpus(dir / "manifest.json");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].doc_id, "beta");
  EXPECT_EQ(docs[0].body, "# Beta\n\nSecond *document*.");
  EXPECT_EQ(docs[0].source_path, dir / "docs/b.md");
  EXPECT_EQ(docs[1].doc_id, "alpha");
  EXPECT_EQ(docs[1].description, "First.");
}

TEST(LoadCorpus, DuplicateDocIdIsValidationError) {
  TempDir dir;
  write_text(dir / "a.txt", "text");
  write_text(dir / "manifest.json", R"([
    {"doc_id": "iso26262", "title": "A", "description": "d", "path": "a.txt"},
    {"doc_id": "iso26262", "title": "B", "description": "d", "path": "a.txt"}
  ])");
  EXPECT_THROW(load_corpus(dir / "manifest.json"), ValidationError);
}

TEST(LoadCorpus, WhitespaceOnlyBodyIsValidationError) {
  TempDir dir;
  write_text(dir / "empty.md", "  \n\t\n");
  write_text(dir / "manifest.json", R"([{"doc_id": "e", "title": "E", "description": "d", "path": "empty.md"}])");
  EXPECT_THROW(load_corpus(dir / "manifest.json"), ValidationError);
}

TEST(LoadCorpus, MissingFilesAreLoadErrorsNamingThePath) {
  TempDir dir;
  try {
    load_corpus(dir / "nope.json");
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.json"), std::string::npos);
  }
  write_text(dir / "manifest.json", R"([{"doc_id": "x", "title": "X", "description": "d", "path": "gone.md"}])");
  try {
    load_corpus(dir / "manifest.json");
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("gone.md"), std::string::npos);
  }
}

TEST(LoadCorpus, RejectsMissingDescription) {
  TempDir dir;
  write_text(dir / "a.txt", "text");
  write_text(dir / "manifest.json", R"([{"doc_id": "a", "title": "A", "description": " ", "path": "a.txt"}])");
  EXPECT_THROW(load_corpus(dir / "manifest.json"), ValidationError);
}

}  // namespace
}  // namespace agentrag
