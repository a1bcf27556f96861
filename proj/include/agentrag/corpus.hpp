#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace agentrag {

struct Document {
  std::string doc_id;
  std::string title;
  /// One or two sentences; the top-level agent indexes documents by it.
  std::string description;
  std::string body;
  std::filesystem::path source_path;
};

/// Half-open interval [start, end) of token positions.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::string text;
  TokenSpan token_span;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingConfig {
  std::size_t chunk_size = 1024;
  std::size_t overlap = 200;

  /// Throws ValidationError unless 0 < chunk_size and overlap < chunk_size.
  void validate() const;
};

/// Checks the Document invariants (non-blank body, description and id).
void validate_document(const Document& doc);

/// Reads a JSON manifest `[{"doc_id","title","description","path"}, ...]`.
/// Relative paths are resolved against the manifest's directory.
std::vector<Document> load_corpus(const std::filesystem::path& manifest_path);

/// Splits on Unicode whitespace (UTF-8 input). Never yields empty tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Tokens joined by single spaces.
std::string detokenize(const std::vector<std::string>& tokens, TokenSpan span);

/// Number of chunks `chunk_document` yields for `token_count` tokens.
std::size_t chunk_count(std::size_t token_count, const ChunkingConfig& cfg);

std::string make_chunk_id(std::string_view doc_id, std::size_t ordinal);

/// Sliding token windows of `chunk_size` advancing by `chunk_size - overlap`.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg);

}  // namespace agentrag
