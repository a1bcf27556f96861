#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agentrag/corpus.hpp"
#include "agentrag/model_gateway.hpp"

namespace agentrag {

struct IndexEntry {
  std::string chunk_id;
  std::string doc_id;
  std::string text;
  EmbeddingVector vector;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct ScoredChunk {
  std::string chunk_id;
  std::string doc_id;
  std::string text;
  double score = 0.0;
};

/// Flat, exact cosine-similarity index. Immutable once constructed.
class VectorIndex {
 public:
  /// Validates: at least one entry, unique chunk ids, uniform dimension.
  explicit VectorIndex(std::vector<IndexEntry> entries);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// Top min(k, size) entries by descending cosine, ties by ascending chunk_id.
  std::vector<ScoredChunk> search(const EmbeddingVector& query, std::size_t k) const;

  /// FNV-1a over ids, texts and vector bit patterns.
  std::uint64_t fingerprint() const;

  friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

 private:
  std::vector<IndexEntry> entries_;
  std::size_t dimension_ = 0;
};

/// Embeds every chunk's text in one batch. Throws ValidationError on an empty
/// list or duplicate chunk ids.
VectorIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder);

/// Embeds `query_text` and searches.
std::vector<ScoredChunk> query(const VectorIndex& index, const std::string& query_text, std::size_t k,
                               Embedder& embedder);

inline constexpr int kVectorIndexFormatVersion = 1;

/// {"version":1,"dimension":d,"entries":[{"chunk_id","doc_id","text","vector":[...]}]}
/// Doubles are written in shortest round-trip form, so load(save(x)) == x.
std::string serialize_index(const VectorIndex& index);
VectorIndex deserialize_index(const std::string& json_text);

void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

}  // namespace agentrag
