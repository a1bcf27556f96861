#include "agentrag/vector_index.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw LoadError(fmt::format("index file: missing field '{}' in {}", name, where));
  }
  return obj[name];
}

std::string string_field(const json& obj, const char* name, const std::string& where) {
  const auto& v = field(obj, name, where);
  if (!v.is_string()) throw LoadError(fmt::format("index file: field '{}' in {} must be a string", name, where));
  return v.get<std::string>();
}

}  // namespace

VectorIndex::VectorIndex(std::vector<IndexEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ValidationError("vector index needs at least one entry");
  dimension_ = entries_.front().vector.dimension();
  std::unordered_set<std::string> ids;
  for (const auto& e : entries_) {
    if (!ids.insert(e.chunk_id).second) {
      throw ValidationError(fmt::format("duplicate chunk_id '{}' in vector index", e.chunk_id));
    }
    if (e.vector.dimension() != dimension_) {
      throw ValidationError(fmt::format("entry '{}' has dimension {}, index dimension is {}", e.chunk_id,
                                        e.vector.dimension(), dimension_));
    }
  }
}

std::vector<ScoredChunk> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
  if (query.dimension() != dimension_) {
    throw ValidationError(fmt::format("query dimension {} does not match index dimension {}",
                                      query.dimension(), dimension_));
  }
  std::vector<double> scores(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) scores[i] = entries_[i].vector.dot(query);

  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, entries_.size());
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return entries_[a].chunk_id < entries_[b].chunk_id;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);

  std::vector<ScoredChunk> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto& e = entries_[order[r]];
    out.push_back(ScoredChunk{e.chunk_id, e.doc_id, e.text, scores[order[r]]});
  }
  return out;
}

std::uint64_t VectorIndex::fingerprint() const {
  std::string bytes;
  for (const auto& e : entries_) {
    bytes += e.chunk_id;
    bytes += '\0';
    bytes += e.doc_id;
    bytes += '\0';
    bytes += e.text;
    bytes += '\0';
    for (double v : e.vector.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      bytes.append(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  return fnv1a64(bytes);
}

VectorIndex build_index(const std::vector<Chunk>& chunks, Embedder& embedder) {
  if (chunks.empty()) throw ValidationError("cannot build a vector index from zero chunks");
  std::unordered_set<std::string> ids;
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) {
    if (!ids.insert(c.chunk_id).second) throw ValidationError(fmt::format("duplicate chunk_id '{}'", c.chunk_id));
    texts.push_back(c.text);
  }
  auto vectors = embedder.embed_batch(texts);
  std::vector<IndexEntry> entries;
  entries.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    entries.push_back(IndexEntry{chunks[i].chunk_id, chunks[i].doc_id, chunks[i].text, std::move(vectors[i])});
  }
  return VectorIndex(std::move(entries));
}

std::vector<ScoredChunk> query(const VectorIndex& index, const std::string& query_text, std::size_t k,
                               Embedder& embedder) {
  if (k == 0) throw ValidationError("retrieval depth k must be positive");
  return index.search(embedder.embed(query_text), k);
}

std::string serialize_index(const VectorIndex& index) {
  json entries = json::array();
  for (const auto& e : index.entries()) {
    entries.push_back({{"chunk_id", e.chunk_id},
                       {"doc_id", e.doc_id},
                       {"text", e.text},
                       {"vector", std::vector<double>(e.vector.values().begin(), e.vector.values().end())}});
  }
  json doc{{"version", kVectorIndexFormatVersion}, {"dimension", index.dimension()}, {"entries", std::move(entries)}};
  return doc.dump(1) + "\n";
}

VectorIndex deserialize_index(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("index file is corrupt: {}", e.what()));
  }
  const auto& version = field(doc, "version", "document");
  if (!version.is_number_integer() || version.get<int>() != kVectorIndexFormatVersion) {
    throw LoadError(fmt::format("index file: unsupported field 'version' = {}", version.dump()));
  }
  const auto& dim = field(doc, "dimension", "document");
  if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0) {
    throw LoadError("index file: field 'dimension' must be a positive integer");
  }
  const std::size_t dimension = dim.get<std::size_t>();
  const auto& raw_entries = field(doc, "entries", "document");
  if (!raw_entries.is_array()) throw LoadError("index file: field 'entries' must be an array");

  std::vector<IndexEntry> entries;
  entries.reserve(raw_entries.size());
  for (std::size_t i = 0; i < raw_entries.size(); ++i) {
    const auto where = fmt::format("entry {}", i);
    const auto& raw = raw_entries[i];
    const auto& vec = field(raw, "vector", where);
    if (!vec.is_array() || !std::all_of(vec.begin(), vec.end(), [](const json& x) { return x.is_number(); })) {
      throw LoadError(fmt::format("index file: field 'vector' in {} must be a number array", where));
    }
    if (vec.size() != dimension) {
      throw ValidationError(fmt::format("index file: field 'vector' in {} has length {}, expected {}", where,
                                        vec.size(), dimension));
    }
    entries.push_back(IndexEntry{string_field(raw, "chunk_id", where), string_field(raw, "doc_id", where),
                                 string_field(raw, "text", where),
                                 EmbeddingVector::from_unit(vec.get<std::vector<double>>())});
  }
  return VectorIndex(std::move(entries));
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_index(index));
}

VectorIndex load_index(const std::filesystem::path& path) {
  return with_error_context(path.string(), [&] { return deserialize_index(read_text_file(path)); });
}

}  // namespace agentrag
