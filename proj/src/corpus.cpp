#include "agentrag/corpus.hpp"

#include <cstdint>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentrag/error.hpp"
#include "agentrag/util.hpp"

namespace agentrag {

namespace {

using nlohmann::json;

// Decodes one UTF-8 sequence at `pos`. Malformed bytes decode as themselves
// (length 1) so that arbitrary input still tokenizes.
char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t& length) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  const unsigned char lead = byte(pos);
  std::size_t expected = 1;
  char32_t cp = lead;
  if (lead >= 0xC0 && lead < 0xE0) {
    expected = 2;
    cp = lead & 0x1F;
  } else if (lead >= 0xE0 && lead < 0xF0) {
    expected = 3;
    cp = lead & 0x0F;
  } else if (lead >= 0xF0 && lead < 0xF8) {
    expected = 4;
    cp = lead & 0x07;
  }
  if (expected == 1 || pos + expected > text.size()) {
    length = 1;
    return lead;
  }
  for (std::size_t i = 1; i < expected; ++i) {
    const unsigned char cont = byte(pos + i);
    if ((cont & 0xC0) != 0x80) {
      length = 1;
      return lead;
    }
    cp = (cp << 6) | (cont & 0x3F);
  }
  length = expected;
  return cp;
}

// White_Space property of the Unicode Character Database.
bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::string required_string(const json& entry, const char* field, std::size_t index) {
  if (!entry.contains(field) || !entry[field].is_string()) {
    throw ValidationError(fmt::format("manifest entry {}: field '{}' must be a string", index, field));
  }
  return entry[field].get<std::string>();
}

}  // namespace

void ChunkingConfig::validate() const {
  if (chunk_size == 0) throw ValidationError("chunk_size must be positive");
  if (overlap >= chunk_size) {
    throw ValidationError(
        fmt::format("overlap ({}) must be smaller than chunk_size ({})", overlap, chunk_size));
  }
}

void validate_document(const Document& doc) {
  if (trim(doc.doc_id).empty()) throw ValidationError("document has an empty doc_id");
  if (trim(doc.body).empty()) {
    throw ValidationError(fmt::format("document '{}' has an empty body", doc.doc_id));
  }
  if (trim(doc.description).empty()) {
    throw ValidationError(fmt::format("document '{}' has an empty description", doc.doc_id));
  }
}

std::vector<Document> load_corpus(const std::filesystem::path& manifest_path) {
  const std::string raw = read_text_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("manifest '{}' is not valid JSON: {}", manifest_path.string(), e.what()));
  }
  if (!manifest.is_array()) {
    throw LoadError(fmt::format("manifest '{}' must be a JSON array", manifest_path.string()));
  }

  const auto base_dir = manifest_path.parent_path();
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const json& entry = manifest[i];
    if (!entry.is_object()) throw ValidationError(fmt::format("manifest entry {} is not an object", i));
    Document doc;
    doc.doc_id = required_string(entry, "doc_id", i);
    doc.title = required_string(entry, "title", i);
    doc.description = required_string(entry, "description", i);
    std::filesystem::path path = required_string(entry, "path", i);
    doc.source_path = path.is_relative() ? base_dir / path : path;

    if (!seen.insert(doc.doc_id).second) {
      throw ValidationError(fmt::format("duplicate doc_id '{}' in manifest", doc.doc_id));
    }
    if (!std::filesystem::is_regular_file(doc.source_path)) {
      throw LoadError(fmt::format("document file '{}' does not exist", doc.source_path.string()));
    }
    doc.body = read_text_file(doc.source_path);
    validate_document(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t token_start = 0;
  bool in_token = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t length = 1;
    const char32_t cp = decode_utf8(text, pos, length);
    if (is_unicode_space(cp)) {
      if (in_token) tokens.emplace_back(text.substr(token_start, pos - token_start));
      in_token = false;
    } else if (!in_token) {
      token_start = pos;
      in_token = true;
    }
    pos += length;
  }
  if (in_token) tokens.emplace_back(text.substr(token_start));
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens, TokenSpan span) {
  std::string out;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::size_t chunk_count(std::size_t token_count, const ChunkingConfig& cfg) {
  if (token_count <= cfg.chunk_size) return 1;
  const std::size_t stride = cfg.chunk_size - cfg.overlap;
  const std::size_t remaining = token_count - cfg.overlap;
  return (remaining + stride - 1) / stride;
}

std::string make_chunk_id(std::string_view doc_id, std::size_t ordinal) {
  return fmt::format("{}#{:05}", doc_id, ordinal);
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
  cfg.validate();
  const auto tokens = tokenize(doc.body);
  const std::size_t n = tokens.size();
  const std::size_t stride = cfg.chunk_size - cfg.overlap;
  const std::size_t count = chunk_count(n, cfg);

  std::vector<Chunk> chunks;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const TokenSpan span{i * stride, std::min(i * stride + cfg.chunk_size, n)};
    chunks.push_back(Chunk{make_chunk_id(doc.doc_id, i), doc.doc_id, i, detokenize(tokens, span), span});
  }
  return chunks;
}

}  // namespace agentrag
