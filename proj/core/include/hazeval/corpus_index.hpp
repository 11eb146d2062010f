#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hazeval/embedding.hpp"

namespace hazeval {

class Provider;

struct Document {
  std::string doc_id;
  std::string body;
};

struct DocumentRecord {
  std::string doc_id;
  std::string body;
  Embedding embedding;  // unit norm
};

struct RetrievalResult {
  std::string doc_id;
  double score = 0.0;  // cosine similarity
};

using EmbedFn = std::function<std::vector<Embedding>(const std::vector<std::string>&)>;

// Exact cosine search over an immutable set of documents. Concurrent reads
// are safe.
class CorpusIndex {
 public:
  // Embeds every body (in batches), normalizes, rejects duplicate ids, empty
  // bodies and inconsistent dimensions.
  static CorpusIndex build(const std::vector<Document>& docs, const EmbedFn& embed, std::size_t batch_size = 64);
  static CorpusIndex from_records(std::vector<DocumentRecord> records);

  // Top min(k, size) documents by descending cosine, ties (to 12 decimals) by doc_id.
  std::vector<RetrievalResult> retrieve(const Embedding& query, std::size_t k = 5) const;
  std::vector<RetrievalResult> retrieve(std::string_view query, const EmbedFn& embed, std::size_t k = 5) const;

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<DocumentRecord>& records() const { return records_; }
  // nullptr when absent.
  const DocumentRecord* find(std::string_view doc_id) const;

 private:
  std::vector<DocumentRecord> records_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::size_t dim_ = 0;
};

// Corpus JSONL: one {"doc_id", "body"} object per line.
std::vector<Document> read_corpus(const std::filesystem::path& path);

// Sidecar of cached document embeddings keyed by (embedder id, doc_id), one
// {"embedder", "doc_id", "embedding"} object per line.
class EmbeddingSidecar {
 public:
  explicit EmbeddingSidecar(std::filesystem::path path);
  std::optional<Embedding> get(std::string_view embedder, std::string_view doc_id) const;
  void put(std::string embedder, std::string doc_id, Embedding v);
  void save() const;

 private:
  std::filesystem::path path_;
  std::map<std::pair<std::string, std::string>, Embedding> entries_;
};

// Builds an index with `embedder`, reusing and extending the sidecar when given.
CorpusIndex build_index(const std::vector<Document>& docs, Provider& embedder, EmbeddingSidecar* sidecar = nullptr);

}  // namespace hazeval
