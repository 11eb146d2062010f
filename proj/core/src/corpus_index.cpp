#include "hazeval/corpus_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hazeval/error.hpp"
#include "hazeval/gateway.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;

CorpusIndex CorpusIndex::from_records(std::vector<DocumentRecord> records) {
  CorpusIndex idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (trim(r.body).empty()) throw PreconditionError("document '" + r.doc_id + "' has an empty body");
    if (!idx.by_id_.emplace(r.doc_id, i).second) throw PreconditionError("duplicate doc_id '" + r.doc_id + "'");
    if (i == 0) idx.dim_ = r.embedding.size();
    if (r.embedding.size() != idx.dim_ || idx.dim_ == 0) {
      throw PreconditionError("embedding dimension mismatch for document '" + r.doc_id + "'");
    }
    r.embedding = normalized(std::move(r.embedding));
  }
  idx.records_ = std::move(records);
  return idx;
}

CorpusIndex CorpusIndex::build(const std::vector<Document>& docs, const EmbedFn& embed, std::size_t batch_size) {
  std::map<std::string, int, std::less<>> seen;
  for (const auto& d : docs) {
    if (!seen.emplace(d.doc_id, 0).second) throw PreconditionError("duplicate doc_id '" + d.doc_id + "'");
  }
  std::vector<DocumentRecord> records;
  records.reserve(docs.size());
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t b = 0; b < docs.size(); b += batch_size) {
    std::vector<std::string> texts;
    for (std::size_t i = b; i < std::min(docs.size(), b + batch_size); ++i) texts.push_back(docs[i].body);
    auto vecs = embed(texts);
    if (vecs.size() != texts.size()) throw ProviderError("embedding function returned the wrong number of vectors");
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      records.push_back({docs[b + i].doc_id, docs[b + i].body, std::move(vecs[i])});
    }
  }
  return from_records(std::move(records));
}

std::vector<RetrievalResult> CorpusIndex::retrieve(const Embedding& query, std::size_t k) const {
  if (records_.empty()) throw PreconditionError("retrieve: index is empty");
  if (k == 0) throw PreconditionError("retrieve: k must be >= 1");
  if (query.size() != dim_) throw PreconditionError("retrieve: query dimension mismatch");
  const Embedding q = normalized(query);

  std::vector<double> scores(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    scores[i] = std::clamp(dot(q, records_[i].embedding), -1.0, 1.0);
  }
  // scores equal to 12 decimals count as ties so rounding noise cannot override the doc_id order
  std::vector<double> keys(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) keys[i] = std::round(scores[i] * 1e12);
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (keys[a] != keys[b]) return keys[a] > keys[b];
                      return records_[a].doc_id < records_[b].doc_id;
                    });
  std::vector<RetrievalResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({records_[order[i]].doc_id, scores[order[i]]});
  return out;
}

std::vector<RetrievalResult> CorpusIndex::retrieve(std::string_view query, const EmbedFn& embed, std::size_t k) const {
  auto v = embed({std::string(query)});
  if (v.size() != 1) throw ProviderError("embedding function returned the wrong number of vectors");
  return retrieve(v.front(), k);
}

const DocumentRecord* CorpusIndex::find(std::string_view doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      docs.push_back({j.at("doc_id").get<std::string>(), j.at("body").get<std::string>()});
    } catch (const json::exception& e) {
      throw ConfigError("corpus " + path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

EmbeddingSidecar::EmbeddingSidecar(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      entries_[{j.at("embedder").get<std::string>(), j.at("doc_id").get<std::string>()}] =
          j.at("embedding").get<Embedding>();
    } catch (const json::exception& e) {
      throw ConfigError("embedding sidecar " + path_.string() + ": " + e.what());
    }
  }
}

std::optional<Embedding> EmbeddingSidecar::get(std::string_view embedder, std::string_view doc_id) const {
  auto it = entries_.find({std::string(embedder), std::string(doc_id)});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingSidecar::put(std::string embedder, std::string doc_id, Embedding v) {
  entries_[{std::move(embedder), std::move(doc_id)}] = std::move(v);
}

void EmbeddingSidecar::save() const {
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write embedding sidecar " + tmp);
    for (const auto& [key, v] : entries_) {
      out << json{{"embedder", key.first}, {"doc_id", key.second}, {"embedding", v}}.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path_);
}

CorpusIndex build_index(const std::vector<Document>& docs, Provider& embedder, EmbeddingSidecar* sidecar) {
  const std::string& model = embedder.model_id();
  std::vector<Document> missing;
  for (const auto& d : docs) {
    if (!sidecar || !sidecar->get(model, d.doc_id)) missing.push_back(d);
  }
  EmbedFn fn = [&](const std::vector<std::string>& texts) { return embedder.embed(texts); };
  CorpusIndex fresh = missing.empty() ? CorpusIndex{} : CorpusIndex::build(missing, fn);
  if (!sidecar) return fresh;

  for (const auto& r : fresh.records()) sidecar->put(model, r.doc_id, r.embedding);
  std::vector<DocumentRecord> all;
  all.reserve(docs.size());
  for (const auto& d : docs) all.push_back({d.doc_id, d.body, *sidecar->get(model, d.doc_id)});
  if (!missing.empty()) sidecar->save();
  return CorpusIndex::from_records(std::move(all));
}

}  // namespace hazeval
