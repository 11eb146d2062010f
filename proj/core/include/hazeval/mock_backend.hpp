#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hazeval/claims.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

struct MockOptions {
  std::uint64_t seed = 0;
  std::size_t embed_dim = 256;
};

// Per-capability overrides; an empty function falls back to the built-in rule.
struct MockHandlers {
  std::function<std::string(const ChatRequest&)> chat;
  std::function<std::vector<Embedding>(const std::vector<std::string>&)> embed;
  std::function<double(std::string_view, std::string_view)> rerank;
  std::function<std::vector<TokenScore>(std::string_view, std::string_view)> score;
};

// Offline backend whose every reply is a pure function of (seed, request).
// Chat requests are routed on the lead of the first user message:
//   answer prompt   -> intro + one numbered point per abstract + confidence line
//   decomposition   -> intro and each point passed through as claims
//   detail prompt   -> gazetteer_details()
//   context claims  -> the abstract's sentences
//   judge prompt    -> rule-following labels (slot seeds > 0 flip some labels)
//   masker          -> lexicon_mask() with the builtin lexicon
//   inverse prompt  -> "What ... about <segment words>?" enumeration
//   paraphrase      -> question words rotated by one
//   anything else   -> echo
// embed: signed feature hashing of word tokens. rerank: number of distinct
// query tokens present in the passage. score: tokens found in the prompt get
// high probability, others low.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockOptions options = {}, MockHandlers handlers = {});

  std::string chat(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  double rerank(std::string_view query, std::string_view passage) override;
  std::vector<TokenScore> score(std::string_view prompt, std::string_view completion) override;

  const MockOptions& options() const { return options_; }

 private:
  std::string builtin_chat(const ChatRequest& request) const;
  MockOptions options_;
  MockHandlers handlers_;
};

// Regex gazetteer the mock applies to a claim; every returned string is a
// substring of `claim`.
SpecificDetails gazetteer_details(std::string_view claim);

// Distinct-token overlap used by the builtin reranker.
double token_overlap(std::string_view query, std::string_view passage);

// Hashed bag-of-words embedding used by the builtin embedder (not normalized).
Embedding hashed_embedding(std::string_view text, std::size_t dim, std::uint64_t seed);

}  // namespace hazeval
