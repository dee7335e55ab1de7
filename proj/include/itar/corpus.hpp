#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace itar {

using TokenId = std::int32_t;

struct VocabEntry {
  TokenId id = 0;
  std::string surface;
  std::int64_t df = 0;  // number of documents containing the token

  bool operator==(const VocabEntry&) const = default;
};

// Dense token ids 0..W-1 with unique surfaces. Order is first appearance.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Returns the id of `surface`, appending a new entry with df = 0 if absent.
  TokenId intern(std::string_view surface);
  std::optional<TokenId> find(std::string_view surface) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const VocabEntry& operator[](TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }
  const std::string& surface(TokenId id) const { return (*this)[id].surface; }
  std::span<const VocabEntry> entries() const noexcept { return entries_; }

  void set_df(TokenId id, std::int64_t df) { entries_.at(static_cast<std::size_t>(id)).df = df; }

  bool operator==(const Vocabulary& other) const { return entries_ == other.entries_; }

 private:
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TermCount {
  TokenId token = 0;
  std::int64_t count = 0;

  bool operator==(const TermCount&) const = default;
};

struct Document {
  std::string id;
  std::vector<TermCount> bow;                   // unique tokens, positive counts
  std::optional<std::vector<TokenId>> sequence;  // natural word order, if known
  std::int64_t length = 0;                       // n_d = sum of bow counts

  bool operator==(const Document&) const = default;
};

// Immutable after construction; safe to share between threads.
class Corpus {
 public:
  Corpus() = default;
  Corpus(Vocabulary vocabulary, std::vector<Document> documents);

  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  std::span<const Document> documents() const noexcept { return documents_; }
  const Document& document(std::size_t d) const { return documents_.at(d); }

  std::size_t vocab_size() const noexcept { return vocabulary_.size(); }
  std::size_t num_documents() const noexcept { return documents_.size(); }
  std::int64_t total_tokens() const noexcept { return total_tokens_; }
  bool has_sequences() const noexcept { return has_sequences_; }

  bool operator==(const Corpus& other) const {
    return vocabulary_ == other.vocabulary_ && documents_ == other.documents_;
  }

 private:
  Vocabulary vocabulary_;
  std::vector<Document> documents_;
  std::int64_t total_tokens_ = 0;
  bool has_sequences_ = false;
};

// `doc_id token:count token:count ...`, one document per line.
Corpus parse_bow(const std::filesystem::path& path);
Corpus parse_bow_text(std::string_view text, const std::string& source_name = "<memory>");

// `doc_id<TAB>lemma lemma ...`, one document per line.
Corpus parse_sequences(const std::filesystem::path& path);
Corpus parse_sequences_text(std::string_view text, const std::string& source_name = "<memory>");

struct FilterReport {
  std::size_t tokens_removed = 0;
  std::size_t documents_dropped = 0;
  int passes = 0;
};

// Drops tokens with df < df_min or df/|D| > df_max, re-densifies ids and drops
// documents left empty. Repeats until nothing changes, so the result is a
// fixed point of the filter.
Corpus filter_vocabulary(const Corpus& corpus, std::int64_t df_min, double df_max,
                         FilterReport* report = nullptr);

// Document-window co-occurrence counts. Pair counts are answered from sorted
// per-token posting lists, built in one pass over the corpus.
class CooccurrenceStats {
 public:
  CooccurrenceStats() = default;
  explicit CooccurrenceStats(const Corpus& corpus);

  std::int64_t doc_count() const noexcept { return doc_count_; }
  std::size_t vocab_size() const noexcept { return postings_.size(); }
  std::int64_t token_doc_freq(TokenId w) const;
  std::int64_t pair_doc_freq(TokenId a, TokenId b) const;

 private:
  std::int64_t doc_count_ = 0;
  std::vector<std::vector<std::int32_t>> postings_;  // token -> sorted doc indices
};

CooccurrenceStats build_cooccurrence(const Corpus& corpus);

// p(w) = sum_d n_dw / n.
std::vector<double> unigram_distribution(const Corpus& corpus);

}  // namespace itar
