#include "itar/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

TokenId Vocabulary::intern(std::string_view surface) {
  std::string key(surface);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(entries_.size());
  entries_.push_back(VocabEntry{id, key, 0});
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
  return std::nullopt;
}

Corpus::Corpus(Vocabulary vocabulary, std::vector<Document> documents)
    : vocabulary_(std::move(vocabulary)), documents_(std::move(documents)) {
  const auto W = static_cast<TokenId>(vocabulary_.size());
  std::vector<std::int64_t> df(vocabulary_.size(), 0);
  has_sequences_ = !documents_.empty();
  for (auto& doc : documents_) {
    std::int64_t length = 0;
    std::unordered_set<TokenId> seen;
    for (const auto& [token, count] : doc.bow) {
      if (token < 0 || token >= W) throw DataError("document '" + doc.id + "': token id out of range");
      if (count <= 0) throw DataError("document '" + doc.id + "': nonpositive count");
      if (!seen.insert(token).second) throw DataError("document '" + doc.id + "': duplicate token in bow");
      length += count;
      ++df[static_cast<std::size_t>(token)];
    }
    if (doc.sequence) {
      std::unordered_map<TokenId, std::int64_t> counts;
      for (TokenId t : *doc.sequence) ++counts[t];
      bool same = counts.size() == doc.bow.size();
      for (const auto& [token, count] : doc.bow) {
        auto it = counts.find(token);
        same = same && it != counts.end() && it->second == count;
      }
      if (!same) throw DataError("document '" + doc.id + "': sequence does not match bag of words");
    } else {
      has_sequences_ = false;
    }
    doc.length = length;
    total_tokens_ += length;
  }
  for (std::size_t w = 0; w < df.size(); ++w) vocabulary_.set_df(static_cast<TokenId>(w), df[w]);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line, line_no);
    pos = end + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

Corpus parse_bow_text(std::string_view text, const std::string& source_name) {
  Vocabulary vocab;
  std::vector<Document> docs;
  std::unordered_set<std::string> doc_ids;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (is_blank(line)) return;
    auto fields = split_ws(line);
    if (fields.size() < 2) throw ParseError(source_name, line_no, "document has no tokens");
    Document doc;
    doc.id = std::string(fields[0]);
    if (doc.id.find(':') != std::string::npos) throw ParseError(source_name, line_no, "':' in document id");
    if (!doc_ids.insert(doc.id).second) throw ParseError(source_name, line_no, "duplicate doc_id '" + doc.id + "'");
    std::unordered_set<TokenId> seen;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto field = fields[i];
      const auto colon = field.rfind(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == field.size()) {
        throw ParseError(source_name, line_no, "malformed field '" + std::string(field) + "'");
      }
      const auto surface = field.substr(0, colon);
      const auto count_text = field.substr(colon + 1);
      if (surface.find(':') != std::string_view::npos) {
        throw ParseError(source_name, line_no, "malformed field '" + std::string(field) + "'");
      }
      std::int64_t count = 0;
      const char* first = count_text.data();
      const char* last = first + count_text.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, count);
      if (ec != std::errc() || ptr != last) {
        throw ParseError(source_name, line_no, "non-integer count '" + std::string(count_text) + "'");
      }
      if (count <= 0) throw ParseError(source_name, line_no, "nonpositive count");
      const TokenId id = vocab.intern(surface);
      if (!seen.insert(id).second) {
        throw ParseError(source_name, line_no, "token '" + std::string(surface) + "' repeated in document");
      }
      doc.bow.push_back({id, count});
    }
    docs.push_back(std::move(doc));
  });
  return Corpus(std::move(vocab), std::move(docs));
}

Corpus parse_bow(const std::filesystem::path& path) { return parse_bow_text(read_file(path), path.string()); }

Corpus parse_sequences_text(std::string_view text, const std::string& source_name) {
  Vocabulary vocab;
  std::vector<Document> docs;
  std::unordered_set<std::string> doc_ids;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (is_blank(line)) return;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(source_name, line_no, "missing tab separator");
    Document doc;
    doc.id = std::string(line.substr(0, tab));
    if (doc.id.empty()) throw ParseError(source_name, line_no, "empty document id");
    if (!doc_ids.insert(doc.id).second) throw ParseError(source_name, line_no, "duplicate doc_id '" + doc.id + "'");
    auto lemmas = split_ws(line.substr(tab + 1));
    if (lemmas.empty()) throw ParseError(source_name, line_no, "empty token list");

    std::vector<TokenId> sequence;
    sequence.reserve(lemmas.size());
    std::unordered_map<TokenId, std::size_t> slot;
    for (auto lemma : lemmas) {
      const TokenId id = vocab.intern(lemma);
      sequence.push_back(id);
      auto [it, inserted] = slot.emplace(id, doc.bow.size());
      if (inserted) doc.bow.push_back({id, 0});
      ++doc.bow[it->second].count;
    }
    doc.sequence = std::move(sequence);
    docs.push_back(std::move(doc));
  });
  return Corpus(std::move(vocab), std::move(docs));
}

Corpus parse_sequences(const std::filesystem::path& path) {
  return parse_sequences_text(read_file(path), path.string());
}

namespace {

// One filtering pass; returns nullopt when nothing would change.
std::optional<Corpus> filter_once(const Corpus& corpus, std::int64_t df_min, double df_max,
                                  FilterReport& report) {
  const auto& vocab = corpus.vocabulary();
  const double num_docs = static_cast<double>(corpus.num_documents());
  std::vector<TokenId> remap(vocab.size(), -1);
  Vocabulary kept;
  std::size_t removed = 0;
  for (const auto& entry : vocab.entries()) {
    const bool too_rare = entry.df < df_min;
    const bool too_common = num_docs > 0 && static_cast<double>(entry.df) / num_docs > df_max;
    if (too_rare || too_common) {
      ++removed;
      continue;
    }
    remap[static_cast<std::size_t>(entry.id)] = kept.intern(entry.surface);
  }
  if (removed == 0) return std::nullopt;
  if (kept.empty()) throw DataError("empty vocabulary after filtering");

  std::vector<Document> docs;
  docs.reserve(corpus.num_documents());
  std::size_t dropped = 0;
  for (const auto& doc : corpus.documents()) {
    Document out;
    out.id = doc.id;
    for (const auto& tc : doc.bow) {
      const TokenId id = remap[static_cast<std::size_t>(tc.token)];
      if (id >= 0) out.bow.push_back({id, tc.count});
    }
    if (out.bow.empty()) {
      ++dropped;
      continue;
    }
    if (doc.sequence) {
      std::vector<TokenId> seq;
      for (TokenId t : *doc.sequence) {
        const TokenId id = remap[static_cast<std::size_t>(t)];
        if (id >= 0) seq.push_back(id);
      }
      out.sequence = std::move(seq);
    }
    docs.push_back(std::move(out));
  }
  report.tokens_removed += removed;
  report.documents_dropped += dropped;
  return Corpus(std::move(kept), std::move(docs));
}

}  // namespace

Corpus filter_vocabulary(const Corpus& corpus, std::int64_t df_min, double df_max, FilterReport* report) {
  if (df_min < 1) throw std::invalid_argument("df_min must be >= 1");
  if (!(df_max > 0.0 && df_max <= 1.0)) throw std::invalid_argument("df_max must be in (0, 1]");

  FilterReport local;
  Corpus current = corpus;
  while (auto next = filter_once(current, df_min, df_max, local)) {
    current = std::move(*next);
    ++local.passes;
  }
  if (local.documents_dropped > 0) {
    spdlog::info("vocabulary filter dropped {} empty documents", local.documents_dropped);
  }
  if (report) *report = local;
  return current;
}

CooccurrenceStats::CooccurrenceStats(const Corpus& corpus)
    : doc_count_(static_cast<std::int64_t>(corpus.num_documents())), postings_(corpus.vocab_size()) {
  if (corpus.num_documents() == 0) throw std::invalid_argument("co-occurrence needs a nonempty corpus");
  std::int32_t d = 0;
  for (const auto& doc : corpus.documents()) {
    for (const auto& tc : doc.bow) postings_[static_cast<std::size_t>(tc.token)].push_back(d);
    ++d;
  }
  // Documents are visited in order, so every posting list is already sorted.
}

std::int64_t CooccurrenceStats::token_doc_freq(TokenId w) const {
  return static_cast<std::int64_t>(postings_.at(static_cast<std::size_t>(w)).size());
}

std::int64_t CooccurrenceStats::pair_doc_freq(TokenId a, TokenId b) const {
  const auto& pa = postings_.at(static_cast<std::size_t>(a));
  const auto& pb = postings_.at(static_cast<std::size_t>(b));
  if (a == b) return static_cast<std::int64_t>(pa.size());
  std::int64_t n = 0;
  auto i = pa.begin();
  auto j = pb.begin();
  while (i != pa.end() && j != pb.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

CooccurrenceStats build_cooccurrence(const Corpus& corpus) { return CooccurrenceStats(corpus); }

std::vector<double> unigram_distribution(const Corpus& corpus) {
  if (corpus.total_tokens() <= 0) throw std::invalid_argument("unigram distribution of an empty corpus");
  std::vector<double> p(corpus.vocab_size(), 0.0);
  for (const auto& doc : corpus.documents()) {
    for (const auto& tc : doc.bow) p[static_cast<std::size_t>(tc.token)] += static_cast<double>(tc.count);
  }
  const double n = static_cast<double>(corpus.total_tokens());
  for (auto& v : p) v /= n;
  return p;
}

}  // namespace itar
