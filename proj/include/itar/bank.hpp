#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itar/corpus.hpp"
#include "itar/matrix.hpp"

namespace itar {

enum class TopicLabel { good, bad, neutral };

std::string_view to_string(TopicLabel label);
TopicLabel topic_label_from_string(std::string_view s);

struct BankEntry {
  std::string id;
  TopicLabel label = TopicLabel::good;
  int source_iteration = 0;
  double coherence = 0.0;
  Vector column;  // over the vocabulary the bank is bound to

  bool operator==(const BankEntry& other) const {
    return id == other.id && label == other.label && source_iteration == other.source_iteration &&
           coherence == other.coherence && column == other.column;
  }
};

// Probabilities below this are dropped when a column is stored.
inline constexpr double kBankProbabilityFloor = 1e-9;

// Drops entries below kBankProbabilityFloor and renormalizes. Applying it
// twice gives the same bits, so a column read back from disk equals the one
// that was stored.
Vector canonical_bank_column(const Eigen::Ref<const Vector>& column);

// Append-only store of labeled topic columns. Entries are never edited; a
// later entry with a different id supersedes nothing, it is simply another
// column.
class TopicBank {
 public:
  TopicBank() = default;
  explicit TopicBank(std::size_t vocab_size) : vocab_size_(vocab_size) {}

  // Stores a canonical copy of the column. Throws DataError on a duplicate id,
  // a neutral label, or a column of the wrong length.
  const BankEntry& append(BankEntry entry);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<BankEntry>& entries() const noexcept { return entries_; }
  std::size_t count(TopicLabel label) const;
  const BankEntry* find(std::string_view id) const;

  // Columns with the given label, in insertion order (W x K).
  Matrix columns(TopicLabel label) const;
  std::vector<std::string> ids(TopicLabel label) const;

  bool operator==(const TopicBank&) const = default;

 private:
  std::size_t vocab_size_ = 0;
  std::vector<BankEntry> entries_;
};

// One JSON object per line:
//   {"id", "label", "source_iteration", "coherence", "column": {surface: prob}}
std::string bank_entry_to_json(const BankEntry& entry, const Vocabulary& vocab);
// Surfaces missing from `vocab` are dropped before renormalizing.
BankEntry bank_entry_from_json(std::string_view line, const Vocabulary& vocab);

void write_bank(std::ostream& out, const TopicBank& bank, const Vocabulary& vocab);
void write_bank(const std::filesystem::path& path, const TopicBank& bank, const Vocabulary& vocab);
TopicBank read_bank(std::istream& in, const Vocabulary& vocab, const std::string& source_name = "<stream>");
TopicBank read_bank(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace itar
