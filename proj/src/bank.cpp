#include "itar/bank.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "itar/error.hpp"

namespace itar {

using nlohmann::json;

std::string_view to_string(TopicLabel label) {
  switch (label) {
    case TopicLabel::good: return "good";
    case TopicLabel::bad: return "bad";
    case TopicLabel::neutral: return "neutral";
  }
  return "neutral";
}

TopicLabel topic_label_from_string(std::string_view s) {
  if (s == "good") return TopicLabel::good;
  if (s == "bad") return TopicLabel::bad;
  if (s == "neutral") return TopicLabel::neutral;
  throw DataError("unknown topic label '" + std::string(s) + "'");
}

Vector canonical_bank_column(const Eigen::Ref<const Vector>& column) {
  Vector out = column;
  for (Eigen::Index w = 0; w < out.size(); ++w) {
    if (!(out(w) >= kBankProbabilityFloor)) out(w) = 0.0;
  }
  const double sum = out.sum();
  if (sum <= 0.0) throw DataError("bank column has no mass above the storage floor");
  if (std::abs(sum - 1.0) > 1e-12) out /= sum;
  return out;
}

const BankEntry& TopicBank::append(BankEntry entry) {
  if (entry.label == TopicLabel::neutral) throw DataError("neutral topics are not banked");
  if (static_cast<std::size_t>(entry.column.size()) != vocab_size_) {
    throw DataError("bank column has " + std::to_string(entry.column.size()) + " entries, expected " +
                    std::to_string(vocab_size_));
  }
  if (find(entry.id) != nullptr) throw DataError("duplicate bank id '" + entry.id + "'");
  entry.column = canonical_bank_column(entry.column);
  entries_.push_back(std::move(entry));
  return entries_.back();
}

std::size_t TopicBank::count(TopicLabel label) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.label == label ? 1 : 0;
  return n;
}

const BankEntry* TopicBank::find(std::string_view id) const {
  for (const auto& e : entries_)
    if (e.id == id) return &e;
  return nullptr;
}

Matrix TopicBank::columns(TopicLabel label) const {
  Matrix out(static_cast<Eigen::Index>(vocab_size_), static_cast<Eigen::Index>(count(label)));
  Eigen::Index k = 0;
  for (const auto& e : entries_) {
    if (e.label == label) out.col(k++) = e.column;
  }
  return out;
}

std::vector<std::string> TopicBank::ids(TopicLabel label) const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.label == label) out.push_back(e.id);
  return out;
}

std::string bank_entry_to_json(const BankEntry& entry, const Vocabulary& vocab) {
  if (static_cast<std::size_t>(entry.column.size()) != vocab.size()) {
    throw DataError("bank column does not match the vocabulary size");
  }
  json column = json::object();
  for (Eigen::Index w = 0; w < entry.column.size(); ++w) {
    if (entry.column(w) >= kBankProbabilityFloor) column[vocab.surface(static_cast<TokenId>(w))] = entry.column(w);
  }
  json j = {{"id", entry.id},
            {"label", to_string(entry.label)},
            {"source_iteration", entry.source_iteration},
            {"coherence", entry.coherence},
            {"column", std::move(column)}};
  return j.dump();
}

BankEntry bank_entry_from_json(std::string_view line, const Vocabulary& vocab) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid bank entry: ") + e.what());
  }
  BankEntry entry;
  try {
    entry.id = j.at("id").get<std::string>();
    entry.label = topic_label_from_string(j.at("label").get<std::string>());
    entry.source_iteration = j.at("source_iteration").get<int>();
    entry.coherence = j.at("coherence").get<double>();
    entry.column = Vector::Zero(static_cast<Eigen::Index>(vocab.size()));
    for (const auto& [surface, prob] : j.at("column").items()) {
      if (auto id = vocab.find(surface)) entry.column(*id) = prob.get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid bank entry: ") + e.what());
  }
  entry.column = canonical_bank_column(entry.column);
  return entry;
}

void write_bank(std::ostream& out, const TopicBank& bank, const Vocabulary& vocab) {
  for (const auto& e : bank.entries()) out << bank_entry_to_json(e, vocab) << '\n';
}

void write_bank(const std::filesystem::path& path, const TopicBank& bank, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_bank(out, bank, vocab);
}

TopicBank read_bank(std::istream& in, const Vocabulary& vocab, const std::string& source_name) {
  TopicBank bank(vocab.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      bank.append(bank_entry_from_json(line, vocab));
    } catch (const DataError& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  return bank;
}

TopicBank read_bank(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_bank(in, vocab, path.string());
}

}  // namespace itar
