#include "itar/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "itar/error.hpp"
#include "itar/model.hpp"

namespace itar {

namespace {

// --- little-endian primitives ---------------------------------------------

template <typename T>
void put(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw DataError("truncated corpus file");
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
  return static_cast<T>(u);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw DataError("truncated corpus file");
  return s;
}

// --- enum names -------------------------------------------------------------

template <typename E, std::size_t N>
E enum_from(const std::array<std::pair<E, const char*>, N>& names, const std::string& s, const char* what) {
  for (const auto& [e, n] : names)
    if (s == n) return e;
  throw ConfigError(fmt::format("unknown {} '{}'", what, s));
}

template <typename E, std::size_t N>
const char* enum_name(const std::array<std::pair<E, const char*>, N>& names, E e) {
  for (const auto& [v, n] : names)
    if (v == e) return n;
  return "";
}

constexpr std::array<std::pair<TauMode, const char*>, 2> kTauModes{
    {{TauMode::absolute, "absolute"}, {TauMode::relative, "relative"}}};
constexpr std::array<std::pair<Side, const char*>, 3> kSides{
    {{Side::phi, "phi"}, {Side::theta, "theta"}, {Side::both, "both"}}};
constexpr std::array<std::pair<TopicSelector, const char*>, 4> kSelectors{{{TopicSelector::all, "all"},
                                                                           {TopicSelector::domain, "domain"},
                                                                           {TopicSelector::background, "background"},
                                                                           {TopicSelector::free, "free"}}};
constexpr std::array<std::pair<BankTarget, const char*>, 3> kTargets{
    {{BankTarget::none, "none"}, {BankTarget::good, "good"}, {BankTarget::bad, "bad"}}};
constexpr std::array<std::pair<LabelingMode, const char*>, 2> kLabeling{
    {{LabelingMode::automatic, "automatic"}, {LabelingMode::interactive, "interactive"}}};
constexpr std::array<std::pair<TopicRole, const char*>, 3> kRoles{
    {{TopicRole::domain, "domain"}, {TopicRole::background, "background"}, {TopicRole::fixed, "fixed"}}};

// Runs `fn`, turning JSON access errors into `Error` with a context prefix.
template <typename Error, typename Fn>
auto guarded(const char* context, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("{}: {}", context, e.what()));
  }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* context) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", context));
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", context, k));
  }
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

Json matrix_columns(const Matrix& m) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Json col = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) col.push_back(m(r, c));
    cols.push_back(std::move(col));
  }
  return cols;
}

Matrix matrix_from_columns(const Json& cols, Eigen::Index rows) {
  Matrix m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (static_cast<Eigen::Index>(cols[c].size()) != rows) throw DataError("ragged matrix column");
    for (Eigen::Index r = 0; r < rows; ++r) m(r, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(r)].get<double>();
  }
  return m;
}

}  // namespace

// --- binary corpus ------------------------------------------------------------

void write_corpus_binary(std::ostream& out, const Corpus& corpus) {
  out.write(kCorpusMagic, sizeof(kCorpusMagic));
  put<std::uint32_t>(out, kCorpusFormatVersion);
  put<std::uint32_t>(out, corpus.has_sequences() ? 1u : 0u);
  put<std::uint64_t>(out, corpus.vocab_size());
  for (const auto& e : corpus.vocabulary().entries()) put_string(out, e.surface);
  put<std::uint64_t>(out, corpus.num_documents());
  for (const auto& doc : corpus.documents()) {
    put_string(out, doc.id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(doc.bow.size()));
    for (const auto& tc : doc.bow) {
      put<std::int32_t>(out, tc.token);
      put<std::int64_t>(out, tc.count);
    }
    if (corpus.has_sequences()) {
      put<std::uint64_t>(out, doc.sequence->size());
      for (TokenId t : *doc.sequence) put<std::int32_t>(out, t);
    }
  }
  if (!out) throw DataError("failed to write corpus");
}

void write_corpus_binary(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_corpus_binary(out, corpus);
}

Corpus read_corpus_binary(std::istream& in) {
  char magic[sizeof(kCorpusMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCorpusMagic, sizeof(magic)) != 0) {
    throw DataError("not a binary corpus (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCorpusFormatVersion) {
    throw DataError(fmt::format("unsupported corpus format version {} (expected {})", version, kCorpusFormatVersion));
  }
  const bool sequences = (get<std::uint32_t>(in) & 1u) != 0;
  Vocabulary vocab;
  const auto W = get<std::uint64_t>(in);
  for (std::uint64_t w = 0; w < W; ++w) {
    const auto surface = get_string(in);
    if (vocab.intern(surface) != static_cast<TokenId>(w)) throw DataError("duplicate surface in corpus vocabulary");
  }
  const auto D = get<std::uint64_t>(in);
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(D));
  for (std::uint64_t d = 0; d < D; ++d) {
    Document doc;
    doc.id = get_string(in);
    const auto nnz = get<std::uint32_t>(in);
    doc.bow.reserve(nnz);
    for (std::uint32_t i = 0; i < nnz; ++i) {
      TermCount tc;
      tc.token = get<std::int32_t>(in);
      tc.count = get<std::int64_t>(in);
      doc.length += tc.count;
      doc.bow.push_back(tc);
    }
    if (sequences) {
      const auto n = get<std::uint64_t>(in);
      std::vector<TokenId> seq(static_cast<std::size_t>(n));
      for (auto& t : seq) t = get<std::int32_t>(in);
      doc.sequence = std::move(seq);
    }
    docs.push_back(std::move(doc));
  }
  // The constructor re-validates every invariant and recomputes df.
  return Corpus(std::move(vocab), std::move(docs));
}

Corpus read_corpus_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_corpus_binary(in);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[sizeof(kCorpusMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() == sizeof(magic) && std::memcmp(magic, kCorpusMagic, sizeof(magic)) == 0) {
    return read_corpus_binary(path);
  }
  in.clear();
  in.seekg(0);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    return line.find('\t') != std::string::npos ? parse_sequences(path) : parse_bow(path);
  }
  return parse_bow(path);
}

// --- phi ------------------------------------------------------------------------

void write_phi_tsv(std::ostream& out, const Matrix& phi, const Vocabulary& vocab) {
  if (static_cast<std::size_t>(phi.rows()) != vocab.size()) throw DataError("phi does not match the vocabulary");
  out << "token";
  for (Eigen::Index t = 0; t < phi.cols(); ++t) out << "\tt" << t;
  out << '\n';
  for (Eigen::Index w = 0; w < phi.rows(); ++w) {
    out << vocab.surface(static_cast<TokenId>(w));
    for (Eigen::Index t = 0; t < phi.cols(); ++t) out << '\t' << fmt::format("{:.9g}", phi(w, t));
    out << '\n';
  }
}

void write_phi_tsv(const std::filesystem::path& path, const Matrix& phi, const Vocabulary& vocab) {
  std::ostringstream out;
  write_phi_tsv(out, phi, vocab);
  write_file_atomic(path, out.str());
}

Matrix read_phi_tsv(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path.string(), 1, "empty phi file");
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return fields;
  };
  const auto header = split(lines[0]);
  if (header.size() < 2 || header[0] != "token") throw ParseError(path.string(), 1, "expected a token<TAB>t0... header");
  const auto topics = static_cast<Eigen::Index>(header.size() - 1);
  Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), topics);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i]);
    if (fields.size() != header.size()) throw ParseError(path.string(), i + 1, "wrong number of columns");
    const auto id = vocab.find(fields[0]);
    if (!id) continue;
    for (Eigen::Index t = 0; t < topics; ++t) {
      try {
        phi(*id, t) = std::stod(fields[static_cast<std::size_t>(t) + 1]);
      } catch (const std::exception&) {
        throw ParseError(path.string(), i + 1, "bad probability '" + fields[static_cast<std::size_t>(t) + 1] + "'");
      }
    }
  }
  for (Eigen::Index t = 0; t < topics; ++t) {
    Vector col = phi.col(t);
    normalize_in_place(col);
    phi.col(t) = col;
  }
  return phi;
}

// --- files ----------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw DataError(fmt::format("cannot write {}: {}", tmp.string(), std::strerror(errno)));
  std::size_t done = 0;
  while (done < content.size()) {
    const auto n = ::write(fd, content.data() + done, content.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw DataError(fmt::format("cannot write {}: {}", tmp.string(), std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path);
}

void append_line_durable(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw DataError(fmt::format("cannot append to {}: {}", path.string(), std::strerror(errno)));
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw DataError(fmt::format("cannot append to {}: {}", path.string(), std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// --- thresholds -----------------------------------------------------------------

Json to_json(const Thresholds& t) {
  return Json{{"theta_good", t.theta_good}, {"theta_bad", t.theta_bad}, {"source", t.source}};
}

Thresholds thresholds_from_json(const Json& j) {
  return guarded<ConfigError>("thresholds", [&] {
    Thresholds t;
    t.theta_good = j.at("theta_good").get<double>();
    t.theta_bad = j.at("theta_bad").get<double>();
    t.source = j.value("source", std::string());
    if (t.theta_bad > t.theta_good) throw ConfigError("thresholds: theta_bad is above theta_good");
    return t;
  });
}

Json to_json(const ThresholdSet& t) {
  Json j = Json::object();
  if (t.toptoken) j["toptoken"] = to_json(*t.toptoken);
  if (t.intratext) j["intratext"] = to_json(*t.intratext);
  return j;
}

ThresholdSet threshold_set_from_json(const Json& j) {
  reject_unknown(j, {"toptoken", "intratext"}, "thresholds");
  ThresholdSet t;
  if (j.contains("toptoken")) t.toptoken = thresholds_from_json(j.at("toptoken"));
  if (j.contains("intratext")) t.intratext = thresholds_from_json(j.at("intratext"));
  return t;
}

// --- itar config ----------------------------------------------------------------

Json to_json(const ItarConfig& c) {
  return Json{{"topics", c.topics},
              {"max_iterations", c.max_iterations},
              {"thresholds", to_json(c.thresholds)},
              {"tau_fix", c.tau_fix},
              {"tau_sift_bad", c.tau_sift_bad},
              {"tau_sift_good", c.tau_sift_good},
              {"sift_version", to_string(c.sift_version)},
              {"ablation", c.ablation.name()},
              {"stop_good_fraction", c.stop_good_fraction},
              {"criterion", to_string(c.criterion)},
              {"labeling_mode", enum_name(kLabeling, c.labeling_mode)},
              {"em_iterations", c.em_iterations},
              {"sparse_tau", c.sparse_tau},
              {"decorrelation_tau", c.decorrelation_tau},
              {"top_k", c.top_k},
              {"workers", c.workers}};
}

ItarConfig itar_config_from_json(const Json& j, ItarConfig c) {
  reject_unknown(j,
                 {"topics", "max_iterations", "thresholds", "tau_fix", "tau_sift_bad", "tau_sift_good", "tau_sift",
                  "sift_version", "ablation", "stop_good_fraction", "criterion", "labeling_mode", "em_iterations",
                  "sparse_tau", "decorrelation_tau", "top_k", "workers"},
                 "itar");
  return guarded<ConfigError>("itar", [&] {
    if (j.contains("topics")) c.topics = j.at("topics").get<int>();
    if (j.contains("max_iterations")) c.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("thresholds")) c.thresholds = threshold_set_from_json(j.at("thresholds"));
    if (j.contains("tau_fix")) c.tau_fix = j.at("tau_fix").get<double>();
    if (j.contains("tau_sift")) c.tau_sift_bad = c.tau_sift_good = j.at("tau_sift").get<double>();
    if (j.contains("tau_sift_bad")) c.tau_sift_bad = j.at("tau_sift_bad").get<double>();
    if (j.contains("tau_sift_good")) c.tau_sift_good = j.at("tau_sift_good").get<double>();
    if (j.contains("sift_version")) c.sift_version = sift_version_from_string(j.at("sift_version").get<std::string>());
    if (j.contains("ablation")) c.ablation = AblationFlags::parse(j.at("ablation").get<std::string>());
    if (j.contains("stop_good_fraction")) c.stop_good_fraction = j.at("stop_good_fraction").get<double>();
    if (j.contains("criterion")) c.criterion = quality_criterion_from_string(j.at("criterion").get<std::string>());
    if (j.contains("labeling_mode")) {
      c.labeling_mode = enum_from(kLabeling, j.at("labeling_mode").get<std::string>(), "labeling mode");
    }
    if (j.contains("em_iterations")) c.em_iterations = j.at("em_iterations").get<int>();
    if (j.contains("sparse_tau")) c.sparse_tau = j.at("sparse_tau").get<double>();
    if (j.contains("decorrelation_tau")) c.decorrelation_tau = j.at("decorrelation_tau").get<double>();
    if (j.contains("top_k")) c.top_k = j.at("top_k").get<int>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    return c;
  });
}

// --- records --------------------------------------------------------------------

Json to_json(const IterationRecord& r) {
  Json topics = Json::array();
  for (const auto& t : r.topics) {
    topics.push_back(Json{{"topic", t.topic},
                          {"role", t.role},
                          {"bank_ref", t.bank_ref},
                          {"label", t.label},
                          {"human", t.human},
                          {"degenerate", t.degenerate},
                          {"coherence_toptoken", t.coherence_toptoken},
                          {"coherence_intra", optional_json(t.coherence_intra)}});
  }
  return Json{{"iteration", r.iteration},
              {"seed", r.seed},
              {"topics", std::move(topics)},
              {"good_added", r.good_added},
              {"bad_added", r.bad_added},
              {"bank_good", r.bank_good},
              {"bank_bad", r.bank_bad},
              {"perplexity", r.perplexity},
              {"coherence", r.coherence},
              {"good_percent", r.good_percent},
              {"diversity", r.diversity},
              {"bad_percent_cumulative", r.bad_percent_cumulative},
              {"density_toptoken", optional_json(r.density_toptoken)},
              {"density_toptoken_at_intra", optional_json(r.density_toptoken_at_intra)},
              {"stop", r.stop},
              {"stop_reason", r.stop_reason}};
}

IterationRecord iteration_record_from_json(const Json& j) {
  return guarded<DataError>("iteration record", [&] {
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("topics")) {
      TopicOutcome o;
      o.topic = t.at("topic").get<int>();
      o.role = t.at("role").get<std::string>();
      o.bank_ref = t.at("bank_ref").get<std::string>();
      o.label = t.at("label").get<std::string>();
      o.human = t.at("human").get<bool>();
      o.degenerate = t.at("degenerate").get<bool>();
      o.coherence_toptoken = t.at("coherence_toptoken").get<double>();
      o.coherence_intra = optional_from(t, "coherence_intra");
      r.topics.push_back(std::move(o));
    }
    r.good_added = j.at("good_added").get<int>();
    r.bad_added = j.at("bad_added").get<int>();
    r.bank_good = j.at("bank_good").get<int>();
    r.bank_bad = j.at("bank_bad").get<int>();
    r.perplexity = j.at("perplexity").get<double>();
    r.coherence = j.at("coherence").get<double>();
    r.good_percent = j.at("good_percent").get<double>();
    r.diversity = j.at("diversity").get<double>();
    r.bad_percent_cumulative = j.at("bad_percent_cumulative").get<double>();
    r.density_toptoken = optional_from(j, "density_toptoken");
    r.density_toptoken_at_intra = optional_from(j, "density_toptoken_at_intra");
    r.stop = j.at("stop").get<bool>();
    r.stop_reason = j.at("stop_reason").get<std::string>();
    return r;
  });
}

std::vector<IterationRecord> read_history(const std::filesystem::path& path) {
  std::vector<IterationRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      out.push_back(iteration_record_from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const DataError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

void write_history(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
  std::string text;
  for (const auto& r : history) text += to_json(r).dump() + "\n";
  write_file_atomic(path, text);
}

Json to_json(const TopicCard& c) {
  return Json{{"topic", c.topic},
              {"role", to_string(c.role)},
              {"bank_ref", c.bank_ref},
              {"top_words", c.top_words},
              {"coherence_toptoken", c.coherence_toptoken},
              {"coherence_intra", optional_json(c.coherence_intra)},
              {"degenerate", c.degenerate},
              {"size", c.size},
              {"auto_label", c.auto_label ? Json(to_string(*c.auto_label)) : Json(nullptr)}};
}

TopicCard topic_card_from_json(const Json& j) {
  return guarded<DataError>("topic card", [&] {
    TopicCard c;
    c.topic = j.at("topic").get<int>();
    c.role = enum_from(kRoles, j.at("role").get<std::string>(), "topic role");
    c.bank_ref = j.at("bank_ref").get<std::string>();
    c.top_words = j.at("top_words").get<std::vector<TokenId>>();
    c.coherence_toptoken = j.at("coherence_toptoken").get<double>();
    c.coherence_intra = optional_from(j, "coherence_intra");
    c.degenerate = j.at("degenerate").get<bool>();
    c.size = j.at("size").get<double>();
    if (!j.at("auto_label").is_null()) c.auto_label = topic_label_from_string(j.at("auto_label").get<std::string>());
    return c;
  });
}

Json to_json(const PendingIteration& p) {
  Json roles = Json::array();
  for (auto r : p.model.roles) roles.push_back(to_string(r));
  Json cards = Json::array();
  for (const auto& c : p.cards) cards.push_back(to_json(c));
  return Json{{"iteration", p.iteration},
              {"seed", p.seed},
              {"model",
               Json{{"words", p.model.num_words()},
                    {"roles", std::move(roles)},
                    {"bank_refs", p.model.bank_refs},
                    {"topic_sizes", p.model.topic_sizes},
                    {"phi", matrix_columns(p.model.phi)}}},
              {"cards", std::move(cards)},
              {"perplexity", p.perplexity},
              {"coherence", p.coherence},
              {"diversity", p.diversity},
              {"density_toptoken", optional_json(p.density_toptoken)},
              {"density_toptoken_at_intra", optional_json(p.density_toptoken_at_intra)}};
}

PendingIteration pending_iteration_from_json(const Json& j) {
  return guarded<DataError>("pending iteration", [&] {
    PendingIteration p;
    p.iteration = j.at("iteration").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    const auto& m = j.at("model");
    p.model.phi = matrix_from_columns(m.at("phi"), m.at("words").get<Eigen::Index>());
    for (const auto& r : m.at("roles")) p.model.roles.push_back(enum_from(kRoles, r.get<std::string>(), "topic role"));
    p.model.bank_refs = m.at("bank_refs").get<std::vector<std::string>>();
    p.model.topic_sizes = m.at("topic_sizes").get<std::vector<double>>();
    p.model.seed = p.seed;
    for (const auto& c : j.at("cards")) p.cards.push_back(topic_card_from_json(c));
    p.perplexity = j.at("perplexity").get<double>();
    p.coherence = j.at("coherence").get<double>();
    p.diversity = j.at("diversity").get<double>();
    p.density_toptoken = optional_from(j, "density_toptoken");
    p.density_toptoken_at_intra = optional_from(j, "density_toptoken_at_intra");
    if (p.model.roles.size() != static_cast<std::size_t>(p.model.phi.cols()) ||
        p.cards.size() != p.model.roles.size()) {
      throw DataError("pending iteration: topic counts disagree");
    }
    return p;
  });
}

// --- model specs ----------------------------------------------------------------

Json to_json(const RegularizerConfig& c) {
  Json j{{"kind", to_string(c.kind)}, {"tau", c.tau}, {"tau_mode", enum_name(kTauModes, c.tau_mode)}};
  if (c.topics == TopicSelector::list) {
    j["topics"] = c.topic_list;
  } else {
    j["topics"] = enum_name(kSelectors, c.topics);
  }
  j["side"] = enum_name(kSides, c.side);
  j["target"] = enum_name(kTargets, c.target);
  return j;
}

RegularizerConfig regularizer_config_from_json(const Json& j) {
  reject_unknown(j, {"kind", "tau", "tau_mode", "topics", "side", "target"}, "regularizer");
  return guarded<ConfigError>("regularizer", [&] {
    RegularizerConfig c;
    c.kind = regularizer_kind_from_string(j.at("kind").get<std::string>());
    c.tau = j.at("tau").get<double>();
    if (j.contains("tau_mode")) c.tau_mode = enum_from(kTauModes, j.at("tau_mode").get<std::string>(), "tau mode");
    if (j.contains("topics")) {
      if (j.at("topics").is_array()) {
        c.topics = TopicSelector::list;
        c.topic_list = j.at("topics").get<std::vector<int>>();
      } else {
        c.topics = enum_from(kSelectors, j.at("topics").get<std::string>(), "topic selector");
      }
    }
    if (j.contains("side")) c.side = enum_from(kSides, j.at("side").get<std::string>(), "side");
    if (j.contains("target")) c.target = enum_from(kTargets, j.at("target").get<std::string>(), "bank target");
    return c;
  });
}

Json to_json(const ModelSpec& s) {
  Json regs = Json::array();
  for (const auto& r : s.regularizers) regs.push_back(to_json(r));
  return Json{{"name", s.name},
              {"kind", to_string(s.kind)},
              {"topics", s.topics},
              {"runs", s.runs},
              {"background_topics", s.background_topics},
              {"regularizers", std::move(regs)},
              {"em_iterations", s.em_iterations},
              {"itar", to_json(s.itar)},
              {"bank_base", to_string(s.bank_base)},
              {"infer_iterations", s.infer_iterations}};
}

ModelSpec model_spec_from_json(const Json& j, int default_topics) {
  if (j.is_string()) return make_model_spec(model_kind_from_string(j.get<std::string>()), default_topics);
  reject_unknown(j,
                 {"name", "kind", "topics", "runs", "background_topics", "regularizers", "em_iterations", "itar",
                  "bank_base", "infer_iterations"},
                 "model");
  return guarded<ConfigError>("model", [&] {
    const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
    const int topics = j.value("topics", default_topics);
    ModelSpec s = make_model_spec(kind, topics);
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    if (j.contains("runs")) s.runs = j.at("runs").get<int>();
    if (j.contains("background_topics")) s.background_topics = j.at("background_topics").get<int>();
    if (j.contains("regularizers")) {
      s.regularizers.clear();
      for (const auto& r : j.at("regularizers")) s.regularizers.push_back(regularizer_config_from_json(r));
    }
    if (j.contains("em_iterations")) s.em_iterations = j.at("em_iterations").get<int>();
    if (j.contains("itar")) s.itar = itar_config_from_json(j.at("itar"), s.itar);
    if (j.contains("bank_base")) s.bank_base = model_kind_from_string(j.at("bank_base").get<std::string>());
    if (j.contains("infer_iterations")) s.infer_iterations = j.at("infer_iterations").get<int>();
    if (kind == ModelKind::plsa && !s.regularizers.empty()) throw ConfigError("plsa takes no regularizers");
    if (s.background_topics < 0 || s.background_topics > 1) throw ConfigError("background_topics must be 0 or 1");
    s.itar.topics = s.topics;
    return s;
  });
}

Json to_json(const RunMetrics& m) {
  return Json{{"run", m.run},
              {"seed", m.seed},
              {"perplexity", m.perplexity},
              {"coherence", m.coherence},
              {"good_percent", m.good_percent},
              {"diversity", m.diversity},
              {"good_topics", m.good_topics},
              {"degenerate_topics", m.degenerate_topics}};
}

RunMetrics run_metrics_from_json(const Json& j) {
  return guarded<DataError>("run metrics", [&] {
    RunMetrics m;
    m.run = j.at("run").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.perplexity = j.at("perplexity").get<double>();
    m.coherence = j.at("coherence").get<double>();
    m.good_percent = j.at("good_percent").get<double>();
    m.diversity = j.at("diversity").get<double>();
    m.good_topics = j.at("good_topics").get<int>();
    m.degenerate_topics = j.at("degenerate_topics").get<int>();
    return m;
  });
}

Json to_json(const SeriesSummary& s) {
  Json runs = Json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r));
  Json history = Json::array();
  for (const auto& r : s.history) history.push_back(to_json(r));
  return Json{{"name", s.name},
              {"kind", to_string(s.kind)},
              {"criterion", to_string(s.criterion)},
              {"topics", s.topics},
              {"max_iterations", s.max_iterations},
              {"runs", std::move(runs)},
              {"best_run", s.best_run},
              {"ppl_with_background", optional_json(s.ppl_with_background)},
              {"ppl_without_background", optional_json(s.ppl_without_background)},
              {"history", std::move(history)}};
}

SeriesSummary series_summary_from_json(const Json& j) {
  return guarded<DataError>("series summary", [&] {
    SeriesSummary s;
    s.name = j.at("name").get<std::string>();
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    s.criterion = quality_criterion_from_string(j.at("criterion").get<std::string>());
    s.topics = j.at("topics").get<int>();
    s.max_iterations = j.at("max_iterations").get<int>();
    for (const auto& r : j.at("runs")) s.runs.push_back(run_metrics_from_json(r));
    s.best_run = j.at("best_run").get<int>();
    s.ppl_with_background = optional_from(j, "ppl_with_background");
    s.ppl_without_background = optional_from(j, "ppl_without_background");
    for (const auto& r : j.at("history")) s.history.push_back(iteration_record_from_json(r));
    if (s.runs.empty() || s.best_run < 0 || static_cast<std::size_t>(s.best_run) >= s.runs.size()) {
      throw DataError("series summary: best_run out of range");
    }
    return s;
  });
}

// --- experiment config ------------------------------------------------------------

ExperimentConfig experiment_config_from_json(const Json& j) {
  reject_unknown(j, {"corpus", "output_dir", "topics", "runs", "criterion", "models", "thresholds", "itar", "ablation",
                     "workers"},
                 "config");
  return guarded<ConfigError>("config", [&] {
    ExperimentConfig c;
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("topics")) c.topics = j.at("topics").get<int>();
    if (j.contains("runs")) c.runs = j.at("runs").get<int>();
    if (j.contains("criterion")) c.criterion = quality_criterion_from_string(j.at("criterion").get<std::string>());
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("ablation")) c.ablation = j.at("ablation").get<bool>();
    c.itar.topics = c.topics;
    if (j.contains("itar")) c.itar = itar_config_from_json(j.at("itar"), c.itar);
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      reject_unknown(t, {"mode", "file", "pool_models", "include_plsa"}, "thresholds");
      if (t.contains("mode")) c.thresholds.mode = t.at("mode").get<std::string>();
      if (t.contains("file")) c.thresholds.file = t.at("file").get<std::string>();
      if (t.contains("pool_models")) c.thresholds.pool_models = t.at("pool_models").get<std::vector<std::string>>();
      if (t.contains("include_plsa")) c.thresholds.include_plsa = t.at("include_plsa").get<bool>();
      if (c.thresholds.mode != "pool" && c.thresholds.mode != "file") {
        throw ConfigError("thresholds.mode must be pool or file");
      }
      if (c.thresholds.mode == "file" && c.thresholds.file.empty()) throw ConfigError("thresholds.file is required");
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) {
        auto spec = model_spec_from_json(m, c.topics);
        if (!(m.is_object() && m.contains("runs")) && !is_iterative(spec.kind)) spec.runs = c.runs;
        spec.itar.workers = c.workers;
        if (is_iterative(spec.kind)) {
          // Experiment-level itar settings apply unless the model overrides them.
          auto base = c.itar;
          base.topics = spec.topics;
          base.sift_version = spec.itar.sift_version;
          if (!(j.contains("itar") && (j.at("itar").contains("tau_sift") || j.at("itar").contains("tau_sift_bad")))) {
            base.tau_sift_bad = spec.itar.tau_sift_bad;
          }
          if (!(j.contains("itar") && (j.at("itar").contains("tau_sift") || j.at("itar").contains("tau_sift_good")))) {
            base.tau_sift_good = spec.itar.tau_sift_good;
          }
          spec.itar = (m.is_object() && m.contains("itar")) ? itar_config_from_json(m.at("itar"), base) : base;
          spec.itar.workers = c.workers;
        }
        c.models.push_back(std::move(spec));
      }
    }
    return c;
  });
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace itar
