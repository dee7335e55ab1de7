#include "itar/service.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

namespace {

constexpr int kPhiHead = 20;

const char* kConfigFile = "config.json";
const char* kBankFile = "bank.jsonl";
const char* kHistoryFile = "history.jsonl";
const char* kPendingFile = "pending.json";
const char* kLabelsFile = "labels.json";

ServiceResponse error_response(int status, const std::string& message, Json extra = Json::object()) {
  Json body = Json::object();
  body["error"] = message;
  for (auto& [k, v] : extra.items()) body[k] = v;
  return {status, std::move(body)};
}

std::string bank_text(const TopicBank& bank, const Vocabulary& vocab) {
  std::ostringstream out;
  write_bank(out, bank, vocab);
  return out.str();
}

}  // namespace

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::idle: return "idle";
    case SessionPhase::training: return "training";
    case SessionPhase::awaiting_labels: return "awaiting_labels";
    case SessionPhase::stopped: return "stopped";
  }
  return "";
}

std::optional<SessionConfig> read_session_config(const std::filesystem::path& dir) {
  const auto path = dir / kConfigFile;
  if (!std::filesystem::exists(path)) return std::nullopt;
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  SessionConfig c;
  try {
    c.corpus = j.at("corpus").get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  c.itar = itar_config_from_json(j.value("itar", Json::object()));
  return c;
}

// --- session ------------------------------------------------------------------

ReviewSession::ReviewSession(std::filesystem::path dir, std::shared_ptr<const Corpus> corpus, SessionConfig config)
    : dir_(std::move(dir)), corpus_(std::move(corpus)), config_(std::move(config)) {
  if (!corpus_) throw ConfigError("session needs a corpus");
  std::filesystem::create_directories(dir_);
  if (auto stored = read_session_config(dir_)) {
    config_ = std::move(*stored);
  } else {
    config_.itar.validate();
    Json j = Json::object();
    j["corpus"] = config_.corpus.string();
    j["itar"] = to_json(config_.itar);
    write_file_atomic(dir_ / kConfigFile, j.dump(2) + "\n");
  }
  config_.itar.validate();
  cooc_ = build_cooccurrence(*corpus_);
  resume();
}

ReviewSession::~ReviewSession() {
  if (worker_.joinable()) worker_.join();
}

void ReviewSession::resume() {
  const auto& vocab = corpus_->vocabulary();
  bank_ = TopicBank(vocab.size());
  if (std::filesystem::exists(dir_ / kHistoryFile)) history_ = read_history(dir_ / kHistoryFile);
  const int last = history_.empty() ? -1 : history_.back().iteration;

  if (std::filesystem::exists(dir_ / kBankFile)) {
    auto stored = read_bank(dir_ / kBankFile, vocab);
    // Entries from an iteration whose record never reached the history were
    // written by an interrupted commit; that iteration is redone.
    bool trimmed = false;
    for (const auto& e : stored.entries()) {
      if (e.source_iteration > last) {
        trimmed = true;
        continue;
      }
      bank_.append(e);
    }
    if (trimmed) {
      spdlog::warn("dropping bank entries of uncommitted iteration {}", last + 1);
      write_file_atomic(dir_ / kBankFile, bank_text(bank_, vocab));
    }
  }

  if (std::filesystem::exists(dir_ / kPendingFile)) {
    auto pending = pending_iteration_from_json(Json::parse(read_file(dir_ / kPendingFile)));
    if (pending.iteration == last + 1) {
      pending_ = std::move(pending);
    } else {
      std::filesystem::remove(dir_ / kPendingFile);
    }
  }
  if (pending_ && std::filesystem::exists(dir_ / kLabelsFile)) {
    const auto j = Json::parse(read_file(dir_ / kLabelsFile));
    if (j.at("iteration").get<int>() == pending_->iteration) {
      for (const auto& [k, v] : j.at("labels").items()) {
        labels_[std::stoi(k)] = topic_label_from_string(v.get<std::string>());
      }
    }
  }

  if (pending_) {
    phase_ = SessionPhase::awaiting_labels;
  } else if (!history_.empty() && history_.back().stop) {
    phase_ = SessionPhase::stopped;
    stop_reason_ = history_.back().stop_reason;
  } else {
    phase_ = SessionPhase::idle;
  }
}

SessionPhase ReviewSession::phase() const {
  std::lock_guard lock(mutex_);
  return phase_;
}

void ReviewSession::wait_idle() {
  std::thread worker;
  {
    std::lock_guard lock(mutex_);
    worker = std::move(worker_);
  }
  if (worker.joinable()) worker.join();
}

Json ReviewSession::card_json(const TopicCard& card) const {
  const auto& vocab = corpus_->vocabulary();
  Json words = Json::array();
  for (TokenId w : card.top_words) words.push_back(vocab.surface(w));
  const bool intra = config_.itar.criterion == QualityCriterion::intratext;
  Json j = Json::object();
  j["id"] = card.topic;
  j["role"] = to_string(card.role);
  j["bank_ref"] = card.bank_ref;
  j["top_words"] = std::move(words);
  j["coherence"] = intra ? (card.coherence_intra ? Json(*card.coherence_intra) : Json(nullptr))
                         : Json(card.coherence_toptoken);
  j["coherence_toptoken"] = card.coherence_toptoken;
  j["coherence_intra"] = card.coherence_intra ? Json(*card.coherence_intra) : Json(nullptr);
  j["degenerate"] = card.degenerate;
  j["size"] = card.size;
  j["auto_label"] = card.auto_label ? Json(to_string(*card.auto_label)) : Json(nullptr);
  const auto human = labels_.find(card.topic);
  j["human_label"] = human != labels_.end() ? Json(to_string(human->second)) : Json(nullptr);
  if (human != labels_.end()) {
    j["label"] = to_string(human->second);
  } else {
    j["label"] = card.auto_label ? Json(to_string(*card.auto_label)) : Json(nullptr);
  }
  return j;
}

Json ReviewSession::session_json() const {
  Json j = Json::object();
  j["phase"] = to_string(phase_);
  j["stop_reason"] = phase_ == SessionPhase::stopped ? Json(stop_reason_) : Json(nullptr);
  // Completed iterations; the one in training or awaiting labels is `active_iteration`.
  j["iteration"] = history_.size();
  if (phase_ == SessionPhase::training) j["active_iteration"] = training_iteration_;
  if (pending_) j["active_iteration"] = pending_->iteration;
  if (phase_ == SessionPhase::training) {
    j["job_id"] = "iteration-" + std::to_string(training_iteration_);
    j["progress"] = progress_.load();
  }
  j["criterion"] = to_string(config_.itar.criterion);
  j["ablation"] = config_.itar.ablation.name();
  Json bank = Json::object();
  bank["good"] = bank_.count(TopicLabel::good);
  bank["bad"] = bank_.count(TopicLabel::bad);
  bank["quota"] = config_.itar.good_quota();
  j["bank"] = std::move(bank);
  Json cards = Json::array();
  if (pending_) {
    for (const auto& c : pending_->cards) cards.push_back(card_json(c));
  }
  j["cards"] = std::move(cards);
  Json series = Json::array();
  for (const auto& r : history_) {
    Json point = Json::object();
    point["iteration"] = r.iteration;
    point["good_percent"] = r.good_percent;
    point["bank_good"] = r.bank_good;
    series.push_back(std::move(point));
  }
  j["history"] = std::move(series);
  if (!last_error_.empty()) j["last_error"] = last_error_;
  return j;
}

ServiceResponse ReviewSession::get_session() const {
  std::lock_guard lock(mutex_);
  return {200, session_json()};
}

ServiceResponse ReviewSession::get_history() const {
  std::lock_guard lock(mutex_);
  Json out = Json::array();
  for (const auto& r : history_) out.push_back(to_json(r));
  return {200, std::move(out)};
}

ServiceResponse ReviewSession::get_topic(int topic) const {
  std::lock_guard lock(mutex_);
  if (!pending_ || topic < 0 || static_cast<std::size_t>(topic) >= pending_->cards.size()) {
    return error_response(404, "unknown topic");
  }
  Json j = card_json(pending_->cards[static_cast<std::size_t>(topic)]);
  const auto& vocab = corpus_->vocabulary();
  const auto column = pending_->model.phi.col(topic);
  Json head = Json::array();
  for (TokenId w : top_words(column, kPhiHead)) {
    Json entry = Json::object();
    entry["word"] = vocab.surface(w);
    entry["p"] = column(w);
    head.push_back(std::move(entry));
  }
  j["phi_head"] = std::move(head);
  return {200, std::move(j)};
}

ServiceResponse ReviewSession::post_labels(const std::string& body) {
  int topic = 0;
  TopicLabel label = TopicLabel::neutral;
  try {
    const auto j = Json::parse(body);
    topic = j.at("topic_id").get<int>();
    label = topic_label_from_string(j.at("label").get<std::string>());
  } catch (const std::exception& e) {
    return error_response(400, std::string("bad label request: ") + e.what());
  }
  std::lock_guard lock(mutex_);
  if (phase_ != SessionPhase::awaiting_labels) {
    return error_response(409, "labels are accepted only while awaiting labels",
                          Json{{"phase", to_string(phase_)}});
  }
  if (topic < 0 || static_cast<std::size_t>(topic) >= pending_->cards.size()) {
    return error_response(404, "unknown topic");
  }
  const auto& card = pending_->cards[static_cast<std::size_t>(topic)];
  if (card.role != TopicRole::domain) {
    return error_response(400, std::string("topic is ") + std::string(to_string(card.role)) + ", not free");
  }
  labels_[topic] = label;
  Json labels = Json::object();
  for (const auto& [t, l] : labels_) labels[std::to_string(t)] = to_string(l);
  Json file = Json::object();
  file["iteration"] = pending_->iteration;
  file["labels"] = std::move(labels);
  write_file_atomic(dir_ / kLabelsFile, file.dump() + "\n");
  return {200, card_json(card)};
}

ServiceResponse ReviewSession::post_iterate() {
  std::unique_lock lock(mutex_);
  if (phase_ == SessionPhase::training) {
    return error_response(409, "already training", Json{{"iteration", training_iteration_}});
  }
  if (phase_ == SessionPhase::stopped) {
    return error_response(409, "session stopped", Json{{"reason", stop_reason_}});
  }
  int next = history_.empty() ? 0 : history_.back().iteration + 1;
  if (phase_ == SessionPhase::awaiting_labels) {
    const auto& vocab = corpus_->vocabulary();
    const std::size_t before = bank_.size();
    auto record = commit_iteration(bank_, *pending_, config_.itar, labels_);
    // Bank first, then history: a crash in between leaves bank entries newer
    // than the history, which resume() discards.
    for (std::size_t i = before; i < bank_.size(); ++i) {
      append_line_durable(dir_ / kBankFile, bank_entry_to_json(bank_.entries()[i], vocab));
    }
    append_line_durable(dir_ / kHistoryFile, to_json(record).dump());
    std::filesystem::remove(dir_ / kPendingFile);
    std::filesystem::remove(dir_ / kLabelsFile);
    pending_.reset();
    labels_.clear();
    history_.push_back(record);
    next = record.iteration + 1;
    if (record.stop) {
      phase_ = SessionPhase::stopped;
      stop_reason_ = record.stop_reason;
      spdlog::info("session stopped after iteration {}: {}", record.iteration, record.stop_reason);
      Json body = Json::object();
      body["committed"] = record.iteration;
      body["phase"] = to_string(phase_);
      body["reason"] = stop_reason_;
      return {200, std::move(body)};
    }
  }
  start_training(next);
  Json body = Json::object();
  body["job_id"] = "iteration-" + std::to_string(next);
  body["iteration"] = next;
  return {202, std::move(body)};
}

void ReviewSession::start_training(int iteration) {
  if (worker_.joinable()) worker_.join();  // a finished job; training is never active here
  phase_ = SessionPhase::training;
  training_iteration_ = iteration;
  progress_ = 0.0;
  last_error_.clear();
  worker_ = std::thread([this, iteration] { train_job(iteration); });
}

void ReviewSession::train_job(int iteration) {
  // The bank is only written by commits, which the training phase excludes.
  try {
    auto pending = train_iteration(bank_, config_.itar, *corpus_, cooc_, iteration, [this](int done, int total) {
      progress_ = total > 0 ? static_cast<double>(done) / total : 0.0;
    });
    const auto text = to_json(pending).dump() + "\n";
    std::lock_guard lock(mutex_);
    write_file_atomic(dir_ / kPendingFile, text);
    pending_ = std::move(pending);
    labels_.clear();
    phase_ = SessionPhase::awaiting_labels;
    progress_ = 1.0;
  } catch (const std::exception& e) {
    spdlog::error("iteration {} failed: {}", iteration, e.what());
    std::lock_guard lock(mutex_);
    phase_ = SessionPhase::idle;
    last_error_ = e.what();
  }
}

// --- HTTP -------------------------------------------------------------------------

ReviewServer::ReviewServer(ReviewSession& session, ServerOptions options)
    : session_(session), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& svr = *server_;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Get("/session", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, session_.get_session());
  });
  svr.Get("/history", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, session_.get_history());
  });
  svr.Get(R"(/topics/(-?\d+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    int topic = -1;
    try {
      topic = std::stoi(req.matches[1].str());
    } catch (const std::exception&) {
    }
    reply(res, session_.get_topic(topic));
  });
  svr.Post("/labels", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, session_.post_labels(req.body));
  });
  svr.Post("/iterate", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, session_.post_iterate());
  });
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    spdlog::error("request failed: {}", what);
    reply(res, error_response(500, what));
  });
  if (!options_.static_dir.empty() && !svr.set_mount_point("/", options_.static_dir.string())) {
    throw ConfigError("static directory not found: " + options_.static_dir.string());
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  return port;
}

void ReviewServer::serve() { server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

}  // namespace itar
