#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "itar/bank.hpp"
#include "itar/corpus.hpp"
#include "itar/io.hpp"
#include "itar/trainer.hpp"

namespace httplib {
class Server;
}

namespace itar {

enum class SessionPhase { idle, training, awaiting_labels, stopped };

std::string_view to_string(SessionPhase phase);

struct ServiceResponse {
  int status = 200;
  Json body;
};

// config.json of a session directory.
struct SessionConfig {
  std::filesystem::path corpus;
  ItarConfig itar;
};

std::optional<SessionConfig> read_session_config(const std::filesystem::path& dir);

// One labeling session over one corpus. Files in the session directory:
//   config.json   corpus path and ItarConfig, written once
//   bank.jsonl    bank entries, appended and fsync'd
//   history.jsonl IterationRecord per line, appended and fsync'd
//   pending.json  the trained but uncommitted iteration
//   labels.json   human labels for the pending iteration
// A session reopened from these files reports the same state it had.
class ReviewSession {
 public:
  // Creates the directory on first use, resumes from it otherwise (the stored
  // config then wins over `config`).
  ReviewSession(std::filesystem::path dir, std::shared_ptr<const Corpus> corpus, SessionConfig config);
  ~ReviewSession();

  ReviewSession(const ReviewSession&) = delete;
  ReviewSession& operator=(const ReviewSession&) = delete;

  ServiceResponse get_session() const;
  ServiceResponse get_history() const;
  ServiceResponse get_topic(int topic) const;
  ServiceResponse post_labels(const std::string& body);
  ServiceResponse post_iterate();

  SessionPhase phase() const;
  // Blocks until no training job is running.
  void wait_idle();

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const ItarConfig& config() const noexcept { return config_.itar; }

 private:
  void resume();
  void start_training(int iteration);  // session lock held
  void train_job(int iteration);
  Json card_json(const TopicCard& card) const;
  Json session_json() const;

  std::filesystem::path dir_;
  std::shared_ptr<const Corpus> corpus_;
  SessionConfig config_;
  CooccurrenceStats cooc_;

  mutable std::mutex mutex_;
  SessionPhase phase_ = SessionPhase::idle;
  std::string stop_reason_;
  std::string last_error_;
  TopicBank bank_;
  std::vector<IterationRecord> history_;
  std::optional<PendingIteration> pending_;
  std::map<int, TopicLabel> labels_;
  int training_iteration_ = 0;
  std::atomic<double> progress_{0.0};
  std::thread worker_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // UI bundle; not served when empty
};

// HTTP front end: GET /session, /history, /topics/{id}; POST /labels,
// /iterate; static files; CORS headers on every response.
class ReviewServer {
 public:
  ReviewServer(ReviewSession& session, ServerOptions options);
  ~ReviewServer();

  // Binds and returns the port (useful with port 0). Throws ConfigError.
  int bind();
  // Serves until stop(); call bind() first.
  void serve();
  void stop();

 private:
  ReviewSession& session_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace itar
