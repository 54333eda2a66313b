#pragma once

// Rating service core: sessions, masked batch delivery, server-side replay
// accounting, validated idempotent rating ingestion, training modules and
// progress. Transport-independent; `handle` maps a request to a JSON reply.
//
// Every reply body is built from masked views only, so no payload carries a
// speaker id, session date or timepoint.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/ratings.hpp"

namespace vtv::service {

struct PoolEntry {
  Target target = Target::R;
  PoolFile file;
};

struct TrainingItem {
  Target target = Target::R;
  std::string file_id;
  std::string word;
  std::string audio_ref;
  int expert_score = 5;
};

// `file_id,target,word,audio_ref,speaker_id,timepoint`
std::vector<PoolEntry> parse_pool_csv(std::string_view text);
std::string write_pool_csv(const std::vector<PoolEntry>& pool);
// `target,file_id,word,audio_ref,expert_score`
std::vector<TrainingItem> parse_training_key(std::string_view text);
std::string write_training_key(const std::vector<TrainingItem>& items);

struct ServiceConfig {
  std::vector<PoolEntry> pool;
  std::vector<TrainingItem> training;  // at least 50 per served target
  std::size_t batch_size = kBatchSize;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> log_path;  // append-only event log
};

struct Request {
  std::string method;
  std::string path;
  std::string session;  // X-Session-Token header
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class RatingService {
 public:
  // Replays an existing log so ratings and training progress survive
  // restarts.
  explicit RatingService(ServiceConfig config);

  Response handle(const Request& request);

  // Accepted ratings in submission order.
  std::vector<RatingRecord> ratings() const;
  std::string export_csv() const;

 private:
  struct RaterKey {
    std::string rater_id;
    Target target = Target::R;
    auto operator<=>(const RaterKey&) const = default;
  };
  // Progress lives per (rater, target) so it outlasts sessions.
  struct RaterProgress {
    TrainingState training;
    std::size_t next_batch = 0;               // batches assigned so far
    std::optional<std::size_t> active;        // batch being rated
    std::size_t cursor = 0;                   // items rated in the active batch
    std::vector<int> replays;                 // per item of the active batch
    std::size_t ratings = 0;
  };
  using Session = RaterKey;

  Response create_session(const std::string& body);
  Response next_batch(const Session& s);
  Response current_item(const Session& s);
  Response replay(const Session& s);
  Response submit_rating(const Session& s, const std::string& body);
  Response training_module(const Session& s);
  Response submit_module(const Session& s, const std::string& body);
  Response progress(const Session& s);

  std::vector<const TrainingItem*> module_items(Target t, int module_id) const;
  void log_progress(const Session& s);
  void append_log(const std::string& line);
  void replay_log();

  ServiceConfig config_;
  std::map<Target, std::vector<std::vector<BatchItem>>> batches_;
  std::map<std::string, Session> sessions_;
  std::map<RaterKey, RaterProgress> raters_;
  std::map<std::string, Response> submissions_;
  std::vector<RatingRecord> ratings_;
  std::uint64_t session_counter_ = 0;
  mutable std::mutex mutex_;
};

// Serves `service` over HTTP until stopped; blocks.
class HttpServer {
 public:
  explicit HttpServer(RatingService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vtv::service
