#include "vtv/service/rating_service.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"
#include "vtv/random.hpp"

namespace vtv::service {

using nlohmann::json;

namespace {

const std::vector<std::string> kPoolHeader{"file_id", "target", "word", "audio_ref",
                                           "speaker_id", "timepoint"};
const std::vector<std::string> kKeyHeader{"target", "file_id", "word", "audio_ref",
                                          "expert_score"};

Response reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response failure(int status, ErrorKind kind, const std::string& message) {
  return reply(status, json{{"kind", to_string(kind)}, {"message", message}});
}

json state_json(const TrainingState& t) {
  return {{"module_id", t.module_id},
          {"certified", t.certified},
          {"batches_completed", t.batches_completed},
          {"maintenance_due", t.maintenance_due}};
}

TrainingState state_from_json(const json& j) {
  TrainingState t;
  t.module_id = j.at("module_id").get<int>();
  t.certified = j.at("certified").get<bool>();
  t.batches_completed = j.at("batches_completed").get<std::size_t>();
  t.maintenance_due = j.at("maintenance_due").get<bool>();
  return t;
}

json record_json(const RatingRecord& r) {
  json flags = json::array();
  for (RatingFlag f : r.flags) flags.push_back(to_string(f));
  return {{"rater_id", r.rater_id},
          {"file_id", r.file_id},
          {"score", r.score},
          {"subtype", r.subtype ? json(*r.subtype) : json(nullptr)},
          {"flags", flags},
          {"lengthened", r.lengthened},
          {"comment", r.comment},
          {"replay_count", r.replay_count}};
}

RatingRecord record_from_json(const json& j) {
  RatingRecord r;
  r.rater_id = j.at("rater_id").get<std::string>();
  r.file_id = j.at("file_id").get<std::string>();
  r.score = j.at("score").get<int>();
  if (!j.at("subtype").is_null()) r.subtype = j.at("subtype").get<std::string>();
  for (const auto& f : j.at("flags")) r.flags.insert(parse_flag(f.get<std::string>()));
  r.lengthened = j.at("lengthened").get<bool>();
  r.comment = j.at("comment").get<std::string>();
  r.replay_count = j.at("replay_count").get<int>();
  return r;
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Shape:
    case ErrorKind::EmptyInput:
      return 422;
    case ErrorKind::Parse:
    case ErrorKind::Config:
      return 400;
    case ErrorKind::Lookup:
      return 404;
    default:
      return 500;
  }
}

}  // namespace

std::vector<PoolEntry> parse_pool_csv(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kPoolHeader, "pool CSV");
  std::vector<PoolEntry> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    if (!seen.insert(row[0]).second) {
      throw Error(ErrorKind::Validation, "duplicate file_id '" + row[0] + "' in pool CSV");
    }
    out.push_back({parse_target(row[1]), {row[0], row[2], row[3], row[4], row[5]}});
  }
  return out;
}

std::string write_pool_csv(const std::vector<PoolEntry>& pool) {
  io::CsvTable t;
  t.header = kPoolHeader;
  for (const auto& p : pool) {
    t.rows.push_back({p.file.file_id, std::string(to_string(p.target)), p.file.word,
                      p.file.audio_ref, p.file.speaker_id, p.file.timepoint});
  }
  return io::write_csv(t);
}

std::vector<TrainingItem> parse_training_key(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kKeyHeader, "training key CSV");
  std::vector<TrainingItem> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const int score = static_cast<int>(io::parse_int(row[4], fmt::format("training key row {}", i + 1)));
    if (score < 1 || score > 5) {
      throw Error(ErrorKind::Validation, fmt::format("training key row {}: score {} outside 1..5", i + 1, score));
    }
    out.push_back({parse_target(row[0]), row[1], row[2], row[3], score});
  }
  return out;
}

std::string write_training_key(const std::vector<TrainingItem>& items) {
  io::CsvTable t;
  t.header = kKeyHeader;
  for (const auto& it : items) {
    t.rows.push_back({std::string(to_string(it.target)), it.file_id, it.word, it.audio_ref,
                      std::to_string(it.expert_score)});
  }
  return io::write_csv(t);
}

RatingService::RatingService(ServiceConfig config) : config_(std::move(config)) {
  if (config_.batch_size < 1) throw Error(ErrorKind::Config, "batch size must be >= 1");
  for (Target t : {Target::R, Target::S}) {
    std::vector<PoolFile> pool;
    for (const auto& e : config_.pool) {
      if (e.target == t) pool.push_back(e.file);
    }
    if (pool.empty()) continue;
    batches_[t] = make_batches(pool, config_.batch_size, mix_seed(config_.seed, static_cast<int>(t)));
    const auto n = std::count_if(config_.training.begin(), config_.training.end(),
                                 [&](const TrainingItem& it) { return it.target == t; });
    if (n < static_cast<std::ptrdiff_t>(module_item_count(4))) {
      throw Error(ErrorKind::Config,
                  fmt::format("target {} needs at least {} training items, found {}", to_string(t),
                              module_item_count(4), n));
    }
  }
  replay_log();
}

void RatingService::append_log(const std::string& line) {
  if (!config_.log_path) return;
  std::ofstream out(*config_.log_path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + config_.log_path->string());
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed on " + config_.log_path->string());
}

void RatingService::log_progress(const Session& s) {
  const RaterProgress& p = raters_[s];
  append_log(json{{"event", "progress"},
                  {"rater_id", s.rater_id},
                  {"target", to_string(s.target)},
                  {"training", state_json(p.training)},
                  {"next_batch", p.next_batch},
                  {"active", p.active ? json(*p.active) : json(nullptr)},
                  {"cursor", p.cursor},
                  {"replays", p.replays},
                  {"ratings", p.ratings}}
                 .dump());
}

void RatingService::replay_log() {
  if (!config_.log_path || !std::filesystem::exists(*config_.log_path)) return;
  std::ifstream in(*config_.log_path, std::ios::binary);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string event = j.at("event").get<std::string>();
      if (event == "rating") {
        ratings_.push_back(record_from_json(j.at("record")));
        submissions_[j.at("submission_id").get<std::string>()] =
            Response{200, j.at("response").get<std::string>(), "application/json"};
      } else if (event == "progress") {
        const Session key{j.at("rater_id").get<std::string>(),
                          parse_target(j.at("target").get<std::string>())};
        RaterProgress p;
        p.training = state_from_json(j.at("training"));
        p.next_batch = j.at("next_batch").get<std::size_t>();
        if (!j.at("active").is_null()) p.active = j.at("active").get<std::size_t>();
        p.cursor = j.at("cursor").get<std::size_t>();
        p.replays = j.at("replays").get<std::vector<int>>();
        p.ratings = j.at("ratings").get<std::size_t>();
        raters_[key] = std::move(p);
      } else {
        throw Error(ErrorKind::Parse, "unknown event '" + event + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, fmt::format("rating log line {}: {}", n, e.what()));
    }
  }
}

std::vector<RatingRecord> RatingService::ratings() const {
  std::lock_guard lock(mutex_);
  return ratings_;
}

std::string RatingService::export_csv() const {
  std::lock_guard lock(mutex_);
  return write_ratings(ratings_);
}

Response RatingService::handle(const Request& req) {
  std::lock_guard lock(mutex_);
  try {
    if (req.method == "POST" && req.path == "/sessions") return create_session(req.body);
    if (req.method == "GET" && req.path == "/export/ratings.csv") {
      return {200, write_ratings(ratings_), "text/csv"};
    }
    static const std::set<std::pair<std::string, std::string>> routes{
        {"GET", "/batches/next"},  {"GET", "/items/current"},   {"POST", "/items/replay"},
        {"POST", "/ratings"},      {"GET", "/training/module"}, {"POST", "/training/submit"},
        {"GET", "/progress"}};
    if (!routes.contains({req.method, req.path})) {
      return failure(404, ErrorKind::Lookup, fmt::format("no route {} {}", req.method, req.path));
    }
    const auto it = sessions_.find(req.session);
    if (it == sessions_.end()) {
      return failure(401, ErrorKind::Validation, "missing or unknown session token");
    }
    const Session s = it->second;
    if (req.path == "/batches/next") return next_batch(s);
    if (req.path == "/items/current") return current_item(s);
    if (req.path == "/items/replay") return replay(s);
    if (req.path == "/ratings") return submit_rating(s, req.body);
    if (req.path == "/training/module") return training_module(s);
    if (req.path == "/training/submit") return submit_module(s, req.body);
    return progress(s);
  } catch (const json::exception& e) {
    return failure(400, ErrorKind::Parse, std::string("malformed JSON body: ") + e.what());
  } catch (const Error& e) {
    return failure(status_for(e.kind()), e.kind(), e.what());
  }
}

Response RatingService::create_session(const std::string& body) {
  const json j = json::parse(body);
  const std::string rater = j.at("rater_id").get<std::string>();
  if (rater.empty()) throw Error(ErrorKind::Validation, "rater_id must not be empty");
  const Target target = parse_target(j.at("target").get<std::string>());
  if (!batches_.contains(target)) {
    throw Error(ErrorKind::Lookup, fmt::format("no files to rate for target {}", to_string(target)));
  }
  const Session key{rater, target};
  raters_.try_emplace(key);
  const std::string token = fmt::format("{:016x}", mix_seed(config_.seed, 9000 + ++session_counter_));
  sessions_[token] = key;
  const RaterProgress& p = raters_[key];
  return reply(200, json{{"session", token},
                         {"rater_id", rater},
                         {"target", to_string(target)},
                         {"training", state_json(p.training)}});
}

Response RatingService::next_batch(const Session& s) {
  RaterProgress& p = raters_[s];
  if (!p.training.certified) {
    return failure(403, ErrorKind::Validation, "rater is not certified for this target");
  }
  const auto& batches = batches_.at(s.target);
  if (p.active && p.cursor < batches[*p.active].size()) {
    return reply(200, json{{"batch", *p.active + 1},
                           {"total", batches[*p.active].size()},
                           {"position", p.cursor + 1},
                           {"batch_count", batches.size()}});
  }
  if (p.training.maintenance_due) {
    return failure(403, ErrorKind::Validation, "maintenance module is due before the next batch");
  }
  if (p.next_batch >= batches.size()) {
    return reply(404, json{{"kind", "lookup"}, {"message", "no batches left"}, {"batch_complete", true}});
  }
  p.active = p.next_batch++;
  p.cursor = 0;
  p.replays.assign(batches[*p.active].size(), 0);
  log_progress(s);
  return reply(200, json{{"batch", *p.active + 1},
                         {"total", batches[*p.active].size()},
                         {"position", 1},
                         {"batch_count", batches.size()}});
}

Response RatingService::current_item(const Session& s) {
  const RaterProgress& p = raters_[s];
  if (!p.active) return failure(409, ErrorKind::Validation, "no batch assigned");
  const auto& batch = batches_.at(s.target)[*p.active];
  if (p.cursor >= batch.size()) return reply(200, json{{"batch_complete", true}});
  const BatchItem& item = batch[p.cursor];
  return reply(200, json{{"index", p.cursor + 1},
                         {"total", batch.size()},
                         {"file_id", item.file_id},
                         {"audio_ref", item.audio_ref},
                         {"word", item.word},
                         {"target", to_string(s.target)},
                         {"replay_limit", kMaxReplays},
                         {"replays_used", p.replays[p.cursor]}});
}

Response RatingService::replay(const Session& s) {
  RaterProgress& p = raters_[s];
  if (!p.active) return failure(409, ErrorKind::Validation, "no batch assigned");
  const auto& batch = batches_.at(s.target)[*p.active];
  if (p.cursor >= batch.size()) return reply(409, json{{"batch_complete", true}});
  int& used = p.replays[p.cursor];
  if (used >= kMaxReplays) {
    return reply(409, json{{"kind", "validation"},
                           {"message", "replay limit reached"},
                           {"replays_used", used},
                           {"replay_limit", kMaxReplays}});
  }
  ++used;
  log_progress(s);
  return reply(200, json{{"replays_used", used}, {"replay_limit", kMaxReplays}});
}

Response RatingService::submit_rating(const Session& s, const std::string& body) {
  const json j = json::parse(body);
  if (!j.contains("submission_id") || !j.at("submission_id").is_string() ||
      j.at("submission_id").get<std::string>().empty()) {
    return failure(422, ErrorKind::Validation, "submission_id is required");
  }
  const std::string sid = j.at("submission_id").get<std::string>();
  if (const auto it = submissions_.find(sid); it != submissions_.end()) return it->second;

  const auto remember = [&](Response r) {
    submissions_[sid] = r;
    return r;
  };
  RaterProgress& p = raters_[s];
  if (!p.training.certified) {
    return remember(failure(403, ErrorKind::Validation, "rater is not certified for this target"));
  }
  if (!p.active) return remember(failure(409, ErrorKind::Validation, "no batch assigned"));
  const auto& batch = batches_.at(s.target)[*p.active];

  // The current item, or an already rated item of this batch (a revision).
  std::size_t index = p.cursor;
  if (j.contains("file_id") && !j.at("file_id").is_null()) {
    const std::string fid = j.at("file_id").get<std::string>();
    const auto pos = std::find_if(batch.begin(), batch.end(),
                                  [&](const BatchItem& b) { return b.file_id == fid; });
    if (pos == batch.end() || static_cast<std::size_t>(pos - batch.begin()) > p.cursor) {
      return remember(failure(409, ErrorKind::Validation,
                              "file '" + fid + "' is not the current or a rated item of this batch"));
    }
    index = static_cast<std::size_t>(pos - batch.begin());
  }
  if (index >= batch.size()) return remember(reply(409, json{{"batch_complete", true}}));
  const bool revision = index < p.cursor;

  RatingRecord r;
  r.rater_id = s.rater_id;
  r.file_id = batch[index].file_id;
  r.score = j.at("score").get<int>();
  if (j.contains("subtype") && !j.at("subtype").is_null()) {
    r.subtype = j.at("subtype").get<std::string>();
  }
  if (j.contains("flags")) {
    for (const auto& f : j.at("flags")) r.flags.insert(parse_flag(f.get<std::string>()));
  }
  r.lengthened = j.value("lengthened", false);
  r.comment = j.value("comment", std::string());
  r.replay_count = p.replays.at(index);
  if (j.contains("replay_count")) {
    const int claimed = j.at("replay_count").get<int>();
    if (claimed < 0 || claimed > kMaxReplays) {
      return remember(failure(422, ErrorKind::Validation,
                              fmt::format("replay_count {} outside 0..{}", claimed, kMaxReplays)));
    }
  }
  try {
    validate_rating(r, s.target);
  } catch (const Error& e) {
    return remember(failure(422, e.kind(), e.what()));
  }

  ratings_.push_back(r);
  ++p.ratings;
  if (!revision) {
    ++p.cursor;
    if (p.cursor == batch.size()) p.training = record_batch_completed(p.training);
  }
  const bool complete = p.cursor == batch.size();
  const Response res = reply(200, json{{"accepted", true},
                                       {"file_id", r.file_id},
                                       {"superseded", revision},
                                       {"batch_complete", complete}});
  append_log(json{{"event", "rating"},
                  {"submission_id", sid},
                  {"record", record_json(r)},
                  {"response", res.body}}
                 .dump());
  log_progress(s);
  return remember(res);
}

std::vector<const TrainingItem*> RatingService::module_items(Target t, int module_id) const {
  std::vector<const TrainingItem*> items;
  for (const auto& it : config_.training) {
    if (it.target == t) items.push_back(&it);
  }
  Rng rng(mix_seed(config_.seed, 400 + 10 * static_cast<std::uint64_t>(module_id) +
                                     static_cast<std::uint64_t>(t)));
  std::shuffle(items.begin(), items.end(), rng.engine());
  items.resize(module_item_count(module_id));
  return items;
}

Response RatingService::training_module(const Session& s) {
  const RaterProgress& p = raters_[s];
  if (p.training.certified && !p.training.maintenance_due) {
    return failure(409, ErrorKind::Validation, "no training module is assigned");
  }
  json items = json::array();
  std::size_t k = 0;
  for (const TrainingItem* it : module_items(s.target, p.training.module_id)) {
    items.push_back({{"index", ++k}, {"file_id", it->file_id}, {"word", it->word},
                     {"audio_ref", it->audio_ref}});
  }
  return reply(200, json{{"module_id", p.training.module_id},
                         {"item_count", items.size()},
                         {"target", to_string(s.target)},
                         {"items", items}});
}

Response RatingService::submit_module(const Session& s, const std::string& body) {
  RaterProgress& p = raters_[s];
  if (p.training.certified && !p.training.maintenance_due) {
    return failure(409, ErrorKind::Validation, "no training module is assigned");
  }
  const json j = json::parse(body);
  const std::vector<int> answers = j.at("answers").get<std::vector<int>>();
  const auto items = module_items(s.target, p.training.module_id);
  if (answers.size() != items.size()) {
    return failure(422, ErrorKind::Validation,
                   fmt::format("module {} has {} items, got {} answers", p.training.module_id,
                               items.size(), answers.size()));
  }
  std::vector<int> expert;
  for (const TrainingItem* it : items) expert.push_back(it->expert_score);
  const ModuleResult result = score_module(answers, expert, p.training.module_id);
  p.training = advance_training(p.training, result);
  log_progress(s);
  return reply(200, json{{"module_id", result.module_id},
                         {"item_count", result.item_count},
                         {"binary_agreement_pct", result.binary_agreement_pct},
                         {"within_one_pct", result.within_one_pct},
                         {"passed", result.passed},
                         {"training", state_json(p.training)}});
}

Response RatingService::progress(const Session& s) {
  const RaterProgress& p = raters_[s];
  const auto& batches = batches_.at(s.target);
  json current = nullptr;
  if (p.active) {
    current = {{"batch", *p.active + 1}, {"rated", p.cursor}, {"total", batches[*p.active].size()}};
  }
  return reply(200, json{{"rater_id", s.rater_id},
                         {"target", to_string(s.target)},
                         {"training", state_json(p.training)},
                         {"ratings_submitted", p.ratings},
                         {"batches_assigned", p.next_batch},
                         {"batch_count", batches.size()},
                         {"current_batch", current}});
}

}  // namespace vtv::service
