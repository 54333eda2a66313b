#include <doctest.h>

#include <filesystem>
#include <set>
#include <thread>

#include <fmt/format.h>

#include <httplib.h>
#include <json.hpp>

#include "vtv/service/rating_service.hpp"

using namespace vtv;
using namespace vtv::service;
using json = nlohmann::json;

namespace {

ServiceConfig make_config(std::size_t pool_size = 250) {
  ServiceConfig cfg;
  for (std::size_t i = 0; i < pool_size; ++i) {
    cfg.pool.push_back({Target::R,
                        {fmt::format("rfile{:03}", i), "red", fmt::format("audio/r{:03}.wav", i),
                         fmt::format("secret_spk{}", i % 9), i % 2 ? "posttx" : "baseline"}});
  }
  for (int i = 0; i < 60; ++i) {
    cfg.training.push_back({Target::R, fmt::format("train{:02}", i), "rabbit",
                            fmt::format("audio/t{:02}.wav", i), 1 + i % 5});
  }
  cfg.seed = 5;
  return cfg;
}

// Fails on any key or string value that would reveal speaker or timepoint.
void check_masked(const json& j) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      CHECK(k != "speaker_id");
      CHECK(k != "session_date");
      CHECK(k != "timepoint");
      check_masked(v);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) check_masked(v);
  } else if (j.is_string()) {
    const auto s = j.get<std::string>();
    CHECK(s.find("secret_spk") == std::string::npos);
    CHECK(s != "baseline");
    CHECK(s != "posttx");
  }
}

struct Client {
  RatingService& svc;
  std::string token;

  json call(const std::string& method, const std::string& path, const json& body = nullptr,
            int* status = nullptr) {
    const Response r = svc.handle({method, path, token, body.is_null() ? "" : body.dump()});
    const json j = json::parse(r.body);
    check_masked(j);
    if (status) *status = r.status;
    return j;
  }
};

Client open_session(RatingService& svc, const std::string& rater) {
  Client c{svc, ""};
  const json j = c.call("POST", "/sessions", {{"rater_id", rater}, {"target", "r"}});
  c.token = j.at("session").get<std::string>();
  return c;
}

std::map<std::string, int> expert_scores(const ServiceConfig& cfg) {
  std::map<std::string, int> m;
  for (const auto& t : cfg.training) m[t.file_id] = t.expert_score;
  return m;
}

void certify(Client& c, const ServiceConfig& cfg) {
  const auto expert = expert_scores(cfg);
  for (int module = 1; module <= 4; ++module) {
    const json m = c.call("GET", "/training/module");
    REQUIRE(m.at("module_id") == module);
    CHECK(m.at("item_count") == (module == 4 ? 50 : 25));
    std::vector<int> answers;
    for (const auto& it : m.at("items")) answers.push_back(expert.at(it.at("file_id")));
    const json res = c.call("POST", "/training/submit", {{"answers", answers}});
    CHECK(res.at("passed") == true);
  }
}

}  // namespace

TEST_CASE("routes, sessions and unknown paths") {
  RatingService svc(make_config());
  int status = 0;
  Client anon{svc, "bogus"};
  anon.call("GET", "/progress", nullptr, &status);
  CHECK(status == 401);
  anon.call("GET", "/nope", nullptr, &status);
  CHECK(status == 404);
  anon.call("POST", "/sessions", {{"rater_id", "a"}, {"target", "s"}}, &status);
  CHECK(status == 404);
  const Response bad = svc.handle({"POST", "/sessions", "", "{not json"});
  CHECK(bad.status == 400);

  Client c = open_session(svc, "rater1");
  const json p = c.call("GET", "/progress");
  CHECK(p.at("training").at("certified") == false);
  CHECK(p.at("batch_count") == 3);
}

TEST_CASE("uncertified raters are gated and training advances") {
  const ServiceConfig cfg = make_config();
  RatingService svc(cfg);
  Client c = open_session(svc, "rater1");
  int status = 0;
  c.call("GET", "/batches/next", nullptr, &status);
  CHECK(status == 403);

  // 20 of 25 binary matches: every 5th answer flips across the 3/4 boundary.
  const json m = c.call("GET", "/training/module");
  const auto expert = expert_scores(cfg);
  std::vector<int> answers;
  for (const auto& it : m.at("items")) {
    const int e = expert.at(it.at("file_id"));
    answers.push_back(answers.size() % 5 == 0 ? (e >= 4 ? 1 : 5) : e);
  }
  const json fail = c.call("POST", "/training/submit", {{"answers", answers}});
  CHECK(fail.at("passed") == false);
  CHECK(fail.at("binary_agreement_pct") == doctest::Approx(80.0));
  CHECK(fail.at("training").at("module_id") == 1);

  c.call("POST", "/training/submit", {{"answers", std::vector<int>(3, 5)}}, &status);
  CHECK(status == 422);

  certify(c, cfg);
  CHECK(c.call("GET", "/progress").at("training").at("certified") == true);
  c.call("GET", "/training/module", nullptr, &status);
  CHECK(status == 409);
}

TEST_CASE("batch delivery, replay limits and rating ingestion") {
  const ServiceConfig cfg = make_config();
  RatingService svc(cfg);
  Client c = open_session(svc, "rater1");
  certify(c, cfg);

  int status = 0;
  c.call("GET", "/items/current", nullptr, &status);
  CHECK(status == 409);
  const json b = c.call("GET", "/batches/next");
  CHECK(b.at("batch") == 1);
  CHECK(b.at("total") == 100);

  const json item = c.call("GET", "/items/current");
  CHECK(item.at("index") == 1);
  CHECK(item.at("total") == 100);
  CHECK(item.at("replay_limit") == 5);
  CHECK(item.at("target") == "r");
  const std::set<std::string> keys{"index", "total", "file_id", "audio_ref", "word",
                                   "target", "replay_limit", "replays_used"};
  for (const auto& [k, v] : item.items()) CHECK(keys.contains(k));

  for (int i = 1; i <= 5; ++i) {
    CHECK(c.call("POST", "/items/replay", nullptr, &status).at("replays_used") == i);
    CHECK(status == 200);
  }
  c.call("POST", "/items/replay", nullptr, &status);
  CHECK(status == 409);

  c.call("POST", "/ratings", {{"submission_id", "s1"}, {"score", 1}}, &status);
  CHECK(status == 422);
  c.call("POST", "/ratings", {{"submission_id", "s1b"}, {"score", 3}, {"replay_count", 6}}, &status);
  CHECK(status == 422);
  c.call("POST", "/ratings", {{"score", 5}}, &status);
  CHECK(status == 422);

  const json ok = c.call("POST", "/ratings",
                         {{"submission_id", "s2"}, {"score", 1}, {"subtype", "w-error"}}, &status);
  CHECK(status == 200);
  CHECK(ok.at("accepted") == true);
  CHECK(svc.ratings().size() == 1);
  CHECK(svc.ratings()[0].replay_count == 5);

  const json again = c.call("POST", "/ratings",
                            {{"submission_id", "s2"}, {"score", 5}}, &status);
  CHECK(again == ok);
  CHECK(svc.ratings().size() == 1);
  CHECK(c.call("GET", "/items/current").at("index") == 2);

  // A revision of the first item supersedes without moving the cursor.
  const json rev = c.call("POST", "/ratings",
                          {{"submission_id", "s3"}, {"file_id", item.at("file_id")}, {"score", 4}});
  CHECK(rev.at("superseded") == true);
  CHECK(svc.ratings().size() == 2);
  CHECK(c.call("GET", "/items/current").at("index") == 2);

  for (int i = 2; i <= 100; ++i) {
    c.call("POST", "/ratings", {{"submission_id", fmt::format("b1-{}", i)}, {"score", 5}});
  }
  CHECK(c.call("GET", "/items/current").at("batch_complete") == true);
  CHECK(c.call("GET", "/batches/next").at("batch") == 2);

  const std::string csv = svc.export_csv();
  CHECK(csv.rfind(ratings_csv_header(), 0) == 0);
  CHECK(csv.find("secret_spk") == std::string::npos);
  const Response exp = svc.handle({"GET", "/export/ratings.csv", "", ""});
  CHECK(exp.content_type == "text/csv");
  CHECK(parse_ratings(exp.body).size() == 101);
}

TEST_CASE("maintenance module blocks new batches after twenty") {
  ServiceConfig cfg = make_config(2000);
  cfg.batch_size = 1;
  RatingService svc(cfg);
  Client c = open_session(svc, "rater1");
  certify(c, cfg);
  for (int i = 0; i < 20; ++i) {
    c.call("GET", "/batches/next");
    c.call("POST", "/ratings", {{"submission_id", fmt::format("m{}", i)}, {"score", 5}});
  }
  int status = 0;
  c.call("GET", "/batches/next", nullptr, &status);
  CHECK(status == 403);
  const json m = c.call("GET", "/training/module");
  CHECK(m.at("module_id") == kMaintenanceModule);
  CHECK(m.at("item_count") == 50);
  const auto expert = expert_scores(cfg);
  std::vector<int> answers;
  for (const auto& it : m.at("items")) answers.push_back(expert.at(it.at("file_id")));
  CHECK(c.call("POST", "/training/submit", {{"answers", answers}}).at("passed") == true);
  c.call("GET", "/batches/next", nullptr, &status);
  CHECK(status == 200);
}

TEST_CASE("the event log restores ratings and progress") {
  const auto dir = std::filesystem::temp_directory_path() / "vtv_service_log_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ServiceConfig cfg = make_config();
  cfg.log_path = dir / "log.jsonl";
  {
    RatingService svc(cfg);
    Client c = open_session(svc, "rater1");
    certify(c, cfg);
    c.call("GET", "/batches/next");
    c.call("POST", "/items/replay");
    c.call("POST", "/ratings", {{"submission_id", "x1"}, {"score", 5}});
    c.call("POST", "/ratings", {{"submission_id", "x2"}, {"score", 2}, {"subtype", "l-error"}});
  }
  RatingService restored(cfg);
  CHECK(restored.ratings().size() == 2);
  CHECK(restored.ratings()[0].replay_count == 1);
  Client c = open_session(restored, "rater1");
  const json p = c.call("GET", "/progress");
  CHECK(p.at("training").at("certified") == true);
  CHECK(p.at("ratings_submitted") == 2);
  CHECK(c.call("GET", "/items/current").at("index") == 3);
  // Submission ids survive too.
  int status = 0;
  c.call("POST", "/ratings", {{"submission_id", "x1"}, {"score", 1}, {"subtype", "w-error"}}, &status);
  CHECK(status == 200);
  CHECK(restored.ratings().size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("http transport") {
  const ServiceConfig cfg = make_config();
  RatingService svc(cfg);
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  httplib::Result r;
  for (int attempt = 0; attempt < 50 && !r; ++attempt) {
    r = cli.Post("/sessions", R"({"rater_id":"h1","target":"r"})", "application/json");
    if (!r) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(r);
  CHECK(r->status == 200);
  const std::string token = json::parse(r->body).at("session").get<std::string>();
  const auto p = cli.Get("/progress", {{"X-Session-Token", token}});
  REQUIRE(p);
  CHECK(p->status == 200);
  CHECK(json::parse(p->body).at("rater_id") == "h1");
  const auto unauth = cli.Get("/progress");
  REQUIRE(unauth);
  CHECK(unauth->status == 401);

  server.stop();
  t.join();
}
