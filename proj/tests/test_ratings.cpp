#include <doctest.h>

#include <algorithm>
#include <set>

#include "criteria.hpp"
#include "oracles.hpp"
#include "vtv/error.hpp"
#include "vtv/random.hpp"
#include "vtv/ratings.hpp"

using namespace vtv;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

RatingRecord rating(std::string rater, int score, std::optional<std::string> subtype = {}) {
  RatingRecord r;
  r.rater_id = std::move(rater);
  r.file_id = "f1";
  r.score = score;
  r.subtype = std::move(subtype);
  return r;
}

ConsensusLabel error_label(std::string file, std::string subtype) {
  ConsensusLabel l;
  l.file_id = std::move(file);
  l.outcome = Outcome::ErrorSubtype;
  l.subtype = std::move(subtype);
  return l;
}

}  // namespace

TEST_CASE("rating validation") {
  validate_rating(rating("a", 1, "w-error"), Target::R);
  validate_rating(rating("a", 3));
  CHECK(kind_of([] { validate_rating(rating("a", 0)); }) == ErrorKind::Validation);
  CHECK(kind_of([] { validate_rating(rating("a", 6)); }) == ErrorKind::Validation);
  CHECK(kind_of([] { validate_rating(rating("a", 1)); }) == ErrorKind::Validation);
  CHECK(kind_of([] { validate_rating(rating("a", 4, "w-error")); }) == ErrorKind::Validation);
  CHECK(kind_of([] { validate_rating(rating("a", 1, "dentalized"), Target::R); }) ==
        ErrorKind::Validation);
  RatingRecord r = rating("a", 5);
  r.replay_count = 6;
  CHECK(kind_of([&] { validate_rating(r); }) == ErrorKind::Validation);
}

TEST_CASE("consensus examples") {
  const std::vector<RatingRecord> fives{rating("a", 5), rating("b", 5), rating("c", 5)};
  const ConsensusLabel correct = consensus(fives);
  CHECK(correct.outcome == Outcome::CorrectUnanimous);
  CHECK(correct.mean_score == 5.0);
  CHECK(correct.n_raters == 3);

  const std::vector<RatingRecord> w{rating("a", 1, "w-error"), rating("b", 1, "w-error"),
                                    rating("c", 2, "vowel-error")};
  const ConsensusLabel err = consensus(w);
  CHECK(err.outcome == Outcome::ErrorSubtype);
  CHECK(err.subtype == "w-error");
  CHECK(*err.mean_score == doctest::Approx(4.0 / 3.0));

  const std::vector<RatingRecord> split{rating("a", 1, "w-error"), rating("b", 1, "w-error"),
                                        rating("c", 1, "vowel-error"), rating("d", 1, "vowel-error")};
  const ConsensusLabel tie = consensus(split);
  CHECK(tie.outcome == Outcome::Excluded);
  CHECK(tie.reason == ExclusionReason::NoConsensus);
  // Half of the raters is enough when the majority rule is relaxed, but two
  // labels then tie.
  CHECK(consensus(split, {.strict_majority = false}).reason == ExclusionReason::NoConsensus);

  std::vector<RatingRecord> flagged = fives;
  flagged[1].flags.insert(RatingFlag::JunkAudio);
  CHECK(consensus(flagged).reason == ExclusionReason::Flagged);
  CHECK(*consensus(flagged).mean_score == 5.0);

  std::vector<RatingRecord> omitted = w;
  omitted[2] = rating("c", 1, "omitted");
  CHECK(consensus(omitted).reason == ExclusionReason::Omission);

  CHECK(kind_of([] { consensus(std::vector<RatingRecord>{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("later ratings from the same rater supersede earlier ones") {
  const std::vector<RatingRecord> rs{rating("a", 1, "w-error"), rating("b", 5), rating("a", 5),
                                     rating("c", 5)};
  const auto latest = latest_per_rater(rs);
  CHECK(latest.size() == 3);
  const ConsensusLabel l = consensus(rs);
  CHECK(l.outcome == Outcome::CorrectUnanimous);
  CHECK(l.n_raters == 3);
}

TEST_CASE("consensus agrees with the reference on every small rating set") {
  const auto v = criteria::consensus_exhaustive(3, true);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("consensus does not depend on rater order") {
  Rng rng(17);
  const std::vector<std::optional<std::string>> subtypes{std::nullopt, "w-error", "l-error",
                                                         "vowel-error"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<RatingRecord> rs;
    const std::size_t n = 1 + rng.index(6);
    for (std::size_t i = 0; i < n; ++i) {
      const int score = 1 + static_cast<int>(rng.index(5));
      std::optional<std::string> st;
      if (score == 1) st = subtypes[1 + rng.index(3)];
      if (score == 2 || score == 3) st = subtypes[rng.index(4)];
      rs.push_back(rating("r" + std::to_string(i), score, st));
    }
    const ConsensusLabel ref = consensus(rs);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(rs.begin(), rs.end(), rng.engine());
      CHECK(consensus(rs) == ref);
    }
  }
}

TEST_CASE("consensus csv round trip") {
  std::vector<RatingRecord> rs{rating("a", 1, "w-error"), rating("b", 1, "w-error"),
                               rating("c", 2)};
  RatingRecord g = rating("a", 5);
  g.file_id = "f2";
  rs.push_back(g);
  const auto labels = consensus_all(rs);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].file_id == "f1");
  const auto back = parse_consensus(write_consensus(labels));
  CHECK(back.size() == 2);
  CHECK(back[0].outcome == labels[0].outcome);
  CHECK(back[0].subtype == labels[0].subtype);
  CHECK(back[1].n_raters == 1);
}

TEST_CASE("ratings csv round trip") {
  RatingRecord r = rating("a", 2, "l-error");
  r.flags = {RatingFlag::PartialAudio, RatingFlag::TranscriptMismatch};
  r.lengthened = true;
  r.comment = "said twice, \"rrr\"";
  r.replay_count = 3;
  const std::vector<RatingRecord> rs{r, rating("b", 5)};
  CHECK(parse_ratings(write_ratings(rs)) == rs);
  CHECK(ratings_csv_header() == "file_id,rater_id,score,subtype,flags,lengthened,comment,replay_count\n");
}

TEST_CASE("subtype groups below the threshold are dropped") {
  std::vector<ConsensusLabel> labels;
  for (int i = 0; i < 14; ++i) labels.push_back(error_label("a" + std::to_string(i), "l-error"));
  for (int i = 0; i < 15; ++i) labels.push_back(error_label("b" + std::to_string(i), "w-error"));
  ConsensusLabel ok;
  ok.file_id = "c";
  ok.outcome = Outcome::CorrectUnanimous;
  labels.push_back(ok);

  const GroupFilterResult res = filter_min_count(labels);
  CHECK(res.counts.at("l-error") == 14);
  CHECK(res.counts.at("w-error") == 15);
  CHECK(res.dropped == std::set<std::string>{"l-error"});
  CHECK(res.labels.size() == 16);
  CHECK(filter_min_count(std::vector<ConsensusLabel>{}).labels.empty());
}

TEST_CASE("module scoring") {
  std::vector<int> expert(25, 5);
  const ModuleResult perfect = score_module(expert, expert);
  CHECK(perfect.binary_agreement_pct == 100.0);
  CHECK(perfect.within_one_pct == 100.0);
  CHECK(perfect.passed);

  // 4 against 3 crosses the binary boundary but stays within one point.
  std::vector<int> ex3(25, 3), r3(25, 3);
  for (int i = 0; i < 3; ++i) r3[i] = 4;
  const ModuleResult near = score_module(r3, ex3);
  CHECK(near.binary_agreement_pct == doctest::Approx(88.0));
  CHECK(near.within_one_pct == 100.0);
  CHECK_FALSE(near.passed);

  std::vector<int> ex50(50, 5), r50(50, 5);
  for (int i = 0; i < 5; ++i) r50[i] = 3;
  const ModuleResult edge = score_module(r50, ex50, 4);
  CHECK(edge.binary_agreement_pct == 90.0);
  CHECK(edge.within_one_pct == 90.0);
  CHECK(edge.passed);
  CHECK(edge.item_count == 50);

  CHECK(kind_of([] { score_module(std::vector<int>{1, 2}, std::vector<int>{1}); }) == ErrorKind::Shape);
  CHECK(module_item_count(1) == 25);
  CHECK(module_item_count(4) == 50);
  CHECK(module_item_count(kMaintenanceModule) == 50);
}

TEST_CASE("training progression") {
  ModuleResult pass;
  pass.passed = true;
  const ModuleResult fail;

  TrainingState s;
  s.module_id = 2;
  CHECK(advance_training(s, fail) == s);
  s = advance_training(s, pass);
  CHECK(s.module_id == 3);
  s = advance_training(advance_training(s, pass), pass);
  CHECK(s.certified);
  CHECK(s.module_id == kMaintenanceModule);

  for (std::size_t i = 0; i < 19; ++i) s = record_batch_completed(s);
  CHECK_FALSE(s.maintenance_due);
  s = record_batch_completed(s);
  CHECK(s.maintenance_due);
  CHECK(advance_training(s, fail).maintenance_due);
  s = advance_training(s, pass);
  CHECK_FALSE(s.maintenance_due);
  CHECK(s.batches_completed == 0);

  TrainingState fresh;
  CHECK(record_batch_completed(fresh) == fresh);
}

TEST_CASE("batches partition the pool and hide speaker data") {
  std::vector<PoolFile> pool;
  for (int i = 0; i < 250; ++i) {
    pool.push_back({"file" + std::to_string(i), "word", "audio/" + std::to_string(i) + ".wav",
                    "spk" + std::to_string(i % 7), "pre"});
  }
  const auto batches = make_batches(pool, kBatchSize, 9);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 100);
  CHECK(batches[1].size() == 100);
  CHECK(batches[2].size() == 50);
  std::set<std::string> seen;
  for (const auto& b : batches) {
    for (const auto& item : b) seen.insert(item.file_id);
  }
  CHECK(seen.size() == 250);
  CHECK(make_batches(pool, kBatchSize, 9) == batches);
  CHECK(make_batches(pool, kBatchSize, 10) != batches);
  CHECK(make_batch(pool, kBatchSize, 9) == batches.front());
  CHECK(kind_of([] { make_batches(std::vector<PoolFile>{}, 10, 0); }) == ErrorKind::EmptyInput);
}
