#include <doctest.h>

#include "vtv/error.hpp"
#include "vtv/extract.hpp"

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

TractVariableMatrix constant_matrix(double v) {
  TractVariableMatrix m(100);
  for (double& x : m.values) x = v;
  return m;
}

ConsensusLabel label(std::string file, Outcome outcome, std::string subtype, double mean) {
  ConsensusLabel l;
  l.file_id = std::move(file);
  l.outcome = outcome;
  l.subtype = std::move(subtype);
  l.mean_score = mean;
  l.n_raters = 3;
  return l;
}

struct Fixture {
  std::vector<FileRecord> files;
  std::map<std::string, TractVariableMatrix> matrices;
  std::vector<PhoneInterval> alignment;
  std::vector<ConsensusLabel> labels;
};

Fixture fixture() {
  Fixture fx;
  for (int i = 1; i <= 6; ++i) {
    const std::string id = "f" + std::to_string(i);
    fx.files.push_back({id, i <= 3 ? "spkA" : "spkB", "u" + std::to_string(i), id + ".csv"});
    fx.matrices.emplace(id, constant_matrix(0.1 * i));
  }
  fx.alignment = {
      {"f1", "aa", 0.0, 0.2}, {"f1", "r", 0.2, 0.5},    // correct
      {"f2", "r", 0.1, 0.4},                           // w-error
      {"f3", "r", 0.1, 0.4},                           // excluded
      {"f4", "w", 0.3, 0.6},                           // control, unrated
      {"f5", "r", 0.0, 0.3},                           // unrated target
      {"f6", "s", 0.0, 0.3},                           // dentalized
  };
  fx.labels = {
      label("f1", Outcome::CorrectUnanimous, "", 5.0),
      label("f2", Outcome::ErrorSubtype, "w-error", 1.5),
      label("f3", Outcome::Excluded, "", 3.0),
      label("f6", Outcome::ErrorSubtype, "dentalized", 2.0),
  };
  return fx;
}

}  // namespace

TEST_CASE("files csv round trip and unique ids") {
  const Fixture fx = fixture();
  CHECK(parse_files_csv(write_files_csv(fx.files)) == fx.files);
  CHECK(kind_of([] { parse_files_csv("file_id,speaker_id,utterance_id,tv_csv\na,s,u,x\na,s,u,y\n"); }) ==
        ErrorKind::Validation);
}

TEST_CASE("targets take their consensus label and controls pass through") {
  const Fixture fx = fixture();
  const ExtractResult res =
      extract_observations(fx.files, fx.matrices, fx.alignment, fx.labels, {.min_group_size = 1});
  REQUIRE(res.observations.size() == 4);
  const auto& o = res.observations;
  CHECK(o[0].file_id == "f1");
  CHECK(o[0].phone == "r");
  CHECK(o[0].mean_score == 5.0);
  CHECK(o[0].tv[0] == doctest::Approx(0.1));
  CHECK(o[1].phone == "r_w");
  CHECK(o[1].mean_score == 1.5);
  CHECK(o[2].phone == "w");
  CHECK_FALSE(o[2].mean_score.has_value());
  CHECK(o[2].speaker_id == "spkB");
  CHECK(o[3].phone == "s_dental");
  CHECK(o[3].source.has_value());
  CHECK(res.excluded == 2);
  CHECK(res.dropped == 0);
  CHECK(res.group_counts.at("r:w-error") == 1);
  CHECK(res.group_counts.at("s:dentalized") == 1);
}

TEST_CASE("small error groups are dropped per target") {
  const Fixture fx = fixture();
  const ExtractResult res =
      extract_observations(fx.files, fx.matrices, fx.alignment, fx.labels, {.min_group_size = 2});
  CHECK(res.observations.size() == 2);
  CHECK(res.dropped == 2);
  CHECK(res.dropped_groups == std::vector<std::string>{"r:w-error", "s:dentalized"});
}

TEST_CASE("sources can be left out") {
  const Fixture fx = fixture();
  const ExtractResult res = extract_observations(fx.files, fx.matrices, fx.alignment, fx.labels,
                                                 {.min_group_size = 1, .keep_source = false});
  for (const auto& o : res.observations) CHECK_FALSE(o.source.has_value());
}

TEST_CASE("missing files and series are reported") {
  Fixture fx = fixture();
  fx.matrices.erase("f4");
  CHECK(kind_of([&] { extract_observations(fx.files, fx.matrices, fx.alignment, fx.labels); }) ==
        ErrorKind::MissingData);
  fx = fixture();
  fx.files.erase(fx.files.begin());
  CHECK(kind_of([&] { extract_observations(fx.files, fx.matrices, fx.alignment, fx.labels); }) ==
        ErrorKind::MissingData);
}
