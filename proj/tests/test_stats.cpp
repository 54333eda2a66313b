#include <doctest.h>

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "criteria.hpp"
#include "oracles.hpp"
#include "vtv/error.hpp"
#include "vtv/extract.hpp"
#include "vtv/random.hpp"
#include "vtv/stats/analysis.hpp"
#include "vtv/synthdata.hpp"

using namespace vtv;
using namespace vtv::stats;

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

// Balanced one-way layout: `a` speakers with `n` rows each, intercept only.
struct OneWay {
  LmmSpec spec;
  LmmData data;
};

OneWay one_way(std::size_t a, std::size_t n, double sd_speaker, double sd_resid,
               std::uint64_t seed) {
  OneWay w;
  w.spec.random = RandomEffects::SpeakerOnly;
  Rng rng(seed);
  for (std::size_t s = 0; s < a; ++s) {
    const double b = rng.normal(0.0, sd_speaker);
    for (std::size_t i = 0; i < n; ++i) {
      w.data.y.push_back(1.5 + b + rng.normal(0.0, sd_resid));
      w.data.speaker.push_back("s" + std::to_string(s));
      w.data.utterance.push_back("u" + std::to_string(i));
    }
  }
  return w;
}

std::vector<PhoneObservation> clinical_observations(std::uint64_t seed) {
  ClinicalSpec spec;
  spec.seed = seed;
  const ClinicalCorpus corpus = synth_clinical_corpus(spec);
  std::vector<FileRecord> files;
  std::map<std::string, TractVariableMatrix> matrices;
  for (const auto& f : corpus.files) {
    files.push_back({f.file_id, f.speaker_id, f.utterance_id, f.file_id + ".csv"});
    matrices.emplace(f.file_id, f.tv);
  }
  const auto labels = consensus_all(corpus.ratings);
  return extract_observations(files, matrices, corpus.alignment, labels).observations;
}

PhoneObservation observation(std::string file, std::string speaker, std::string phone,
                             std::optional<double> score) {
  PhoneObservation o;
  o.file_id = std::move(file);
  o.speaker_id = std::move(speaker);
  o.utterance_id = o.file_id;
  o.phone = std::move(phone);
  o.mean_score = score;
  return o;
}

}  // namespace

TEST_CASE("zero random variance reproduces least squares") {
  const auto v = criteria::lmm_zero_variance(3);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("balanced one-way speaker variance matches the ANOVA estimator") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::size_t a = 15, n = 8;
    const OneWay w = one_way(a, n, 0.3, 0.2, seed);
    const Design design(w.spec, w.data);
    const LmmFit fit = fit_lmm_reml(design, w.data);

    std::vector<double> means(a, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < w.data.rows(); ++i) {
      means[i / n] += w.data.y[i] / n;
      grand += w.data.y[i] / static_cast<double>(a * n);
    }
    double ssb = 0.0, ssw = 0.0;
    for (std::size_t s = 0; s < a; ++s) ssb += n * (means[s] - grand) * (means[s] - grand);
    for (std::size_t i = 0; i < w.data.rows(); ++i) {
      ssw += (w.data.y[i] - means[i / n]) * (w.data.y[i] - means[i / n]);
    }
    const double msb = ssb / (a - 1), msw = ssw / (a * (n - 1));
    const double sigma2_speaker = (msb - msw) / n;
    REQUIRE(sigma2_speaker > 0.0);
    CHECK(std::abs(fit.sigma2_speaker - sigma2_speaker) <= 1e-6);
    CHECK(std::abs(fit.sigma2_resid - msw) <= 1e-6);
    CHECK(std::abs(fit.beta[0] - grand) <= 1e-10);
  }
}

TEST_CASE("intercept-only nested model gives the grand mean") {
  const auto sim = criteria::simulate_nested(5, 0.1, 0.05, 0.02, 10, 8);
  LmmSpec spec;
  spec.response = "tv_value";
  const Design design(spec, sim.data);
  const LmmFit fit = fit_lmm_reml(design, sim.data);
  double grand = 0.0;
  for (double y : sim.data.y) grand += y;
  grand /= static_cast<double>(sim.data.rows());
  CHECK(std::abs(fit.beta[0] - grand) <= 1e-10);
  CHECK(fit.sigma2_speaker >= 0.0);
  CHECK(fit.sigma2_utterance >= 0.0);
}

TEST_CASE("fixed effects and variances are recovered") {
  const auto sim = criteria::simulate_nested(42, 0.10, 0.05, 0.02);
  const Design design(sim.spec, sim.data);
  const LmmFit fit = fit_lmm_reml(design, sim.data);
  CHECK(fit.cov_beta.isApprox(fit.cov_beta.transpose()));
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fit.cov_beta).eigenvalues().minCoeff() >= -1e-15);
  CHECK(fit.n_speakers == 50);
  CHECK(fit.n_utterances == 1000);
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
    CHECK(std::abs(fit.beta[j] - sim.beta[j]) <= 4.0 * std::sqrt(fit.cov_beta(j, j)));
  }
}

TEST_CASE("aliased columns are a rank error") {
  LmmSpec spec;
  spec.variables = {{"a", Variable::Kind::Numeric, {}}, {"b", Variable::Kind::Numeric, {}}};
  spec.random = RandomEffects::None;
  LmmData data;
  for (int i = 0; i < 20; ++i) {
    data.y.push_back(i);
    data.speaker.push_back("s" + std::to_string(i % 2));
    data.utterance.push_back("u" + std::to_string(i));
    data.numerics["a"].push_back(i);
    data.numerics["b"].push_back(2.0 * i);
  }
  CHECK(kind_of([&] { Design d(spec, data); }) == ErrorKind::Rank);
}

TEST_CASE("EMMs and contrasts against the cell-means oracle") {
  const auto v = criteria::emm_contrast_oracle(4);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("EMM linearity and contrast identities") {
  auto sim = criteria::simulate_nested(8, 0.1, 0.05, 0.02, 10, 8);
  const Design design(sim.spec, sim.data);
  const LmmFit fit = fit_lmm_reml(design, sim.data);
  const auto emms = emmeans(fit, design, {"phone", "tv_identity"});
  CHECK(emms.size() == 24);

  const auto self = contrast(fit, emms[3], emms[3], "self");
  CHECK(self.delta_mu == 0.0);
  CHECK(self.p == 1.0);

  for (double& y : sim.data.y) y += 2.5;
  const Design shifted_design(sim.spec, sim.data);
  const LmmFit shifted = fit_lmm_reml(shifted_design, sim.data);
  const auto shifted_emms = emmeans(shifted, shifted_design, {"phone", "tv_identity"});
  for (std::size_t i = 0; i < emms.size(); ++i) {
    CHECK(std::abs(shifted_emms[i].mean - emms[i].mean - 2.5) <= 1e-9);
    CHECK(shifted_emms[i].se == doctest::Approx(emms[i].se).epsilon(1e-6));
  }

  CHECK(kind_of([&] { find_emm(emms, {{"phone", "nope"}, {"tv_identity", "LA"}}); }) ==
        ErrorKind::Lookup);
}

TEST_CASE("normal p values") {
  CHECK(normal_two_sided_p(0.0) == 1.0);
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(normal_two_sided_p(-3.0) == doctest::Approx(0.0026997960632601866).epsilon(1e-12));
}

TEST_CASE("Benjamini-Hochberg examples and properties") {
  CHECK(bh_adjust(std::vector<double>{0.3}) == std::vector<double>{0.3});
  const auto four = bh_adjust(std::vector<double>{0.01, 0.02, 0.03, 0.04});
  for (double p : four) CHECK(p == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(bh_adjust(std::vector<double>{0.2, 0.2, 0.2}) == std::vector<double>{0.2, 0.2, 0.2});
  CHECK(bh_adjust(std::vector<double>{}).empty());
  CHECK(kind_of([] { bh_adjust(std::vector<double>{0.1, 1.5}); }) == ErrorKind::Domain);
  CHECK(kind_of([] { bh_adjust(std::vector<double>{-0.1}); }) == ErrorKind::Domain);
  CHECK(kind_of([] { bh_adjust(std::vector<double>{std::nan("")}); }) == ErrorKind::Domain);

  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> p(1 + rng.index(40));
    for (double& x : p) x = rng.uniform();
    const auto adj = bh_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(adj[i] >= p[i]);
      CHECK(adj[i] <= 1.0);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) CHECK(adj[i] <= adj[j]);
      }
    }
  }
  const auto v = criteria::bh_random(1000, 3);
  INFO(v.detail);
  CHECK(v.pass);
}

TEST_CASE("articulatory squared distance") {
  PhoneObservation o;
  o.file_id = "f";
  const OralMeans means{1, 2, 3, 4, 5, 6};
  o.tv = {1, 2, 3, 4, 5, 6};
  for (const auto& m : articulatory_msd(o, means)) CHECK(m.msd == 0.0);

  // Lips use LP as location and LA as degree.
  o.tv = {1.4, 2.3, 3, 4, 5, 6};
  const auto lips = articulatory_msd(o, means)[0];
  CHECK(lips.articulator == Articulator::Lips);
  CHECK(lips.msd == doctest::Approx(0.25).epsilon(1e-12));

  o.tv = {1.8, 2.6, 3, 4, 5, 6};
  CHECK(articulatory_msd(o, means)[0].msd == doctest::Approx(1.0).epsilon(1e-12));

  o.tv = {1.3, 2.4, 3, 4, 5, 6};
  CHECK(articulatory_msd(o, means)[0].msd == doctest::Approx(0.25).epsilon(1e-12));

  o.tv[4] = std::nan("");
  CHECK(kind_of([&] { articulatory_msd(o, means); }) == ErrorKind::MissingData);
  CHECK(kind_of([] { oral_means(std::vector<PhoneObservation>{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("confidence ellipse of an isotropic sample") {
  CHECK(chi2_2df_95() == doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-12));
  Rng rng(2024);
  std::vector<Point2> pts(100000);
  for (auto& p : pts) p = {rng.normal(), rng.normal()};
  const ConfidenceEllipse e = confidence_ellipse(pts);
  const double want = std::sqrt(5.991);
  CHECK(std::abs(e.major / want - 1.0) <= 0.02);
  CHECK(std::abs(e.minor / want - 1.0) <= 0.02);
  CHECK(e.n == pts.size());
}

TEST_CASE("ellipse rotation and translation equivariance") {
  Rng rng(7);
  std::vector<Point2> pts(500);
  for (auto& p : pts) p = {3.0 * rng.normal(), rng.normal() + 0.4 * rng.normal()};
  const ConfidenceEllipse base = confidence_ellipse(pts);
  for (double theta : {0.3, 1.1, -0.7, 2.5}) {
    std::vector<Point2> rot;
    for (auto p : pts) {
      rot.push_back({p.x * std::cos(theta) - p.y * std::sin(theta),
                     p.x * std::sin(theta) + p.y * std::cos(theta)});
    }
    const ConfidenceEllipse r = confidence_ellipse(rot);
    CHECK(std::abs(r.major - base.major) <= 1e-9);
    CHECK(std::abs(r.minor - base.minor) <= 1e-9);
    // Axis directions are defined modulo pi.
    const double d = std::remainder(r.angle - base.angle - theta, std::numbers::pi);
    CHECK(std::abs(d) <= 1e-9);
  }
  std::vector<Point2> moved;
  for (auto p : pts) moved.push_back({p.x + 10.0, p.y - 4.0});
  const ConfidenceEllipse t = confidence_ellipse(moved);
  CHECK(std::abs(t.center.x - base.center.x - 10.0) <= 1e-9);
  CHECK(std::abs(t.center.y - base.center.y + 4.0) <= 1e-9);
  CHECK(std::abs(t.major - base.major) <= 1e-9);
  CHECK(std::abs(t.angle - base.angle) <= 1e-9);

  CHECK(kind_of([] { confidence_ellipse(std::vector<Point2>{{0, 0}, {1, 1}}); }) ==
        ErrorKind::DegenerateSample);
  CHECK(kind_of([] { confidence_ellipse(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}}); }) ==
        ErrorKind::DegenerateSample);
}

TEST_CASE("hypothesis table") {
  const auto r = hypothesis_table(Target::R);
  CHECK(r.size() == 18);
  CHECK(r[0].kind == "control_vs_correct");
  CHECK(r[0].phone == "w");
  CHECK(r[0].reference == "r");
  CHECK(r[0].channel == "LP");
  CHECK(r[0].expected_sign == 1);
  CHECK(hypothesis_table(Target::S).size() == 15);
  CHECK(error_phone(Target::R, "w-error") == "r_w");
  CHECK_FALSE(error_phone(Target::S, "omitted").has_value());
  CHECK(phone_family("s_palatal") == Target::S);
  CHECK_FALSE(phone_family("aa").has_value());
}

TEST_CASE("categorical analysis reproduces every expected sign") {
  const auto obs = clinical_observations(0);
  for (Target t : {Target::R, Target::S}) {
    const CategoricalReport rep = analyze_categorical(obs, t);
    CHECK(rep.contrasts.size() == hypothesis_table(t).size());
    for (const auto& c : rep.contrasts) {
      INFO(c.hypothesis, " ", c.phone);
      CHECK(c.supported);
      CHECK(c.p_adj < 0.05);
      CHECK(c.p_adj >= c.p);
      CHECK(std::abs(c.z - c.delta_mu / c.se) <= 1e-12 * std::abs(c.z));
      CHECK(c.supported == (c.p_adj < 0.05 && (c.delta_mu > 0) == (c.expected_sign > 0)));
    }
    const auto back = parse_contrasts(write_contrasts(rep.contrasts));
    CHECK(back == rep.contrasts);
  }
}

TEST_CASE("scaling or negating the response") {
  const auto obs = clinical_observations(1);
  const CategoricalReport base = analyze_categorical(obs, Target::R);
  for (double c : {2.0, -1.0}) {
    auto scaled = obs;
    for (auto& o : scaled) {
      for (double& v : o.tv) v *= c;
    }
    const CategoricalReport rep = analyze_categorical(scaled, Target::R);
    REQUIRE(rep.contrasts.size() == base.contrasts.size());
    for (std::size_t i = 0; i < rep.contrasts.size(); ++i) {
      const auto& a = base.contrasts[i];
      const auto& b = rep.contrasts[i];
      CHECK(b.delta_mu == doctest::Approx(c * a.delta_mu).epsilon(1e-6));
      CHECK(b.se == doctest::Approx(std::abs(c) * a.se).epsilon(1e-6));
      CHECK(std::abs(b.z) == doctest::Approx(std::abs(a.z)).epsilon(1e-6));
      if (c > 0) CHECK(b.supported == a.supported);
    }
  }
}

TEST_CASE("categorical analysis needs every hypothesis phone") {
  auto obs = clinical_observations(2);
  std::erase_if(obs, [](const PhoneObservation& o) { return o.phone == "ah"; });
  CHECK(kind_of([&] { analyze_categorical(obs, Target::R); }) == ErrorKind::MissingGroup);
}

TEST_CASE("only fully correct rows enter as correct") {
  auto obs = clinical_observations(3);
  const CategoricalReport base = analyze_categorical(obs, Target::S);
  CHECK(base.dropped_correct == 0);
  auto extra = obs;
  PhoneObservation partial = observation("extra", obs.front().speaker_id, "s", 4.0);
  extra.push_back(partial);
  CHECK(analyze_categorical(extra, Target::S).dropped_correct == 1);
}

TEST_CASE("gradient model recovers a generated score slope") {
  constexpr double kSlope = -0.04;
  Rng rng(31);
  std::vector<PhoneObservation> obs;
  for (int s = 0; s < 30; ++s) {
    const std::string spk = "spk" + std::to_string(s);
    const double b_s = rng.normal(0.0, 0.02);
    for (const char* phone : {"r", "s"}) {
      for (int k = 0; k < 2; ++k) {
        obs.push_back(observation(fmt::format("{}_{}_{}", spk, phone, k), spk, phone, 5.0));
      }
    }
    for (const char* phone : {"w", "th"}) obs.push_back(observation(spk + phone, spk, phone, {}));
    for (int k = 0; k < 8; ++k) {
      const std::string phone = k % 2 == 0 ? "r_w" : "s_dental";
      const double score = static_cast<double>(3 + rng.index(12)) / 3.0;
      PhoneObservation o = observation(fmt::format("{}_e{}", spk, k), spk, phone, score);
      const double b_u = rng.normal(0.0, 0.01);
      for (Articulator a : kArticulators) {
        const double msd = 0.5 + kSlope * score + b_s + b_u + rng.normal(0.0, 0.005);
        o.tv[articulator_channels(a).location] = std::sqrt(msd);
      }
      obs.push_back(o);
    }
  }
  const GradientReport rep = analyze_gradient(obs);
  CHECK(rep.excluded_correct == 120);
  CHECK(rep.excluded_control == 60);
  CHECK(rep.rows.size() == 30 * 8 * 3);
  for (const auto& r : rep.rows) {
    CHECK(r.phone != "r");
    CHECK(r.phone != "w");
    CHECK(r.phone != "th");
  }
  const std::size_t k = rep.fit.column_index(std::string(kScoreVariable));
  const Coefficient& slope = rep.coefficients[k];
  CHECK(slope.term == kScoreVariable);
  CHECK(slope.beta < 0.0);
  CHECK(std::abs(slope.beta - kSlope) <= 3.0 * slope.se);
  CHECK(parse_coefficients(write_coefficients(rep.coefficients)) == rep.coefficients);
  CHECK(parse_msd_rows(write_msd_rows(rep.rows)) == rep.rows);
}

TEST_CASE("gradient model on the clinical corpus") {
  const auto obs = clinical_observations(0);
  const GradientReport rep = analyze_gradient(obs);
  const auto& slope = rep.coefficients[rep.fit.column_index(std::string(kScoreVariable))];
  CHECK(slope.beta < 0.0);
  CHECK(slope.t < -2.0);

  std::vector<PhoneObservation> only_correct;
  for (const auto& o : obs) {
    if (o.phone == "r" || o.phone == "s") only_correct.push_back(o);
  }
  CHECK(kind_of([&] { analyze_gradient(only_correct); }) == ErrorKind::EmptyAnalysis);
}

TEST_CASE("phone ellipses") {
  const auto obs = clinical_observations(0);
  const auto ellipses = phone_ellipses(obs);
  CHECK_FALSE(ellipses.empty());
  for (std::size_t i = 1; i < ellipses.size(); ++i) {
    CHECK(ellipses[i - 1].phone <= ellipses[i].phone);
  }
  const auto json = nlohmann::json::parse(write_ellipses_json(ellipses));
  REQUIRE(json.size() == ellipses.size());
  CHECK(json[0]["axes"][0].get<double>() == ellipses[0].ellipse.major);
  CHECK(json[0]["n"].get<std::size_t>() == ellipses[0].ellipse.n);
}
