// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "criteria.hpp"
#include "vtv/cli.hpp"
#include "vtv/inversion/evaluate.hpp"
#include "vtv/inversion/loss.hpp"
#include "vtv/inversion/train.hpp"
#include "vtv/io/csv.hpp"
#include "vtv/kinematics.hpp"
#include "vtv/random.hpp"
#include "vtv/stats/analysis.hpp"
#include "vtv/synthdata.hpp"

namespace fs = std::filesystem;
using criteria::Verdict;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Verdict with_time_limit(Verdict v, double elapsed, double limit) {
  v.detail += fmt::format("; {:.1f} s (limit {:.0f} s)", elapsed, limit);
  v.pass = v.pass && elapsed < limit;
  return v;
}

Verdict geometry() {
  const auto t0 = Clock::now();
  Verdict v = criteria::geometry_oracle(1000, 2024);
  return with_time_limit(std::move(v), seconds_since(t0), 30.0);
}

Verdict normalization() {
  vtv::Rng rng(11);
  std::size_t endpoint_misses = 0;
  double worst_trip = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double lo = rng.uniform(-50.0, 50.0);
    const double hi = lo + std::exp(rng.uniform(-6.0, 5.0));
    const vtv::ChannelRange range{lo, hi};
    endpoint_misses += vtv::normalize(lo, range) != -1.0;
    endpoint_misses += vtv::normalize(hi, range) != 1.0;
    const double v = rng.uniform(lo - 5.0, hi + 5.0);
    const double back = vtv::denormalize(vtv::normalize(v, range), range);
    worst_trip = std::max(worst_trip, std::abs(back - v) / std::max(1.0, std::abs(v)));
  }
  const vtv::ChannelRange flat{3.5, 3.5};
  const bool degenerate = vtv::normalize(3.5, flat) == 0.0 && vtv::normalize(-7.0, flat) == 0.0;
  return {endpoint_misses == 0 && worst_trip <= 1e-12 && degenerate,
          fmt::format("10^4 ranges: {} endpoint misses, worst round trip {:.1e}, degenerate range "
                      "{}",
                      endpoint_misses, worst_trip, degenerate ? "maps to 0" : "does not map to 0")};
}

vtv::inversion::Sample synth_sample(std::uint64_t seed, std::size_t frames, std::size_t dim) {
  vtv::SynthSpec s;
  s.seed = seed;
  s.n_frames = frames;
  s.embedding_dim = dim;
  auto [e, t] = vtv::synth_training_pair(s);
  return {std::move(e), std::move(t)};
}

Verdict loss_suite() {
  using vtv::inversion::loss;
  double worst_perfect = 0.0, worst_limit = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = synth_sample(seed, 20, 6);
    const auto b = synth_sample(seed + 1000, 20, 6);
    for (double alpha : {0.0, 0.8, 1.0}) {
      worst_perfect = std::max(worst_perfect, std::abs(loss(a.target, a.target, alpha)));
    }
    double rmse = 0.0, one_minus_r = 0.0;
    for (std::size_t c = 0; c < vtv::kTvChannelCount; ++c) {
      const auto p = b.target.channel(c);
      const auto t = a.target.channel(c);
      double sq = 0.0, mp = 0.0, mt = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        sq += (p[j] - t[j]) * (p[j] - t[j]);
        mp += p[j] / static_cast<double>(p.size());
        mt += t[j] / static_cast<double>(p.size());
      }
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        sxy += (p[j] - mp) * (t[j] - mt);
        sxx += (p[j] - mp) * (p[j] - mp);
        syy += (t[j] - mt) * (t[j] - mt);
      }
      rmse += std::sqrt(sq / static_cast<double>(p.size())) / vtv::kTvChannelCount;
      one_minus_r += (1.0 - sxy / std::sqrt(sxx * syy)) / vtv::kTvChannelCount;
    }
    worst_limit = std::max({worst_limit, std::abs(loss(b.target, a.target, 0.0) - rmse),
                            std::abs(loss(b.target, a.target, 1.0) - one_minus_r)});
  }
  // Constant zero prediction against a +-1 square wave: r = 0, RMSE = 1.
  vtv::TractVariableMatrix zeros(40), square(40);
  for (std::size_t c = 0; c < vtv::kTvChannelCount; ++c) {
    for (std::size_t j = 0; j < 40; ++j) square.at(c, j) = j % 2 == 0 ? 1.0 : -1.0;
  }
  const double worked = loss(zeros, square, 0.8);
  const bool pass = worst_perfect == 0.0 && worst_limit <= 1e-12 && std::abs(worked - 1.0) <= 1e-12;
  return {pass, fmt::format("perfect prediction max loss {:.1e}; alpha limits max difference {:.1e}; "
                            "worked example {:.15g}",
                            worst_perfect, worst_limit, worked)};
}

Verdict gradient() {
  const auto t0 = Clock::now();
  vtv::inversion::ModelDims d;
  d.conv_channels = 4;
  d.feature_dim = 6;
  d.gru1 = 8;
  d.gru2 = 4;
  d.dense1 = 8;
  const vtv::inversion::InversionModel model(d, 3);
  const auto sample = synth_sample(5, 5, 6);
  double worst = 0.0;
  std::size_t checked = 0;
  for (double alpha : {vtv::inversion::kDefaultAlpha, 0.0, 1.0}) {
    const auto r = vtv::inversion::gradient_check(model, sample, 1e-5, alpha, model.params.size(), 1);
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }
  Verdict v{worst <= 1e-4, fmt::format("{} parameters x 3 loss weightings, max relative error {:.2e}",
                                       model.params.size(), worst)};
  v.pass = v.pass && checked == 3 * model.params.size();
  return with_time_limit(std::move(v), seconds_since(t0), 60.0);
}

Verdict overfit() {
  const auto t0 = Clock::now();
  std::vector<vtv::inversion::Sample> data;
  for (std::uint64_t s = 100; s < 108; ++s) data.push_back(synth_sample(s, 50, 32));
  vtv::inversion::TrainConfig cfg;
  cfg.max_epochs = 500;
  cfg.patience_epochs = 1000;
  cfg.batch_size = 8;
  cfg.seed = 1;
  vtv::inversion::ModelDims dims;
  dims.feature_dim = 32;
  const auto run = [&] {
    return vtv::inversion::train(vtv::inversion::InversionModel(dims, cfg.seed), data, data, cfg);
  };
  const auto first = run();
  const auto rep = vtv::inversion::evaluate(first.model, data);
  const double min_r = *std::min_element(rep.r.begin(), rep.r.end());
  const auto second = run();
  const bool same = first.model.params == second.model.params &&
                    first.model.bn_running == second.model.bn_running;
  Verdict v{min_r >= 0.95 && same,
            fmt::format("8 utterances, {} epochs, lowest per-channel training r {:.4f}; rerun "
                        "{}",
                        first.history.size(), min_r, same ? "identical" : "differs")};
  return with_time_limit(std::move(v), seconds_since(t0), 1200.0);
}

Verdict lmm() {
  Verdict rec = criteria::lmm_recovery(100, 1);
  const Verdict zero = criteria::lmm_zero_variance(3);
  return {rec.pass && zero.pass, rec.detail + "; " + zero.detail};
}

struct Pipeline {
  std::vector<vtv::stats::ContrastRow> contrasts;
  std::vector<vtv::stats::Coefficient> coefficients;
  std::map<std::string, std::string> files;  // report name -> bytes
  std::string error;
};

Pipeline run_pipeline(const fs::path& dir) {
  Pipeline p;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  const auto call = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    if (vtv::cli::run(args, out, err) != 0 && p.error.empty()) p.error = err.str();
  };
  call({"synth", "--seed", "0", "--out", d + "/syn"});
  const std::string clin = d + "/syn/clinical";
  call({"extract", "--files", clin + "/files.csv", "--alignment", clin + "/alignment.csv",
        "--ratings", clin + "/ratings.csv", "--out", d + "/ex"});
  const std::string obs = d + "/ex/observations.csv";
  call({"analyze-categorical", "--target", "r", "--observations", obs, "--out", d + "/an"});
  call({"analyze-categorical", "--target", "s", "--observations", obs, "--out", d + "/an"});
  call({"analyze-gradient", "--observations", obs, "--out", d + "/an"});
  if (!p.error.empty()) return p;
  for (const char* name : {"contrasts_r.csv", "contrasts_s.csv", "coefficients.csv"}) {
    p.files[name] = vtv::io::read_text_file(dir / "an" / name);
  }
  for (const char* name : {"contrasts_r.csv", "contrasts_s.csv"}) {
    const auto rows = vtv::stats::parse_contrasts(p.files[name]);
    p.contrasts.insert(p.contrasts.end(), rows.begin(), rows.end());
  }
  p.coefficients = vtv::stats::parse_coefficients(p.files["coefficients.csv"]);
  return p;
}

const fs::path kWork = fs::temp_directory_path() / "vtv_acceptance";

Verdict sign_pattern() {
  const Pipeline p = run_pipeline(kWork / "run1");
  if (!p.error.empty()) return {false, "pipeline failed: " + p.error};
  std::size_t supported = 0;
  for (const auto& c : p.contrasts) {
    supported += c.p_adj < 0.05 && (c.delta_mu > 0.0) == (c.expected_sign > 0);
  }
  const std::size_t expected = vtv::stats::hypothesis_table(vtv::Target::R).size() +
                               vtv::stats::hypothesis_table(vtv::Target::S).size();
  const auto it = std::find_if(p.coefficients.begin(), p.coefficients.end(), [](const auto& c) {
    return c.term == vtv::stats::kScoreVariable;
  });
  const bool slope_ok = it != p.coefficients.end() && it->beta < 0.0 && it->p < 0.05;
  return {p.contrasts.size() == expected && supported == expected && slope_ok,
          fmt::format("{}/{} expected signs with p_adj < .05; prs_score beta {:.4f} (t {:.2f}, "
                      "p {:.1e})",
                      supported, expected, it != p.coefficients.end() ? it->beta : std::nan(""),
                      it != p.coefficients.end() ? it->t : std::nan(""),
                      it != p.coefficients.end() ? it->p : std::nan(""))};
}

Verdict report_fidelity() {
  const Pipeline a = run_pipeline(kWork / "run1");
  const Pipeline b = run_pipeline(kWork / "run2");
  if (!a.error.empty() || !b.error.empty()) return {false, "pipeline failed: " + a.error + b.error};
  const auto header = [](const std::string& text) { return text.substr(0, text.find('\n')); };
  const std::string contrast_header =
      "family,hypothesis,phone,delta_mu,se,z,p,p_adj,expected_sign,supported";
  const bool headers = header(a.files.at("contrasts_r.csv")) == contrast_header &&
                       header(a.files.at("contrasts_s.csv")) == contrast_header &&
                       header(a.files.at("coefficients.csv")) == "term,beta,se,t,p";
  const bool stable = a.files == b.files;
  // Parsing and rewriting reproduces the same bytes.
  const bool round_trip =
      vtv::stats::write_coefficients(a.coefficients) == a.files.at("coefficients.csv") &&
      vtv::stats::write_contrasts(vtv::stats::parse_contrasts(a.files.at("contrasts_r.csv"))) ==
          a.files.at("contrasts_r.csv");
  fs::remove_all(kWork);
  return {headers && stable && round_trip,
          fmt::format("schemas {}; two runs {}; parse-write {}", headers ? "match" : "differ",
                      stable ? "byte-identical" : "differ", round_trip ? "identical" : "differs")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> checks{
      {"geometry oracle", geometry},
      {"normalization suite", normalization},
      {"loss suite", loss_suite},
      {"gradient check", gradient},
      {"overfit", overfit},
      {"mixed-model recovery", lmm},
      {"EMM and contrast oracle", [] { return criteria::emm_contrast_oracle(4); }},
      {"Benjamini-Hochberg oracle", [] { return criteria::bh_random(10000, 1); }},
      {"consensus oracle", [] { return criteria::consensus_exhaustive(4, true); }},
      {"sign pattern end to end", sign_pattern},
      {"report fidelity", report_fidelity},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
