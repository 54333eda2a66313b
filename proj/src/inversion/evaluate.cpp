#include "vtv/inversion/evaluate.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/inversion/loss.hpp"

namespace vtv::inversion {

EvalReport evaluate_predictions(std::span<const TractVariableMatrix> preds,
                                std::span<const TractVariableMatrix> truths) {
  if (preds.empty()) throw Error(ErrorKind::EmptyInput, "empty test set");
  if (preds.size() != truths.size()) {
    throw Error(ErrorKind::Shape, "prediction and target counts differ");
  }
  EvalReport rep;
  std::vector<double> p, t;
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    p.clear();
    t.clear();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].frames != truths[i].frames) {
        throw Error(ErrorKind::Shape, "prediction and target lengths differ");
      }
      const auto pc = preds[i].channel(c);
      const auto tc = truths[i].channel(c);
      p.insert(p.end(), pc.begin(), pc.end());
      t.insert(t.end(), tc.begin(), tc.end());
    }
    rep.r[c] = pearson_r(p, t);
  }
  constexpr std::size_t kOral = 6;
  double sum = 0.0;
  for (std::size_t c = 0; c < kOral; ++c) sum += rep.r[c];
  rep.oral_mean = sum / kOral;
  double ss = 0.0;
  for (std::size_t c = 0; c < kOral; ++c) ss += (rep.r[c] - rep.oral_mean) * (rep.r[c] - rep.oral_mean);
  rep.oral_std = std::sqrt(ss / (kOral - 1));
  return rep;
}

EvalReport evaluate(const InversionModel& model, std::span<const Sample> test_set) {
  std::vector<TractVariableMatrix> preds, truths;
  preds.reserve(test_set.size());
  truths.reserve(test_set.size());
  for (const auto& s : test_set) {
    preds.push_back(forward(model, s.embedding));
    truths.push_back(s.target);
  }
  return evaluate_predictions(preds, truths);
}

std::string format_eval_csv(const EvalReport& report, const std::string& model_name,
                            bool include_reference) {
  std::string out = "model";
  for (auto name : kReportChannelOrder) out += fmt::format(",{}", name);
  out += ",mean_oral,std_oral\n";
  const auto row = [&out](const std::string& name, const auto& values, double mean,
                          double sd) {
    out += name;
    for (double v : values) out += fmt::format(",{:.4f}", v);
    out += fmt::format(",{:.4f},{:.3f}\n", mean, sd);
  };
  std::array<double, kTvChannelCount> ordered{};
  for (std::size_t i = 0; i < kTvChannelCount; ++i) {
    ordered[i] = report.r[static_cast<std::size_t>(tv_channel_index(kReportChannelOrder[i]))];
  }
  row(model_name, ordered, report.oral_mean, report.oral_std);
  if (include_reference) row("reference", kReferenceR, kReferenceOralMean, kReferenceOralStd);
  return out;
}

}  // namespace vtv::inversion
