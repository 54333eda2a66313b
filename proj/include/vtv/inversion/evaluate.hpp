#pragma once

#include <array>
#include <span>
#include <string>

#include "vtv/inversion/model.hpp"
#include "vtv/inversion/train.hpp"
#include "vtv/tensors.hpp"

namespace vtv::inversion {

// Per-channel r over the concatenated test set, in kTvChannelNames order,
// plus mean and sample standard deviation over the six oral channels.
struct EvalReport {
  std::array<double, kTvChannelCount> r{};
  double oral_mean = 0.0;
  double oral_std = 0.0;
};

EvalReport evaluate_predictions(std::span<const TractVariableMatrix> preds,
                                std::span<const TractVariableMatrix> truths);

EvalReport evaluate(const InversionModel& model, std::span<const Sample> test_set);

// Column order of the published correlation table.
inline constexpr std::array<std::string_view, kTvChannelCount> kReportChannelOrder{
    "LA", "LP", "TTCL", "TTCD", "TBCL", "TBCD", "PER", "APER", "F0"};

// Published reference row for the WavLM-Large system.
inline constexpr std::array<double, kTvChannelCount> kReferenceR{
    .9123, .7485, .8160, .9457, .7846, .8571, .9165, .8487, .6943};
inline constexpr double kReferenceOralMean = .8440;
inline constexpr double kReferenceOralStd = .076;

// CSV: header `model,LA,LP,TTCL,TTCD,TBCL,TBCD,PER,APER,F0,mean_oral,std_oral`,
// one row for `report` and, when requested, one `reference` row.
std::string format_eval_csv(const EvalReport& report, const std::string& model_name,
                            bool include_reference);

}  // namespace vtv::inversion
