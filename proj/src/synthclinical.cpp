#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/random.hpp"
#include "vtv/stats/analysis.hpp"
#include "vtv/synthdata.hpp"

namespace vtv {

void ClinicalSpec::validate() const {
  if (speakers < 2) throw Error(ErrorKind::Config, "clinical corpus needs at least 2 speakers");
  if (correct_per_speaker < 1 || error_per_speaker < 1 || control_per_speaker < 1) {
    throw Error(ErrorKind::Config, "every group needs at least one file per speaker");
  }
  for (double v : {delta, speaker_sd, utterance_sd, token_sd, sample_sd}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::Config, "clinical corpus scales must be finite and >= 0");
    }
  }
}

namespace {

constexpr std::size_t kFrames = 60;
constexpr double kPhoneStart = 0.20;
constexpr double kPhoneEnd = 0.40;

using Means = std::array<double, kOralChannelCount>;

constexpr Means kCorrectR{0.20, -0.10, 0.10, 0.30, -0.20, 0.25};
constexpr Means kCorrectS{0.30, 0.00, 0.40, 0.50, -0.10, 0.10};

const std::map<std::string, std::string>& words() {
  static const std::map<std::string, std::string> w{
      {"r", "red"},   {"s", "sun"},   {"w", "wake"}, {"ah", "cut"},
      {"th", "thumb"}, {"sh", "shoe"}, {"l", "leaf"}};
  return w;
}

// Subtype whose error label is `phone`.
std::string subtype_of(Target t, const std::string& phone) {
  for (std::string_view s : subtype_labels(t)) {
    if (s == kOmitted) continue;
    if (stats::error_phone(t, s) == phone) return std::string(s);
  }
  throw Error(ErrorKind::Lookup, "no subtype for " + phone);
}

struct Group {
  Target family;
  std::string phone;
  enum Kind { Correct, Control, Error, RareError } kind;
  Means shift{};  // control displacement from the correct means
};

std::vector<Group> groups(Target t, double delta) {
  std::vector<Group> out{{t, stats::correct_phone(t), Group::Correct, {}}};
  std::map<std::string, Means> control_shift;
  std::map<std::string, std::string> control_of_error;
  for (const auto& h : stats::hypothesis_table(t)) {
    if (h.kind != "control_vs_correct") continue;
    control_shift[h.phone][static_cast<std::size_t>(tv_channel_index(h.channel))] =
        h.expected_sign * delta;
  }
  for (const auto& h : stats::hypothesis_table(t)) {
    if (h.kind == "control_vs_error") control_of_error[h.reference] = h.phone;
  }
  for (const auto& c : stats::control_phones(t)) out.push_back({t, c, Group::Control, control_shift[c]});
  for (const auto& e : stats::error_phones(t)) {
    const auto it = control_of_error.find(e);
    if (it != control_of_error.end()) {
      out.push_back({t, e, Group::Error, control_shift[it->second]});
    }
  }
  // One rare error label per family, displaced along the first channel only.
  Means rare{};
  rare[0] = -delta;
  out.push_back({t, t == Target::R ? "r_l" : "s_affricate", Group::RareError, rare});
  return out;
}

}  // namespace

ClinicalCorpus synth_clinical_corpus(const ClinicalSpec& spec) {
  spec.validate();
  ClinicalCorpus corpus;
  Rng rng(mix_seed(spec.seed, 201));
  const std::array<std::string, 3> raters{"rater1", "rater2", "rater3"};

  std::size_t file_counter = 0;
  std::size_t rare_left[2] = {spec.rare_error_files, spec.rare_error_files};

  for (std::size_t s = 0; s < spec.speakers; ++s) {
    const std::string speaker = fmt::format("spk{:02}", s + 1);
    const double speaker_offset = rng.normal(0.0, spec.speaker_sd);
    std::size_t utt_counter = 0;

    const auto add_file = [&](Target family, const std::string& aligned_phone,
                              const std::string& label, const Means& mean) -> ClinicalFile& {
      ClinicalFile f;
      f.file_id = fmt::format("f{:04}", ++file_counter);
      f.speaker_id = speaker;
      f.utterance_id = fmt::format("u{:02}", ++utt_counter);
      f.word = words().at(aligned_phone);
      f.timepoint = (file_counter % 2 == 0) ? "post" : "pre";
      f.phone = label;
      f.tv = TractVariableMatrix(kFrames);
      const double utt_offset = rng.normal(0.0, spec.utterance_sd);
      const Means& base = family == Target::R ? kCorrectR : kCorrectS;
      for (std::size_t c = 0; c < kOralChannelCount; ++c) {
        const double token = mean[c] + speaker_offset + utt_offset + rng.normal(0.0, spec.token_sd);
        for (std::size_t j = 0; j < kFrames; ++j) {
          const double t = static_cast<double>(j) / kTvSampleRate;
          const bool inside = t >= kPhoneStart - 1e-9 && t < kPhoneEnd - 1e-9;
          const double level = inside ? token : base[c] + speaker_offset + 0.2 * std::sin(7.0 * t + c);
          f.tv.at(c, j) = level + rng.normal(0.0, spec.sample_sd);
        }
      }
      for (std::size_t c = kOralChannelCount; c < kTvChannelCount; ++c) {
        for (std::size_t j = 0; j < kFrames; ++j) {
          f.tv.at(c, j) = std::tanh(0.5 * std::sin(0.3 * static_cast<double>(j) + c) +
                                    rng.normal(0.0, 0.1));
        }
      }
      corpus.alignment.push_back({f.file_id, "sil", 0.0, kPhoneStart});
      corpus.alignment.push_back({f.file_id, aligned_phone, kPhoneStart, kPhoneEnd});
      corpus.alignment.push_back({f.file_id, "ax", kPhoneEnd, static_cast<double>(kFrames) / kTvSampleRate});
      corpus.files.push_back(std::move(f));
      return corpus.files.back();
    };

    const auto rate = [&](const std::string& file_id, const std::array<int, 3>& scores,
                          const std::array<std::optional<std::string>, 3>& subtypes) {
      for (std::size_t k = 0; k < 3; ++k) {
        RatingRecord r;
        r.rater_id = raters[k];
        r.file_id = file_id;
        r.score = scores[k];
        r.subtype = subtypes[k];
        r.replay_count = static_cast<int>(rng.index(kMaxReplays + 1));
        corpus.ratings.push_back(std::move(r));
      }
    };

    for (Target family : {Target::R, Target::S}) {
      const Means& correct = family == Target::R ? kCorrectR : kCorrectS;
      const std::string target_phone = stats::correct_phone(family);
      for (const Group& g : groups(family, spec.delta)) {
        std::size_t count = 0;
        switch (g.kind) {
          case Group::Correct: count = spec.correct_per_speaker; break;
          case Group::Control: count = spec.control_per_speaker; break;
          case Group::Error: count = spec.error_per_speaker; break;
          case Group::RareError: {
            std::size_t& left = rare_left[family == Target::R ? 0 : 1];
            count = left > 0 ? 1 : 0;
            left -= count;
            break;
          }
        }
        for (std::size_t i = 0; i < count; ++i) {
          if (g.kind == Group::Control) {
            Means m = correct;
            for (std::size_t c = 0; c < kOralChannelCount; ++c) m[c] += g.shift[c];
            add_file(family, g.phone, g.phone, m);
            continue;
          }
          if (g.kind == Group::Correct) {
            const std::string id = add_file(family, target_phone, g.phone, correct).file_id;
            if (s == 0 && i == 0) {
              // A superseded first opinion.
              RatingRecord early;
              early.rater_id = raters[0];
              early.file_id = id;
              early.score = 4;
              corpus.ratings.push_back(early);
            }
            rate(id, {5, 5, 5}, {});
            continue;
          }
          std::array<int, 3> scores{};
          for (int& v : scores) v = 1 + static_cast<int>(rng.index(3));
          const double mean = (scores[0] + scores[1] + scores[2]) / 3.0;
          const double f = (5.0 - mean) / 5.0;
          Means m = correct;
          for (std::size_t c = 0; c < kOralChannelCount; ++c) m[c] += f * g.shift[c];
          const std::string id = add_file(family, target_phone, g.phone, m).file_id;
          const std::string subtype = subtype_of(family, g.phone);
          rate(id, scores, {subtype, subtype, subtype});
        }
      }

      // Excluded files: flagged, omission, and no agreement on a subtype.
      const auto subs = subtype_labels(family);
      {
        const std::string id = add_file(family, target_phone, target_phone, correct).file_id;
        rate(id, {5, 4, 5}, {});
        corpus.ratings[corpus.ratings.size() - 2].flags.insert(RatingFlag::JunkAudio);
      }
      if (s % 3 == 0) {
        const std::string id = add_file(family, target_phone, target_phone, correct).file_id;
        rate(id, {1, 1, 2}, {std::string(kOmitted), std::string(subs[0]), std::string(subs[0])});
      }
      if (s % 2 == 0) {
        const std::string id = add_file(family, target_phone, target_phone, correct).file_id;
        rate(id, {2, 2, 3}, {std::string(subs[0]), std::string(subs[1]), std::string(subs[2])});
      }
    }
  }
  return corpus;
}

}  // namespace vtv
