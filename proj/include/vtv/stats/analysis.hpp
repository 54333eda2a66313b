#pragma once

// The two categorical models (tract variable identity x phone, one per target
// phoneme) with their signed hypothesis contrasts, and the gradient model
// (articulator x rating score x target) on squared articulatory distances.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/ratings.hpp"
#include "vtv/segments.hpp"
#include "vtv/stats/articulatory.hpp"
#include "vtv/stats/emm.hpp"
#include "vtv/stats/lmm.hpp"

namespace vtv::stats {

// Phone labels of a target family.
std::string correct_phone(Target t);
std::vector<std::string> control_phones(Target t);
// Error labels for every non-omission subtype, in subtype display order.
std::vector<std::string> error_phones(Target t);
// Phone label for an agreed error subtype; nullopt for "omitted".
std::optional<std::string> error_phone(Target t, std::string_view subtype);
// Family of a phone label, if it belongs to one.
std::optional<Target> phone_family(std::string_view phone);

struct Hypothesis {
  Target family = Target::R;
  std::string kind;       // control_vs_correct | error_vs_correct | control_vs_error
  std::string phone;      // minuend
  std::string reference;  // subtrahend
  std::string channel;
  int expected_sign = 1;

  std::string name() const { return kind + ":" + channel; }
};

// Each (control, error, channel, sign) prediction expands into the three
// comparisons; the control is expected beyond the error in the same direction.
std::vector<Hypothesis> hypothesis_table(Target t);

struct ContrastRow {
  Target family = Target::R;
  std::string hypothesis;
  std::string phone;  // "phone - reference"
  double delta_mu = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  double p_adj = 1.0;
  int expected_sign = 1;
  bool supported = false;

  friend bool operator==(const ContrastRow&, const ContrastRow&) = default;
};

struct CategoricalOptions {
  double alpha = 0.05;
  FitOptions fit;
};

struct CategoricalReport {
  Target family = Target::R;
  LmmFit fit;
  std::vector<Emm> emms;
  std::vector<std::string> phone_levels;
  std::vector<ContrastRow> contrasts;
  std::size_t dropped_correct = 0;  // correct rows whose mean score is not 5
  std::size_t n_observations = 0;
};

// Long format (six rows per observation), nested random intercepts, EMMs over
// phone x tv_identity, BH over the family. Throws Error(MissingGroup) naming
// absent hypothesis phones.
CategoricalReport analyze_categorical(std::span<const PhoneObservation> obs, Target family,
                                      const CategoricalOptions& options = {});

// `family,hypothesis,phone,delta_mu,se,z,p,p_adj,expected_sign,supported`.
std::string write_contrasts(std::span<const ContrastRow> rows);
std::vector<ContrastRow> parse_contrasts(std::string_view text);

struct MsdRow {
  std::string file_id;
  std::string speaker_id;
  std::string utterance_id;
  Target target = Target::R;
  std::string phone;
  Articulator articulator = Articulator::Lips;
  double prs_score = 0.0;
  double msd = 0.0;

  friend bool operator==(const MsdRow&, const MsdRow&) = default;
};

struct Coefficient {
  std::string term;
  double beta = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;

  friend bool operator==(const Coefficient&, const Coefficient&) = default;
};

struct GradientReport {
  LmmFit fit;
  std::vector<MsdRow> rows;
  std::vector<Coefficient> coefficients;
  std::size_t excluded_correct = 0;
  std::size_t excluded_control = 0;
};

inline constexpr std::string_view kScoreVariable = "prs_score";

// Rows of each target's error phones with a mean score below 5, three MSD
// rows each against that target's fully correct means; fixed effects
// articulator * prs_score * target with nested random intercepts. Throws
// Error(MissingGroup) when a target has no correct or no error rows and
// Error(EmptyAnalysis) when nothing remains.
GradientReport analyze_gradient(std::span<const PhoneObservation> obs,
                                const FitOptions& options = {});

// `term,beta,se,t,p`.
std::string write_coefficients(std::span<const Coefficient> rows);
std::vector<Coefficient> parse_coefficients(std::string_view text);

// `file_id,speaker_id,utterance_id,target,phone,articulator,prs_score,msd`.
std::string write_msd_rows(std::span<const MsdRow> rows);
std::vector<MsdRow> parse_msd_rows(std::string_view text);

struct PhoneEllipse {
  std::string phone;
  Articulator articulator = Articulator::Lips;
  ConfidenceEllipse ellipse;
};

// One ellipse per (phone, articulator) over (location, degree) points, phones
// sorted; groups too small or degenerate are skipped.
std::vector<PhoneEllipse> phone_ellipses(std::span<const PhoneObservation> obs);
std::string write_ellipses_json(std::span<const PhoneEllipse> ellipses);

}  // namespace vtv::stats
