#include "vtv/stats/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"

namespace vtv::stats {

namespace {

struct SubtypeLabel {
  std::string_view subtype;
  std::string_view phone;
};

constexpr std::array<SubtypeLabel, 4> kRLabels{{{"w-error", "r_w"},
                                                {"l-error", "r_l"},
                                                {"vowel-error", "r_vocalic"},
                                                {"other", "r_other"}}};
constexpr std::array<SubtypeLabel, 6> kSLabels{{{"dentalized", "s_dental"},
                                                {"lateralized", "s_lateral"},
                                                {"palatalized", "s_palatal"},
                                                {"affricate", "s_affricate"},
                                                {"stopped", "s_stopped"},
                                                {"other", "s_other"}}};

std::span<const SubtypeLabel> labels_for(Target t) {
  if (t == Target::R) return kRLabels;
  return kSLabels;
}

struct SignedChannel {
  std::string_view channel;
  int sign;
};

// Control phone, the error it bounds, and the predicted channel shifts.
struct Prediction {
  std::string_view control;
  std::string_view error;
  std::vector<SignedChannel> channels;
};

const std::vector<Prediction>& predictions(Target t) {
  static const std::vector<Prediction> r{
      {"w", "r_w", {{"LP", 1}, {"TTCD", -1}, {"TBCL", -1}}},
      {"ah", "r_vocalic", {{"LP", -1}, {"TTCD", -1}, {"TBCD", -1}}},
  };
  static const std::vector<Prediction> s{
      {"th", "s_dental", {{"TTCL", 1}, {"TBCD", -1}}},
      {"sh", "s_palatal", {{"TTCL", -1}}},
      {"l", "s_lateral", {{"TTCD", 1}, {"TBCD", -1}}},
  };
  return t == Target::R ? r : s;
}

const std::vector<std::string> kContrastHeader{"family", "hypothesis", "phone",  "delta_mu",
                                               "se",     "z",          "p",      "p_adj",
                                               "expected_sign",        "supported"};
const std::vector<std::string> kCoefficientHeader{"term", "beta", "se", "t", "p"};
const std::vector<std::string> kMsdHeader{"file_id", "speaker_id", "utterance_id", "target",
                                          "phone",   "articulator", "prs_score",   "msd"};

constexpr std::string_view kPhoneFactor = "phone";
constexpr std::string_view kTvFactor = "tv_identity";

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

bool is_fully_correct(const PhoneObservation& o) { return o.mean_score && *o.mean_score == 5.0; }

}  // namespace

std::string correct_phone(Target t) { return std::string(to_string(t)); }

std::vector<std::string> control_phones(Target t) {
  if (t == Target::R) return {"w", "ah"};
  return {"th", "sh", "l"};
}

std::vector<std::string> error_phones(Target t) {
  std::vector<std::string> out;
  for (const auto& l : labels_for(t)) out.emplace_back(l.phone);
  return out;
}

std::optional<std::string> error_phone(Target t, std::string_view subtype) {
  for (const auto& l : labels_for(t)) {
    if (l.subtype == subtype) return std::string(l.phone);
  }
  if (subtype == kOmitted) return std::nullopt;
  throw Error(ErrorKind::Lookup,
              fmt::format("'{}' is not a subtype of target {}", subtype, to_string(t)));
}

std::optional<Target> phone_family(std::string_view phone) {
  for (Target t : {Target::R, Target::S}) {
    if (phone == correct_phone(t)) return t;
    for (const auto& c : control_phones(t)) {
      if (phone == c) return t;
    }
    for (const auto& e : error_phones(t)) {
      if (phone == e) return t;
    }
  }
  return std::nullopt;
}

std::vector<Hypothesis> hypothesis_table(Target t) {
  std::vector<Hypothesis> out;
  const std::string correct = correct_phone(t);
  for (const auto& pred : predictions(t)) {
    const std::string control(pred.control), error(pred.error);
    const std::array<std::array<std::string, 3>, 3> kinds{{
        {"control_vs_correct", control, correct},
        {"error_vs_correct", error, correct},
        {"control_vs_error", control, error},
    }};
    for (const auto& [kind, phone, reference] : kinds) {
      for (const auto& ch : pred.channels) {
        out.push_back({t, kind, phone, reference, std::string(ch.channel), ch.sign});
      }
    }
  }
  return out;
}

CategoricalReport analyze_categorical(std::span<const PhoneObservation> obs, Target family,
                                      const CategoricalOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw Error(ErrorKind::Config, "alpha must lie in (0, 1)");
  }
  require_unique_observations({obs.begin(), obs.end()});
  const std::string correct = correct_phone(family);
  const std::vector<Hypothesis> hyps = hypothesis_table(family);

  CategoricalReport report;
  report.family = family;
  std::vector<const PhoneObservation*> rows;
  std::set<std::string> present;
  for (const auto& o : obs) {
    if (phone_family(o.phone) != family) continue;
    if (o.phone == correct && !is_fully_correct(o)) {
      ++report.dropped_correct;
      continue;
    }
    rows.push_back(&o);
    present.insert(o.phone);
  }

  // Levels: correct, controls, then error labels; hypothesis phones required.
  std::vector<std::string> required{correct};
  for (const auto& h : hyps) {
    for (const auto& p : {h.phone, h.reference}) {
      if (std::find(required.begin(), required.end(), p) == required.end()) required.push_back(p);
    }
  }
  std::vector<std::string> missing;
  for (const auto& p : required) {
    if (!present.contains(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::MissingGroup,
                fmt::format("target {} is missing phone groups: {}", to_string(family),
                            fmt::join(missing, ", ")));
  }
  std::vector<std::string> levels{correct};
  for (const auto& c : control_phones(family)) levels.push_back(c);
  for (const auto& e : error_phones(family)) {
    if (present.contains(e)) levels.push_back(e);
  }
  report.phone_levels = levels;

  LmmSpec spec;
  spec.response = "tv_value";
  spec.variables = {
      {std::string(kTvFactor), Variable::Kind::Factor,
       std::vector<std::string>(kOralChannelNames.begin(), kOralChannelNames.end())},
      {std::string(kPhoneFactor), Variable::Kind::Factor, levels},
  };
  spec.random = RandomEffects::Nested;
  LmmData data;
  auto& tv_col = data.factors[std::string(kTvFactor)];
  auto& phone_col = data.factors[std::string(kPhoneFactor)];
  for (const PhoneObservation* o : rows) {
    for (std::size_t c = 0; c < kOralChannelCount; ++c) {
      data.y.push_back(o->tv[c]);
      data.speaker.push_back(o->speaker_id);
      data.utterance.push_back(o->utterance_id);
      tv_col.emplace_back(kOralChannelNames[c]);
      phone_col.push_back(o->phone);
    }
  }
  report.n_observations = rows.size();

  const Design design(spec, data);
  report.fit = fit_lmm_reml(design, data, options.fit);
  report.emms = emmeans(report.fit, design, {std::string(kPhoneFactor), std::string(kTvFactor)});

  std::vector<std::pair<Cell, Cell>> pairs;
  for (const auto& h : hyps) {
    pairs.push_back({{{std::string(kPhoneFactor), h.phone}, {std::string(kTvFactor), h.channel}},
                     {{std::string(kPhoneFactor), h.reference}, {std::string(kTvFactor), h.channel}}});
  }
  const auto contrasts = contrast_reverse_pairwise(report.fit, report.emms, pairs);
  std::vector<double> p;
  for (const auto& c : contrasts) p.push_back(c.p);
  const std::vector<double> p_adj = bh_adjust(p);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    ContrastRow row;
    row.family = family;
    row.hypothesis = hyps[i].name();
    row.phone = hyps[i].phone + " - " + hyps[i].reference;
    row.delta_mu = contrasts[i].delta_mu;
    row.se = contrasts[i].se;
    row.z = contrasts[i].z;
    row.p = contrasts[i].p;
    row.p_adj = p_adj[i];
    row.expected_sign = hyps[i].expected_sign;
    row.supported = row.p_adj < options.alpha && sign_of(row.delta_mu) == row.expected_sign;
    report.contrasts.push_back(std::move(row));
  }
  return report;
}

std::string write_contrasts(std::span<const ContrastRow> rows) {
  io::CsvTable t;
  t.header = kContrastHeader;
  for (const auto& r : rows) {
    t.rows.push_back({std::string(to_string(r.family)), r.hypothesis, r.phone,
                      io::format_double(r.delta_mu), io::format_double(r.se),
                      io::format_double(r.z), io::format_double(r.p), io::format_double(r.p_adj),
                      r.expected_sign > 0 ? "+" : "-", r.supported ? "yes" : "no"});
  }
  return io::write_csv(t);
}

std::vector<ContrastRow> parse_contrasts(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kContrastHeader, "contrast CSV");
  std::vector<ContrastRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string ctx = fmt::format("contrast row {}", i + 1);
    ContrastRow r;
    r.family = parse_target(row[0]);
    r.hypothesis = row[1];
    r.phone = row[2];
    r.delta_mu = io::parse_double(row[3], ctx);
    r.se = io::parse_double(row[4], ctx);
    r.z = io::parse_double(row[5], ctx);
    r.p = io::parse_double(row[6], ctx);
    r.p_adj = io::parse_double(row[7], ctx);
    if (row[8] != "+" && row[8] != "-") throw Error(ErrorKind::Parse, ctx + ": bad expected_sign");
    r.expected_sign = row[8] == "+" ? 1 : -1;
    if (row[9] != "yes" && row[9] != "no") throw Error(ErrorKind::Parse, ctx + ": bad supported");
    r.supported = row[9] == "yes";
    out.push_back(std::move(r));
  }
  return out;
}

GradientReport analyze_gradient(std::span<const PhoneObservation> obs, const FitOptions& options) {
  require_unique_observations({obs.begin(), obs.end()});
  GradientReport report;
  std::vector<std::string> missing;
  for (Target t : {Target::R, Target::S}) {
    const std::string correct = correct_phone(t);
    const std::vector<std::string> controls = control_phones(t);
    const std::vector<std::string> errors = error_phones(t);
    std::vector<PhoneObservation> correct_rows;
    std::vector<const PhoneObservation*> error_rows;
    for (const auto& o : obs) {
      if (o.phone == correct) {
        ++report.excluded_correct;
        if (is_fully_correct(o)) correct_rows.push_back(o);
      } else if (std::find(controls.begin(), controls.end(), o.phone) != controls.end()) {
        ++report.excluded_control;
      } else if (std::find(errors.begin(), errors.end(), o.phone) != errors.end() &&
                 o.mean_score && *o.mean_score < 5.0) {
        error_rows.push_back(&o);
      }
    }
    if (error_rows.empty()) {
      missing.push_back(fmt::format("{} errors", to_string(t)));
      continue;
    }
    if (correct_rows.empty()) {
      missing.push_back(fmt::format("{} fully correct", to_string(t)));
      continue;
    }
    const OralMeans means = oral_means(correct_rows);
    for (const PhoneObservation* o : error_rows) {
      for (const auto& m : articulatory_msd(*o, means)) {
        report.rows.push_back({o->file_id, o->speaker_id, o->utterance_id, t, o->phone,
                               m.articulator, *o->mean_score, m.msd});
      }
    }
  }
  if (report.rows.empty()) {
    throw Error(ErrorKind::EmptyAnalysis, "no errored rows with mean scores remain");
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::MissingGroup,
                fmt::format("gradient model is missing groups: {}", fmt::join(missing, ", ")));
  }

  LmmSpec spec;
  spec.response = "tv_msd";
  std::vector<std::string> arts;
  for (Articulator a : kArticulators) arts.emplace_back(to_string(a));
  spec.variables = {
      {"articulator", Variable::Kind::Factor, arts},
      {std::string(kScoreVariable), Variable::Kind::Numeric, {}},
      {"target", Variable::Kind::Factor, {"r", "s"}},
  };
  spec.random = RandomEffects::Nested;
  LmmData data;
  auto& art_col = data.factors["articulator"];
  auto& target_col = data.factors["target"];
  auto& score_col = data.numerics[std::string(kScoreVariable)];
  for (const auto& r : report.rows) {
    data.y.push_back(r.msd);
    data.speaker.push_back(r.speaker_id);
    data.utterance.push_back(r.utterance_id);
    art_col.emplace_back(to_string(r.articulator));
    target_col.emplace_back(to_string(r.target));
    score_col.push_back(r.prs_score);
  }
  const Design design(spec, data);
  report.fit = fit_lmm_reml(design, data, options);
  for (std::size_t j = 0; j < report.fit.columns.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    Coefficient c;
    c.term = report.fit.columns[j];
    c.beta = report.fit.beta(k);
    c.se = std::sqrt(std::max(0.0, report.fit.cov_beta(k, k)));
    c.t = c.se > 0.0 ? c.beta / c.se : 0.0;
    c.p = normal_two_sided_p(c.t);
    report.coefficients.push_back(std::move(c));
  }
  return report;
}

std::string write_coefficients(std::span<const Coefficient> rows) {
  io::CsvTable t;
  t.header = kCoefficientHeader;
  for (const auto& c : rows) {
    t.rows.push_back({c.term, io::format_double(c.beta), io::format_double(c.se),
                      io::format_double(c.t), io::format_double(c.p)});
  }
  return io::write_csv(t);
}

std::vector<Coefficient> parse_coefficients(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kCoefficientHeader, "coefficient CSV");
  std::vector<Coefficient> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string ctx = fmt::format("coefficient row {}", i + 1);
    out.push_back({row[0], io::parse_double(row[1], ctx), io::parse_double(row[2], ctx),
                   io::parse_double(row[3], ctx), io::parse_double(row[4], ctx)});
  }
  return out;
}

std::string write_msd_rows(std::span<const MsdRow> rows) {
  io::CsvTable t;
  t.header = kMsdHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.file_id, r.speaker_id, r.utterance_id, std::string(to_string(r.target)),
                      r.phone, std::string(to_string(r.articulator)),
                      io::format_double(r.prs_score), io::format_double(r.msd)});
  }
  return io::write_csv(t);
}

std::vector<MsdRow> parse_msd_rows(std::string_view text) {
  const io::CsvTable t = io::parse_csv(text);
  io::require_header(t, kMsdHeader, "MSD CSV");
  std::vector<MsdRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string ctx = fmt::format("MSD row {}", i + 1);
    out.push_back({row[0], row[1], row[2], parse_target(row[3]), row[4],
                   parse_articulator(row[5]), io::parse_double(row[6], ctx),
                   io::parse_double(row[7], ctx)});
  }
  return out;
}

std::vector<PhoneEllipse> phone_ellipses(std::span<const PhoneObservation> obs) {
  std::map<std::string, std::vector<const PhoneObservation*>> by_phone;
  for (const auto& o : obs) by_phone[o.phone].push_back(&o);
  std::vector<PhoneEllipse> out;
  for (const auto& [phone, group] : by_phone) {
    for (Articulator a : kArticulators) {
      const ChannelPair ch = articulator_channels(a);
      std::vector<Point2> pts;
      for (const PhoneObservation* o : group) pts.push_back({o->tv[ch.location], o->tv[ch.degree]});
      try {
        out.push_back({phone, a, confidence_ellipse(pts)});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateSample) throw;
      }
    }
  }
  return out;
}

std::string write_ellipses_json(std::span<const PhoneEllipse> ellipses) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : ellipses) {
    nlohmann::ordered_json j;
    j["phone"] = e.phone;
    j["articulator"] = to_string(e.articulator);
    j["center"] = {e.ellipse.center.x, e.ellipse.center.y};
    j["axes"] = {e.ellipse.major, e.ellipse.minor};
    j["angle"] = e.ellipse.angle;
    j["n"] = e.ellipse.n;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace vtv::stats
