#include "vtv/stats/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "vtv/error.hpp"

namespace vtv::stats {

namespace {

// Terms of the full interaction, lme4 order: by size, then by variable order.
std::vector<std::vector<std::size_t>> interaction_terms(std::size_t k) {
  std::vector<std::vector<std::size_t>> terms;
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) t.push_back(i);
    }
    terms.push_back(std::move(t));
  }
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return terms;
}

// One design column: for each variable in the term, a level index (factors)
// or npos (numerics).
struct ColumnDef {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> level;
  bool has_factor = false;
};

constexpr std::size_t kNumeric = std::numeric_limits<std::size_t>::max();

std::vector<ColumnDef> column_defs(const LmmSpec& spec, std::vector<std::string>& names) {
  std::vector<ColumnDef> defs{ColumnDef{}};
  names = {"(Intercept)"};
  for (const auto& term : interaction_terms(spec.variables.size())) {
    // Level choices per variable; the first variable varies fastest.
    std::vector<std::vector<std::size_t>> choices;
    for (std::size_t v : term) {
      const Variable& var = spec.variables[v];
      if (var.kind == Variable::Kind::Numeric) {
        choices.push_back({kNumeric});
      } else {
        std::vector<std::size_t> lv;
        for (std::size_t l = 1; l < var.levels.size(); ++l) lv.push_back(l);
        choices.push_back(std::move(lv));
      }
    }
    if (std::any_of(choices.begin(), choices.end(), [](const auto& c) { return c.empty(); })) {
      continue;
    }
    std::vector<std::size_t> idx(term.size(), 0);
    while (true) {
      ColumnDef def;
      def.vars = term;
      std::string name;
      for (std::size_t k = 0; k < term.size(); ++k) {
        const Variable& var = spec.variables[term[k]];
        const std::size_t lv = choices[k][idx[k]];
        def.level.push_back(lv);
        if (k > 0) name += ':';
        name += var.name;
        if (lv != kNumeric) {
          name += var.levels[lv];
          def.has_factor = true;
        }
      }
      defs.push_back(std::move(def));
      names.push_back(std::move(name));
      std::size_t k = 0;
      while (k < term.size() && ++idx[k] == choices[k].size()) idx[k++] = 0;
      if (k == term.size()) break;
    }
  }
  return defs;
}

double column_value(const ColumnDef& def, const std::vector<std::size_t>& factor_level,
                    const std::vector<double>& numeric) {
  double v = 1.0;
  for (std::size_t k = 0; k < def.vars.size(); ++k) {
    const std::size_t var = def.vars[k];
    if (def.level[k] == kNumeric) {
      v *= numeric[var];
    } else if (factor_level[var] != def.level[k]) {
      return 0.0;
    }
  }
  return v;
}

}  // namespace

Design::Design(const LmmSpec& spec, const LmmData& data) : spec_(spec) {
  const std::size_t n = data.rows();
  if (n == 0) throw Error(ErrorKind::EmptyInput, "model data has no rows");
  for (double y : data.y) {
    if (!std::isfinite(y)) throw Error(ErrorKind::Validation, "response has non-finite values");
  }
  const std::size_t k = spec.variables.size();
  if (k > 16) throw Error(ErrorKind::Config, "too many model variables");

  // Per-row level indices / numeric values, indexed by variable.
  std::vector<std::vector<std::size_t>> levels(n, std::vector<std::size_t>(k, 0));
  std::vector<std::vector<double>> nums(n, std::vector<double>(k, 0.0));
  for (std::size_t v = 0; v < k; ++v) {
    const Variable& var = spec.variables[v];
    if (var.kind == Variable::Kind::Factor) {
      const auto it = data.factors.find(var.name);
      if (it == data.factors.end() || it->second.size() != n) {
        throw Error(ErrorKind::MissingData, "factor column '" + var.name + "' missing or short");
      }
      if (var.levels.empty()) throw Error(ErrorKind::Config, "factor '" + var.name + "' has no levels");
      std::map<std::string, std::size_t> index;
      for (std::size_t l = 0; l < var.levels.size(); ++l) index[var.levels[l]] = l;
      for (std::size_t r = 0; r < n; ++r) {
        const auto li = index.find(it->second[r]);
        if (li == index.end()) {
          throw Error(ErrorKind::Lookup, fmt::format("factor '{}' has undeclared level '{}'",
                                                     var.name, it->second[r]));
        }
        levels[r][v] = li->second;
      }
    } else {
      const auto it = data.numerics.find(var.name);
      if (it == data.numerics.end() || it->second.size() != n) {
        throw Error(ErrorKind::MissingData, "numeric column '" + var.name + "' missing or short");
      }
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(it->second[r])) {
          throw Error(ErrorKind::Validation, "numeric column '" + var.name + "' is not finite");
        }
        nums[r][v] = it->second[r];
        sum += it->second[r];
      }
      numeric_means_[var.name] = sum / static_cast<double>(n);
    }
  }

  const std::vector<ColumnDef> defs = column_defs(spec, full_names_);
  Eigen::MatrixXd full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(defs.size()));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < defs.size(); ++c) {
      full(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          column_value(defs[c], levels[r], nums[r]);
    }
  }

  for (std::size_t c = 0; c < defs.size(); ++c) {
    const bool empty_cell = defs[c].has_factor && full.col(static_cast<Eigen::Index>(c)).isZero(0.0);
    if (empty_cell) {
      dropped_names_.push_back(full_names_[c]);
    } else {
      kept_.push_back(c);
      kept_names_.push_back(full_names_[c]);
    }
  }
  x_.resize(full.rows(), static_cast<Eigen::Index>(kept_.size()));
  for (std::size_t j = 0; j < kept_.size(); ++j) {
    x_.col(static_cast<Eigen::Index>(j)) = full.col(static_cast<Eigen::Index>(kept_[j]));
  }

  // Aliasing check on the column-scaled design.
  Eigen::MatrixXd scaled = x_;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0.0) scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < scaled.cols()) {
    std::vector<std::string> aliased;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < scaled.cols(); ++j) {
      aliased.push_back(kept_names_[static_cast<std::size_t>(perm(j))]);
    }
    throw Error(ErrorKind::Rank, fmt::format("design is rank deficient; aliased columns: {}",
                                             fmt::join(aliased, ", ")));
  }
}

Eigen::VectorXd Design::full_row(const std::map<std::string, std::string>& lv,
                                 const std::map<std::string, double>& numerics) const {
  const std::size_t k = spec_.variables.size();
  std::vector<std::size_t> levels(k, 0);
  std::vector<double> nums(k, 0.0);
  for (std::size_t v = 0; v < k; ++v) {
    const Variable& var = spec_.variables[v];
    if (var.kind == Variable::Kind::Factor) {
      const auto it = lv.find(var.name);
      if (it == lv.end()) throw Error(ErrorKind::Lookup, "no level given for factor '" + var.name + "'");
      const auto pos = std::find(var.levels.begin(), var.levels.end(), it->second);
      if (pos == var.levels.end()) {
        throw Error(ErrorKind::Lookup,
                    fmt::format("factor '{}' has no level '{}'", var.name, it->second));
      }
      levels[v] = static_cast<std::size_t>(pos - var.levels.begin());
    } else {
      const auto it = numerics.find(var.name);
      nums[v] = it != numerics.end() ? it->second : numeric_means_.at(var.name);
    }
  }
  std::vector<std::string> names;
  const std::vector<ColumnDef> defs = column_defs(spec_, names);
  Eigen::VectorXd out(static_cast<Eigen::Index>(defs.size()));
  for (std::size_t c = 0; c < defs.size(); ++c) {
    out(static_cast<Eigen::Index>(c)) = column_value(defs[c], levels, nums);
  }
  return out;
}

Eigen::VectorXd Design::row(const std::map<std::string, std::string>& lv,
                            const std::map<std::string, double>& numerics) const {
  const Eigen::VectorXd full = full_row(lv, numerics);
  std::set<std::size_t> kept(kept_.begin(), kept_.end());
  for (Eigen::Index c = 0; c < full.size(); ++c) {
    if (full(c) != 0.0 && !kept.contains(static_cast<std::size_t>(c))) {
      throw Error(ErrorKind::Estimability,
                  fmt::format("cell loads on empty interaction column '{}'",
                              full_names_[static_cast<std::size_t>(c)]));
    }
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(kept_.size()));
  for (std::size_t j = 0; j < kept_.size(); ++j) {
    out(static_cast<Eigen::Index>(j)) = full(static_cast<Eigen::Index>(kept_[j]));
  }
  return out;
}

std::size_t LmmFit::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorKind::Lookup, "no model column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

namespace {

// Sufficient statistics for the profiled restricted likelihood.
class ProfiledReml {
 public:
  ProfiledReml(const Design& design, const LmmData& data) {
    const Eigen::MatrixXd& x = design.matrix();
    n_ = x.rows();
    p_ = x.cols();
    if (n_ <= p_) {
      throw Error(ErrorKind::Rank, fmt::format("{} rows cannot support {} fixed effects", n_, p_));
    }
    if (data.speaker.size() != static_cast<std::size_t>(n_) ||
        data.utterance.size() != static_cast<std::size_t>(n_)) {
      throw Error(ErrorKind::MissingData, "speaker and utterance ids are required on every row");
    }
    const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n_);
    xtx_ = x.transpose() * x;
    xty_ = x.transpose() * y;
    yty_ = y.squaredNorm();

    std::map<std::string, std::size_t> speaker_index;
    std::map<std::pair<std::string, std::string>, std::size_t> utt_index;
    std::vector<std::size_t> utt_speaker;
    std::vector<Eigen::VectorXd> g;
    std::vector<double> ty;
    std::vector<std::size_t> m;
    for (Eigen::Index r = 0; r < n_; ++r) {
      const auto& sp = data.speaker[static_cast<std::size_t>(r)];
      const auto s_it = speaker_index.emplace(sp, speaker_index.size()).first;
      const auto key = std::make_pair(sp, data.utterance[static_cast<std::size_t>(r)]);
      const auto [u_it, fresh] = utt_index.emplace(key, utt_index.size());
      if (fresh) {
        utt_speaker.push_back(s_it->second);
        g.push_back(Eigen::VectorXd::Zero(p_));
        ty.push_back(0.0);
        m.push_back(0);
      }
      g[u_it->second] += x.row(r).transpose();
      ty[u_it->second] += y(r);
      ++m[u_it->second];
    }
    n_speakers_ = speaker_index.size();
    n_utterances_ = utt_index.size();
    max_cluster_ = *std::max_element(m.begin(), m.end());

    speakers_.resize(n_speakers_);
    for (std::size_t j = 0; j < g.size(); ++j) {
      SizeGroup& sg = size_group(m[j]);
      sg.s += g[j] * g[j].transpose();
      sg.t += g[j] * ty[j];
      sg.u += ty[j] * ty[j];
      ++sg.count;
      auto& spk = speakers_[utt_speaker[j]];
      auto it = std::find_if(spk.begin(), spk.end(),
                             [&](const SpeakerPart& part) { return part.m == m[j]; });
      if (it == spk.end()) {
        spk.push_back({m[j], Eigen::VectorXd::Zero(p_), 0.0, 0});
        it = std::prev(spk.end());
      }
      it->a += g[j];
      it->b += ty[j];
      ++it->count;
    }
  }

  struct Solution {
    double criterion = std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtvx_inv;  // (X' H^-1 X)^-1
    double sigma2 = 0.0;
  };

  Solution solve(double ts, double tu, bool want_inverse) const {
    Solution sol;
    Eigen::MatrixXd mtx = xtx_;
    Eigen::VectorXd v = xty_;
    double q = yty_;
    double logdet = 0.0;
    for (const auto& sg : sizes_) {
      const double md = static_cast<double>(sg.m);
      const double c = tu / (1.0 + md * tu);
      mtx.noalias() -= c * sg.s;
      v -= c * sg.t;
      q -= c * sg.u;
      logdet += static_cast<double>(sg.count) * std::log1p(md * tu);
    }
    if (ts > 0.0) {
      Eigen::VectorXd a(p_);
      for (const auto& spk : speakers_) {
        a.setZero();
        double b = 0.0, s = 0.0;
        for (const auto& part : spk) {
          const double md = static_cast<double>(part.m);
          const double f = 1.0 / (1.0 + md * tu);
          a += f * part.a;
          b += f * part.b;
          s += static_cast<double>(part.count) * md * f;
        }
        const double w = ts / (1.0 + ts * s);
        mtx.noalias() -= w * a * a.transpose();
        v -= w * b * a;
        q -= w * b * b;
        logdet += std::log1p(ts * s);
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(mtx);
    if (llt.info() != Eigen::Success) return sol;
    sol.beta = llt.solve(v);
    const double rss = q - v.dot(sol.beta);
    const double dof = static_cast<double>(n_ - p_);
    sol.sigma2 = rss / dof;
    if (!(sol.sigma2 > 0.0)) return sol;
    double logdet_m = 0.0;
    for (Eigen::Index i = 0; i < p_; ++i) logdet_m += 2.0 * std::log(llt.matrixL()(i, i));
    sol.criterion = logdet + logdet_m + dof * (1.0 + std::log(2.0 * std::numbers::pi * sol.sigma2));
    if (want_inverse) sol.xtvx_inv = llt.solve(Eigen::MatrixXd::Identity(p_, p_));
    return sol;
  }

  double criterion(double ts, double tu) const { return solve(ts, tu, false).criterion; }

  std::size_t n_speakers() const { return n_speakers_; }
  std::size_t n_utterances() const { return n_utterances_; }
  std::size_t max_cluster() const { return max_cluster_; }
  Eigen::Index rows() const { return n_; }

 private:
  struct SizeGroup {
    std::size_t m = 0;
    Eigen::MatrixXd s;
    Eigen::VectorXd t;
    double u = 0.0;
    std::size_t count = 0;
  };
  struct SpeakerPart {
    std::size_t m = 0;
    Eigen::VectorXd a;
    double b = 0.0;
    std::size_t count = 0;
  };

  SizeGroup& size_group(std::size_t m) {
    for (auto& sg : sizes_) {
      if (sg.m == m) return sg;
    }
    sizes_.push_back({m, Eigen::MatrixXd::Zero(p_, p_), Eigen::VectorXd::Zero(p_), 0.0, 0});
    return sizes_.back();
  }

  Eigen::Index n_ = 0, p_ = 0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  double yty_ = 0.0;
  std::vector<SizeGroup> sizes_;
  std::vector<std::vector<SpeakerPart>> speakers_;
  std::size_t n_speakers_ = 0, n_utterances_ = 0, max_cluster_ = 0;
};

constexpr double kLogThetaLo = -30.0;
constexpr double kLogThetaHi = 12.0;
constexpr int kBrentBits = 26;
// Iterations without a criterion improvement above the tolerance that end
// the simplex search; flat directions toward a zero variance never shrink it.
constexpr int kStallIterations = 50;

struct Point {
  double ts = 0.0;
  double tu = 0.0;
  double f = std::numeric_limits<double>::infinity();
};

// Minimizes over one log ratio with the other held; also tries the boundary.
Point line_search(const ProfiledReml& model, const Point& start, bool speaker_axis, double lo,
                  double hi, int& evals) {
  const auto at = [&](double theta) {
    ++evals;
    return speaker_axis ? model.criterion(theta, start.tu) : model.criterion(start.ts, theta);
  };
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::brent_find_minima(
      [&](double lt) { return at(std::exp(lt)); }, lo, hi, kBrentBits, iters);
  Point best = start;
  best.f = at(speaker_axis ? start.ts : start.tu);
  const double theta = std::exp(r.first);
  if (r.second < best.f) {
    best.f = r.second;
    (speaker_axis ? best.ts : best.tu) = theta;
  }
  const double f0 = at(0.0);
  if (f0 <= best.f) {
    best.f = f0;
    (speaker_axis ? best.ts : best.tu) = 0.0;
  }
  return best;
}

struct SimplexContext {
  const ProfiledReml* model;
  int* evals;
};

double simplex_objective(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<SimplexContext*>(params);
  ++*ctx->evals;
  const double ls = std::clamp(gsl_vector_get(v, 0), kLogThetaLo, kLogThetaHi);
  const double lu = std::clamp(gsl_vector_get(v, 1), kLogThetaLo, kLogThetaHi);
  const double f = ctx->model->criterion(std::exp(ls), std::exp(lu));
  return std::isfinite(f) ? f : std::numeric_limits<double>::max();
}

Point simplex(const ProfiledReml& model, const Point& start, const FitOptions& opt, int& evals) {
  SimplexContext ctx{&model, &evals};
  gsl_multimin_function fn{&simplex_objective, 2, &ctx};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, std::log(std::max(start.ts, 1e-6)));
  gsl_vector_set(x, 1, std::log(std::max(start.tu, 1e-6)));
  gsl_vector_set_all(step, 1.0);
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);

  std::vector<double> trace;
  double prev = std::numeric_limits<double>::infinity();
  int stalled = 0;
  bool converged = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    const double f = gsl_multimin_fminimizer_minimum(s);
    trace.push_back(f);
    stalled = prev - f < opt.tolerance ? stalled + 1 : 0;
    prev = f;
    const double size = gsl_multimin_fminimizer_size(s);
    if (size < 1e-6 || stalled >= kStallIterations) {
      converged = true;
      break;
    }
  }
  Point out;
  out.ts = std::exp(std::clamp(gsl_vector_get(s->x, 0), kLogThetaLo, kLogThetaHi));
  out.tu = std::exp(std::clamp(gsl_vector_get(s->x, 1), kLogThetaLo, kLogThetaHi));
  out.f = gsl_multimin_fminimizer_minimum(s);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  if (!converged) {
    const std::size_t keep = std::min<std::size_t>(trace.size(), 5);
    throw Error(ErrorKind::Convergence,
                fmt::format("REML optimizer did not converge in {} iterations; last criteria: {}",
                            opt.max_iterations,
                            fmt::join(trace.end() - static_cast<std::ptrdiff_t>(keep), trace.end(), ", ")));
  }
  return out;
}

}  // namespace

double reml_criterion_at(const Design& design, const LmmData& data, double theta_speaker,
                         double theta_utterance) {
  return ProfiledReml(design, data).criterion(theta_speaker, theta_utterance);
}

LmmFit fit_lmm_reml(const Design& design, const LmmData& data, const FitOptions& options) {
  const ProfiledReml model(design, data);
  const RandomEffects re = design.spec().random;
  std::optional<double> fix_s = options.fixed_theta_speaker;
  std::optional<double> fix_u = options.fixed_theta_utterance;
  if (re == RandomEffects::None) fix_s = fix_u = 0.0;
  if (re == RandomEffects::SpeakerOnly) fix_u = 0.0;
  if (!fix_s && model.n_speakers() < 2) {
    throw Error(ErrorKind::Validation, "at least two speakers are required");
  }
  if (!fix_u && model.max_cluster() < 2) {
    throw Error(ErrorKind::Validation,
                "utterance variance is not identifiable: every utterance has a single row");
  }
  for (const auto& f : {fix_s, fix_u}) {
    if (f && !(*f >= 0.0)) throw Error(ErrorKind::Config, "fixed variance ratios must be >= 0");
  }

  int evals = 0;
  Point best;
  if (fix_s && fix_u) {
    best = {*fix_s, *fix_u, model.criterion(*fix_s, *fix_u)};
    ++evals;
  } else if (fix_s || fix_u) {
    const bool speaker_axis = !fix_s;
    Point start{fix_s.value_or(0.0), fix_u.value_or(0.0), 0.0};
    best = line_search(model, start, speaker_axis, kLogThetaLo, kLogThetaHi, evals);
  } else {
    const Point s_only = line_search(model, {0.0, 0.0, 0.0}, true, kLogThetaLo, kLogThetaHi, evals);
    const Point u_only = line_search(model, {0.0, 0.0, 0.0}, false, kLogThetaLo, kLogThetaHi, evals);
    Point start{std::max(s_only.ts, 1e-3), std::max(u_only.tu, 1e-3), 0.0};
    best = simplex(model, start, options, evals);
    // Coordinate polish, boundary candidates included.
    for (int round = 0; round < 3; ++round) {
      for (bool axis : {true, false}) {
        const double cur = axis ? best.ts : best.tu;
        const double c = cur > 0.0 ? std::log(cur) : kLogThetaLo;
        const Point p = line_search(model, best, axis, std::max(kLogThetaLo, c - 4.0),
                                    std::min(kLogThetaHi, c + 4.0), evals);
        if (p.f <= best.f) best = p;
      }
    }
    for (const Point& cand : {Point{0.0, u_only.tu, u_only.f}, Point{s_only.ts, 0.0, s_only.f}}) {
      const Point refined = line_search(model, cand, cand.ts == 0.0 ? false : true,
                                        kLogThetaLo, kLogThetaHi, evals);
      if (refined.f < best.f) best = refined;
    }
  }
  if (!std::isfinite(best.f)) {
    throw Error(ErrorKind::Convergence, "REML criterion is not finite at the optimum");
  }

  const auto sol = model.solve(best.ts, best.tu, true);
  LmmFit fit;
  fit.columns = design.columns();
  fit.dropped_columns = design.dropped();
  fit.beta = sol.beta;
  fit.cov_beta = sol.sigma2 * sol.xtvx_inv;
  fit.cov_beta = 0.5 * (fit.cov_beta + fit.cov_beta.transpose()).eval();
  fit.sigma2_resid = sol.sigma2;
  fit.theta_speaker = best.ts;
  fit.theta_utterance = best.tu;
  fit.sigma2_speaker = best.ts * sol.sigma2;
  fit.sigma2_utterance = best.tu * sol.sigma2;
  fit.reml_criterion = sol.criterion;
  fit.reml_loglik = -0.5 * sol.criterion;
  fit.boundary = (!fix_s && best.ts == 0.0) || (!fix_u && best.tu == 0.0);
  fit.evaluations = evals;
  fit.n_obs = static_cast<std::size_t>(model.rows());
  fit.n_speakers = model.n_speakers();
  fit.n_utterances = model.n_utterances();
  return fit;
}

LmmFit fit_ols(const Design& design, const LmmData& data) {
  const Eigen::MatrixXd& x = design.matrix();
  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), static_cast<Eigen::Index>(data.y.size()));
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n <= p) throw Error(ErrorKind::Rank, "not enough rows for the fixed effects");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  LmmFit fit;
  fit.columns = design.columns();
  fit.dropped_columns = design.dropped();
  fit.beta = qr.solve(y);
  const double rss = (y - x * fit.beta).squaredNorm();
  fit.sigma2_resid = rss / static_cast<double>(n - p);
  fit.cov_beta = fit.sigma2_resid * (x.transpose() * x).inverse();
  fit.n_obs = static_cast<std::size_t>(n);
  return fit;
}

}  // namespace vtv::stats
