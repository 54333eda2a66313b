#pragma once

// Linear mixed models with random intercepts for speakers and for
// utterances nested in speakers, fitted by restricted maximum likelihood.
//
//   y = X b + Z_s u_s + Z_u u_u + e,  u_s ~ N(0, s2 ts I), u_u ~ N(0, s2 tu I),
//   e ~ N(0, s2 I)
//
// The residual variance s2 and the fixed effects are profiled out; the two
// variance ratios (ts, tu) are optimized on a log scale. Every evaluation
// uses the block structure of V in closed form, so its cost does not grow
// with the number of rows once per-utterance sufficient statistics exist.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vtv::stats {

struct Variable {
  enum class Kind { Factor, Numeric };
  std::string name;
  Kind kind = Kind::Factor;
  std::vector<std::string> levels;  // factors only; the first is the reference
};

enum class RandomEffects { Nested, SpeakerOnly, None };

// Response ~ product of all variables (every main effect and interaction).
struct LmmSpec {
  std::string response = "y";
  std::vector<Variable> variables;
  RandomEffects random = RandomEffects::Nested;
};

struct LmmData {
  std::vector<double> y;
  std::vector<std::string> speaker;
  std::vector<std::string> utterance;  // (speaker, utterance) identifies a cluster
  std::map<std::string, std::vector<std::string>> factors;
  std::map<std::string, std::vector<double>> numerics;

  std::size_t rows() const { return y.size(); }
};

// Fixed-effects design built from an LmmSpec. Columns whose interaction cell
// has no data are dropped; any remaining aliasing is a rank error naming the
// aliased columns.
class Design {
 public:
  Design(const LmmSpec& spec, const LmmData& data);

  const Eigen::MatrixXd& matrix() const { return x_; }
  const std::vector<std::string>& columns() const { return kept_names_; }
  const std::vector<std::string>& dropped() const { return dropped_names_; }
  const LmmSpec& spec() const { return spec_; }
  double numeric_mean(const std::string& name) const { return numeric_means_.at(name); }

  // Full-design row (before dropping) for factor levels and numeric values.
  Eigen::VectorXd full_row(const std::map<std::string, std::string>& levels,
                           const std::map<std::string, double>& numerics) const;
  // Row restricted to kept columns; throws Error(Estimability) when the row
  // loads on a dropped column.
  Eigen::VectorXd row(const std::map<std::string, std::string>& levels,
                      const std::map<std::string, double>& numerics) const;

 private:
  LmmSpec spec_;
  std::vector<std::string> full_names_;
  std::vector<std::size_t> kept_;
  std::vector<std::string> kept_names_;
  std::vector<std::string> dropped_names_;
  std::map<std::string, double> numeric_means_;
  Eigen::MatrixXd x_;
};

struct FitOptions {
  std::optional<double> fixed_theta_speaker;  // variance ratio to s2
  std::optional<double> fixed_theta_utterance;
  int max_iterations = 2000;
  double tolerance = 1e-8;  // criterion improvement treated as converged
};

struct LmmFit {
  std::vector<std::string> columns;
  std::vector<std::string> dropped_columns;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_beta;
  double sigma2_speaker = 0.0;
  double sigma2_utterance = 0.0;
  double sigma2_resid = 0.0;
  double theta_speaker = 0.0;
  double theta_utterance = 0.0;
  double reml_criterion = 0.0;  // -2 log restricted likelihood
  double reml_loglik = 0.0;
  bool boundary = false;  // some variance component estimated at 0
  int evaluations = 0;
  std::size_t n_obs = 0;
  std::size_t n_speakers = 0;
  std::size_t n_utterances = 0;

  std::size_t column_index(const std::string& name) const;
};

LmmFit fit_lmm_reml(const Design& design, const LmmData& data, const FitOptions& options = {});

// Ordinary least squares on the same design.
LmmFit fit_ols(const Design& design, const LmmData& data);

// -2 log restricted likelihood at fixed variance ratios (for diagnostics and
// tests).
double reml_criterion_at(const Design& design, const LmmData& data, double theta_speaker,
                         double theta_utterance);

}  // namespace vtv::stats
