#pragma once

// Estimated marginal means over an equally weighted reference grid, pairwise
// contrasts with asymptotic z tests, and Benjamini-Hochberg adjustment.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vtv/stats/lmm.hpp"

namespace vtv::stats {

using Cell = std::map<std::string, std::string>;  // factor name -> level

struct Emm {
  Cell cell;
  double mean = 0.0;
  double se = 0.0;
  Eigen::VectorXd weights;  // L with mean = L' beta
};

// One EMM per combination of levels of `factors` (first factor varies
// fastest). Every other factor is averaged with equal weights over its
// levels; numeric covariates sit at their data mean. Throws
// Error(Estimability) when a cell touches an empty interaction column.
std::vector<Emm> emmeans(const LmmFit& fit, const Design& design,
                         const std::vector<std::string>& factors);

// Throws Error(Lookup) when no EMM matches.
const Emm& find_emm(std::span<const Emm> emms, const Cell& cell);

struct EmmContrast {
  std::string label;
  double delta_mu = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  double p_adj = 1.0;
  std::optional<int> expected_sign;  // +1 or -1
  std::optional<bool> supported;
};

// Two-sided p of a standard normal deviate.
double normal_two_sided_p(double z);

// a - b with SE from cov_beta. A zero difference with zero SE gives z = 0 and
// p = 1.
EmmContrast contrast(const LmmFit& fit, const Emm& a, const Emm& b, std::string label);

// For each (phone, reference) pair of cells, phone minus reference; p_adj is
// left equal to p.
std::vector<EmmContrast> contrast_reverse_pairwise(const LmmFit& fit, std::span<const Emm> emms,
                                                   std::span<const std::pair<Cell, Cell>> pairs);

// Step-up adjustment: p_adj(i) = min over ranks j >= rank(i) of m p_(j) / j,
// capped at 1, in input order. Throws Error(Domain) for p outside [0, 1].
std::vector<double> bh_adjust(std::span<const double> p);

}  // namespace vtv::stats
