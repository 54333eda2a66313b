#include "vtv/stats/emm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "vtv/error.hpp"

namespace vtv::stats {

namespace {

const Variable& factor_variable(const LmmSpec& spec, const std::string& name) {
  for (const auto& v : spec.variables) {
    if (v.name == name) {
      if (v.kind != Variable::Kind::Factor) {
        throw Error(ErrorKind::Lookup, "'" + name + "' is not a factor");
      }
      return v;
    }
  }
  throw Error(ErrorKind::Lookup, "model has no factor '" + name + "'");
}

// Every combination of levels of `vars`, first variable fastest.
std::vector<Cell> grid(const std::vector<const Variable*>& vars) {
  std::vector<Cell> out;
  std::vector<std::size_t> idx(vars.size(), 0);
  while (true) {
    Cell c;
    for (std::size_t k = 0; k < vars.size(); ++k) c[vars[k]->name] = vars[k]->levels[idx[k]];
    out.push_back(std::move(c));
    std::size_t k = 0;
    while (k < vars.size() && ++idx[k] == vars[k]->levels.size()) idx[k++] = 0;
    if (k == vars.size()) break;
  }
  return out;
}

std::string describe(const Cell& cell) {
  std::vector<std::string> parts;
  for (const auto& [k, v] : cell) parts.push_back(k + "=" + v);
  return fmt::format("{}", fmt::join(parts, ", "));
}

}  // namespace

std::vector<Emm> emmeans(const LmmFit& fit, const Design& design,
                         const std::vector<std::string>& factors) {
  const LmmSpec& spec = design.spec();
  if (static_cast<std::size_t>(fit.beta.size()) != design.columns().size()) {
    throw Error(ErrorKind::Shape, "fit does not belong to this design");
  }
  std::vector<const Variable*> by, over;
  for (const auto& name : factors) by.push_back(&factor_variable(spec, name));
  for (const auto& v : spec.variables) {
    if (v.kind == Variable::Kind::Factor &&
        std::find(factors.begin(), factors.end(), v.name) == factors.end()) {
      over.push_back(&v);
    }
  }
  const std::vector<Cell> rest = grid(over);
  std::vector<Emm> out;
  for (const Cell& cell : grid(by)) {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(fit.beta.size());
    for (const Cell& r : rest) {
      Cell full = cell;
      full.insert(r.begin(), r.end());
      try {
        l += design.row(full, {});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Estimability) throw;
        throw Error(ErrorKind::Estimability,
                    fmt::format("marginal mean at {} is not estimable: {}", describe(cell), e.what()));
      }
    }
    l /= static_cast<double>(rest.size());
    Emm e;
    e.cell = cell;
    e.mean = l.dot(fit.beta);
    e.se = std::sqrt(std::max(0.0, l.dot(fit.cov_beta * l)));
    e.weights = std::move(l);
    out.push_back(std::move(e));
  }
  return out;
}

const Emm& find_emm(std::span<const Emm> emms, const Cell& cell) {
  for (const auto& e : emms) {
    if (e.cell == cell) return e;
  }
  throw Error(ErrorKind::Lookup, "no marginal mean for " + describe(cell));
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

EmmContrast contrast(const LmmFit& fit, const Emm& a, const Emm& b, std::string label) {
  const Eigen::VectorXd d = a.weights - b.weights;
  EmmContrast c;
  c.label = std::move(label);
  c.delta_mu = a.mean - b.mean;
  c.se = std::sqrt(std::max(0.0, d.dot(fit.cov_beta * d)));
  if (c.se > 0.0) {
    c.z = c.delta_mu / c.se;
  } else {
    c.z = c.delta_mu == 0.0 ? 0.0 : std::copysign(HUGE_VAL, c.delta_mu);
  }
  c.p = normal_two_sided_p(c.z);
  c.p_adj = c.p;
  return c;
}

std::vector<EmmContrast> contrast_reverse_pairwise(const LmmFit& fit, std::span<const Emm> emms,
                                                   std::span<const std::pair<Cell, Cell>> pairs) {
  std::vector<EmmContrast> out;
  for (const auto& [a, b] : pairs) {
    const Emm& ea = find_emm(emms, a);
    const Emm& eb = find_emm(emms, b);
    // Label by the factors that differ.
    std::vector<std::string> la, lb;
    for (const auto& [k, v] : a) {
      const auto it = b.find(k);
      if (it == b.end() || it->second != v) {
        la.push_back(v);
        lb.push_back(it == b.end() ? std::string("?") : it->second);
      }
    }
    out.push_back(contrast(fit, ea, eb,
                           fmt::format("{} - {}", fmt::join(la, ":"), fmt::join(lb, ":"))));
  }
  return out;
}

std::vector<double> bh_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::Domain, fmt::format("p-value {} is outside [0, 1]", v));
    }
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const std::size_t i = order[k];
    running = std::min(running, static_cast<double>(m) / static_cast<double>(k + 1) * p[i]);
    out[i] = running;
  }
  return out;
}

}  // namespace vtv::stats
