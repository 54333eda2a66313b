#include "vtv/inversion/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vtv/error.hpp"

namespace vtv::inversion {

namespace {

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::Domain, "alpha must lie in [0, 1]");
  }
}

void check_shapes(const TractVariableMatrix& pred, const TractVariableMatrix& truth) {
  if (pred.frames != truth.frames || pred.values.size() != truth.values.size()) {
    throw Error(ErrorKind::Shape, "prediction has " + std::to_string(pred.frames) +
                                      " frames, target has " + std::to_string(truth.frames));
  }
  if (pred.frames < 2) throw Error(ErrorKind::Shape, "series need at least two samples");
}

struct ChannelStats {
  double r = 0.0;
  double rmse = 0.0;
  bool exact = false;
};

// Fills dr and drmse (may be null) with per-sample derivatives.
ChannelStats channel_stats(std::span<const double> p, std::span<const double> t,
                           double* dr, double* drmse) {
  const std::size_t n = p.size();
  ChannelStats st;
  st.exact = std::equal(p.begin(), p.end(), t.begin());
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) sse += (p[i] - t[i]) * (p[i] - t[i]);
  st.rmse = std::sqrt(sse / static_cast<double>(n));
  if (drmse != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      drmse[i] = st.rmse > 0.0 ? (p[i] - t[i]) / (static_cast<double>(n) * st.rmse) : 0.0;
    }
  }
  if (dr != nullptr) std::fill(dr, dr + n, 0.0);
  if (st.exact) {
    st.r = 1.0;
    return st;
  }
  if (is_constant(p) || is_constant(t)) return st;
  const double pm = mean_of(p), tm = mean_of(t);
  double spp = 0.0, stt = 0.0, spt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    spp += (p[i] - pm) * (p[i] - pm);
    stt += (t[i] - tm) * (t[i] - tm);
    spt += (p[i] - pm) * (t[i] - tm);
  }
  const double denom = std::sqrt(spp * stt);
  st.r = std::clamp(spt / denom, -1.0, 1.0);
  if (dr != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      dr[i] = (t[i] - tm) / denom - (spt / denom) * (p[i] - pm) / spp;
    }
  }
  return st;
}

}  // namespace

double pearson_r(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorKind::Shape, "pearson_r: series lengths differ");
  }
  if (pred.size() < 2) throw Error(ErrorKind::Shape, "pearson_r: need at least two samples");
  if (is_constant(pred) || is_constant(truth)) return 0.0;
  const double pm = mean_of(pred), tm = mean_of(truth);
  double spp = 0.0, stt = 0.0, spt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    spp += (pred[i] - pm) * (pred[i] - pm);
    stt += (truth[i] - tm) * (truth[i] - tm);
    spt += (pred[i] - pm) * (truth[i] - tm);
  }
  return std::clamp(spt / std::sqrt(spp * stt), -1.0, 1.0);
}

LossTerms loss_terms(const TractVariableMatrix& pred, const TractVariableMatrix& truth,
                     double alpha) {
  check_alpha(alpha);
  check_shapes(pred, truth);
  LossTerms out;
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    const ChannelStats st = channel_stats(pred.channel(c), truth.channel(c), nullptr, nullptr);
    out.mean_r += st.r;
    out.mean_rmse += st.rmse;
  }
  out.mean_r /= static_cast<double>(kTvChannelCount);
  out.mean_rmse /= static_cast<double>(kTvChannelCount);
  out.loss = alpha * (1.0 - out.mean_r) + (1.0 - alpha) * out.mean_rmse;
  return out;
}

double loss(const TractVariableMatrix& pred, const TractVariableMatrix& truth, double alpha) {
  return loss_terms(pred, truth, alpha).loss;
}

double loss_with_grad(const TractVariableMatrix& pred, const TractVariableMatrix& truth,
                      double alpha, TractVariableMatrix& grad) {
  check_alpha(alpha);
  check_shapes(pred, truth);
  const std::size_t n = pred.frames;
  grad = TractVariableMatrix(n);
  std::vector<double> dr(n), drmse(n);
  double mean_r = 0.0, mean_rmse = 0.0;
  const double w = 1.0 / static_cast<double>(kTvChannelCount);
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    const ChannelStats st =
        channel_stats(pred.channel(c), truth.channel(c), dr.data(), drmse.data());
    mean_r += st.r;
    mean_rmse += st.rmse;
    auto g = grad.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = w * (-alpha * dr[i] + (1.0 - alpha) * drmse[i]);
    }
  }
  mean_r *= w;
  mean_rmse *= w;
  return alpha * (1.0 - mean_r) + (1.0 - alpha) * mean_rmse;
}

double batch_loss(std::span<const TractVariableMatrix> preds,
                  std::span<const TractVariableMatrix> truths, double alpha,
                  std::vector<TractVariableMatrix>* grads) {
  if (preds.size() != truths.size()) {
    throw Error(ErrorKind::Shape, "prediction and target batch sizes differ");
  }
  if (preds.empty()) throw Error(ErrorKind::EmptyInput, "empty batch");
  const double scale = 1.0 / static_cast<double>(preds.size());
  double total = 0.0;
  if (grads != nullptr) grads->resize(preds.size());
  for (std::size_t b = 0; b < preds.size(); ++b) {
    if (grads == nullptr) {
      total += loss(preds[b], truths[b], alpha);
      continue;
    }
    TractVariableMatrix& g = (*grads)[b];
    total += loss_with_grad(preds[b], truths[b], alpha, g);
    for (double& v : g.values) v *= scale;
  }
  return total * scale;
}

}  // namespace vtv::inversion
