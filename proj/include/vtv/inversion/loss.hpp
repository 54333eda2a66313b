#pragma once

// Correlation/RMSE training objective over nine-channel tract-variable series.
//
//   loss = alpha * (1 - mean_c r_c) + (1 - alpha) * mean_c RMSE_c
//
// r_c and RMSE_c are computed per channel of one utterance; a batch loss is
// the mean of the per-utterance losses.

#include <span>
#include <vector>

#include "vtv/tensors.hpp"

namespace vtv::inversion {

inline constexpr double kDefaultAlpha = 0.8;

// Sample correlation. A constant series on either side yields 0.
// Throws Error(Shape) on length mismatch or fewer than two samples.
double pearson_r(std::span<const double> pred, std::span<const double> truth);

struct LossTerms {
  double loss = 0.0;
  double mean_r = 0.0;
  double mean_rmse = 0.0;
};

// Within the objective a channel whose prediction equals its target exactly
// scores r = 1, so loss == 0 exactly when pred == truth.
LossTerms loss_terms(const TractVariableMatrix& pred, const TractVariableMatrix& truth,
                     double alpha);

double loss(const TractVariableMatrix& pred, const TractVariableMatrix& truth,
            double alpha = kDefaultAlpha);

// Loss and d(loss)/d(pred). Constant channels and zero-RMSE channels
// contribute a zero gradient for the respective term.
double loss_with_grad(const TractVariableMatrix& pred, const TractVariableMatrix& truth,
                      double alpha, TractVariableMatrix& grad);

// Mean loss over a batch; grads (if non-null) receives per-utterance
// gradients of the batch mean.
double batch_loss(std::span<const TractVariableMatrix> preds,
                  std::span<const TractVariableMatrix> truths, double alpha,
                  std::vector<TractVariableMatrix>* grads);

}  // namespace vtv::inversion
