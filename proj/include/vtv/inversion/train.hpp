#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "vtv/inversion/loss.hpp"
#include "vtv/inversion/model.hpp"
#include "vtv/tensors.hpp"

namespace vtv::inversion {

struct Sample {
  EmbeddingTensor embedding;
  TractVariableMatrix target;  // 2 * embedding.frames samples
};

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 8;
  std::size_t patience_epochs = 10;
  double alpha = kDefaultAlpha;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  double plateau_factor = 0.5;
  std::size_t plateau_patience = 3;
  double plateau_threshold = 1e-4;
  bool dropout = true;

  void validate() const;
};

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::uint64_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

// Multiplies the rate by `factor` once the monitored loss has gone
// `patience` epochs without improving on the best by more than `threshold`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, std::size_t patience, double threshold)
      : lr_(lr), factor_(factor), patience_(patience), threshold_(threshold) {}
  double observe(double loss);
  double rate() const { return lr_; }

 private:
  double lr_, factor_;
  std::size_t patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

// Tracks the best epoch (strict improvement) and signals a stop once
// `patience` consecutive epochs fail to improve on it.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when this epoch is the new best.
  bool observe(std::size_t epoch, double loss);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  InversionModel model;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Throws TrainingDivergedError when a loss or parameter becomes non-finite.
TrainResult train(InversionModel model, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& config);

// Mean inference-mode loss over a data set.
double dataset_loss(const InversionModel& model, std::span<const Sample> data, double alpha);

// Loss and full parameter gradient for one batch, dropout off, batch
// statistics in the normalization layers.
double loss_and_gradient(const InversionModel& model, std::span<const Sample> batch,
                         double alpha, std::vector<double>& grad);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

// Central differences on `count` distinct random parameters. The relative
// error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const InversionModel& model, const Sample& sample,
                                   double epsilon, double alpha = kDefaultAlpha,
                                   std::size_t count = 256, std::uint64_t seed = 0);

}  // namespace vtv::inversion
