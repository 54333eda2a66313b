#include "vtv/inversion/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vtv/error.hpp"
#include "vtv/random.hpp"

namespace vtv::inversion {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::Config, "learning_rate must be positive");
  }
  if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Config, "alpha must lie in [0, 1]");
  if (max_epochs < 1) throw Error(ErrorKind::Config, "max_epochs must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
    throw Error(ErrorKind::Config, "plateau_factor must lie in (0, 1]");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
  }
}

double PlateauScheduler::observe(double loss) {
  if (loss < best_ - threshold_) {
    best_ = loss;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ *= factor_;
    bad_ = 0;
  }
  return lr_;
}

bool EarlyStopping::observe(std::size_t epoch, double loss) {
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

std::vector<const EmbeddingTensor*> embeddings_of(std::span<const Sample> batch) {
  std::vector<const EmbeddingTensor*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s.embedding);
  return out;
}

std::vector<TractVariableMatrix> targets_of(std::span<const Sample> batch) {
  std::vector<TractVariableMatrix> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(s.target);
  return out;
}

void check_samples(std::span<const Sample> data, const char* what) {
  if (data.empty()) throw Error(ErrorKind::EmptyInput, std::string(what) + " set is empty");
  for (const auto& s : data) {
    if (s.target.frames != 2 * s.embedding.frames) {
      throw Error(ErrorKind::Shape, std::string(what) +
                                        " sample target length is not twice the embedding length");
    }
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double dataset_loss(const InversionModel& model, std::span<const Sample> data, double alpha) {
  double total = 0.0;
  for (const auto& s : data) total += loss(forward(model, s.embedding), s.target, alpha);
  return total / static_cast<double>(data.size());
}

double loss_and_gradient(const InversionModel& model, std::span<const Sample> batch,
                         double alpha, std::vector<double>& grad) {
  const auto embs = embeddings_of(batch);
  ForwardOptions opt;
  opt.mode = Mode::Training;
  opt.dropout = false;
  const BatchForward fwd(model, embs, opt);
  const auto truths = targets_of(batch);
  std::vector<TractVariableMatrix> grads;
  const double value = batch_loss(fwd.outputs(), truths, alpha, &grads);
  grad.assign(model.params.size(), 0.0);
  fwd.backward(grads, grad);
  return value;
}

TrainResult train(InversionModel model, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& config) {
  config.validate();
  check_samples(train_set, "training");
  check_samples(val_set, "validation");
  for (const auto& s : train_set) validate_input(model, s.embedding);
  for (const auto& s : val_set) validate_input(model, s.embedding);

  TrainResult result;
  result.model = model;
  Adam adam(model.params.size());
  PlateauScheduler scheduler(config.learning_rate, config.plateau_factor,
                             config.plateau_patience, config.plateau_threshold);
  EarlyStopping stopper(config.patience_epochs);
  Rng dropout_rng(mix_seed(config.seed, 101));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.params.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = scheduler.rate();
    Rng shuffle_rng(mix_seed(config.seed, 1000 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double train_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const EmbeddingTensor*> embs;
      std::vector<TractVariableMatrix> truths;
      for (std::size_t i = start; i < end; ++i) {
        embs.push_back(&train_set[order[i]].embedding);
        truths.push_back(train_set[order[i]].target);
      }
      ForwardOptions opt;
      opt.mode = Mode::Training;
      opt.dropout = config.dropout;
      opt.rng = &dropout_rng;
      const BatchForward fwd(model, embs, opt);
      std::vector<TractVariableMatrix> out_grads;
      const double value = batch_loss(fwd.outputs(), truths, config.alpha, &out_grads);
      if (!std::isfinite(value)) {
        throw TrainingDivergedError(static_cast<int>(epoch), "training loss is not finite");
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      fwd.backward(out_grads, grad);
      if (!all_finite(grad)) {
        throw TrainingDivergedError(static_cast<int>(epoch), "gradient is not finite");
      }
      fwd.update_running_stats(model);
      adam.step(model.params, grad, lr);
      if (!all_finite(model.params)) {
        throw TrainingDivergedError(static_cast<int>(epoch), "parameters are not finite");
      }
      train_total += value;
      ++batches;
    }

    const double val = dataset_loss(model, val_set, config.alpha);
    if (!std::isfinite(val)) {
      throw TrainingDivergedError(static_cast<int>(epoch), "validation loss is not finite");
    }
    result.history.push_back({epoch, train_total / static_cast<double>(batches), val, lr});
    if (stopper.observe(epoch, val)) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) {
      result.stopped_early = true;
      break;
    }
    scheduler.observe(val);
  }
  return result;
}

GradientCheckResult gradient_check(const InversionModel& model, const Sample& sample,
                                   double epsilon, double alpha, std::size_t count,
                                   std::uint64_t seed) {
  const std::span<const Sample> batch(&sample, 1);
  std::vector<double> analytic;
  loss_and_gradient(model, batch, alpha, analytic);

  const std::size_t n = model.params.size();
  count = std::min(count, n);
  Rng rng(mix_seed(seed, 202));
  std::set<std::size_t> picked;
  while (picked.size() < count) picked.insert(rng.index(n));

  InversionModel probe = model;
  const auto eval = [&] {
    std::vector<const EmbeddingTensor*> embs{&sample.embedding};
    ForwardOptions opt;
    opt.mode = Mode::Training;
    opt.dropout = false;
    const BatchForward fwd(probe, embs, opt);
    return loss(fwd.outputs().front(), sample.target, alpha);
  };

  GradientCheckResult res;
  for (std::size_t idx : picked) {
    const double saved = probe.params[idx];
    probe.params[idx] = saved + epsilon;
    const double up = eval();
    probe.params[idx] = saved - epsilon;
    const double down = eval();
    probe.params[idx] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[idx];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    if (rel > res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_index = idx;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace vtv::inversion
