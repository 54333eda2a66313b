#pragma once

// Speech-inversion network: two 3x3 convolutions over the (frame, feature)
// plane of the layered embedding, two unidirectional GRUs, linear 2x
// upsampling to 100 Hz, and two dense layers producing nine channels.
//
// Parameters live in one flat double vector so the optimizer, the checkpoint
// writer and the gradient checker all see the same layout.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vtv/random.hpp"
#include "vtv/tensors.hpp"

namespace vtv::inversion {

struct ModelDims {
  std::size_t layers = EmbeddingTensor::kLayers;
  std::size_t conv_channels = 16;
  std::size_t feature_dim = 32;
  std::size_t gru1 = 256;
  std::size_t gru2 = 128;
  std::size_t dense1 = 128;
  std::size_t outputs = kTvChannelCount;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Offsets of each parameter group inside the flat vector.
struct ParamLayout {
  struct Slice {
    std::size_t offset = 0;
    std::size_t size = 0;
  };
  Slice conv_a_w, bn_a_gamma, bn_a_beta;
  Slice conv_b_w, bn_b_gamma, bn_b_beta;
  Slice gru1_wih, gru1_whh, gru1_bih, gru1_bhh;
  Slice gru2_wih, gru2_whh, gru2_bih, gru2_bhh;
  Slice dense1_w, dense1_b;
  Slice out_w, out_b;
  std::size_t total = 0;

  explicit ParamLayout(const ModelDims& d);
  std::vector<std::pair<std::string, Slice>> named() const;
};

struct InversionModel {
  static constexpr double kDropout = 0.3;
  static constexpr double kBnEps = 1e-5;
  static constexpr double kBnMomentum = 0.1;

  ModelDims dims;
  std::vector<double> params;
  // Batch-norm running statistics: mean_a, var_a (conv_channels each), mean_b, var_b.
  std::vector<double> bn_running;
  std::uint64_t seed = 0;
  double dropout = kDropout;

  InversionModel() = default;
  InversionModel(const ModelDims& dims, std::uint64_t seed);

  ParamLayout layout() const { return ParamLayout(dims); }
  std::span<double> slice(const ParamLayout::Slice& s) {
    return {params.data() + s.offset, s.size};
  }
  std::span<const double> slice(const ParamLayout::Slice& s) const {
    return {params.data() + s.offset, s.size};
  }
};

enum class Mode {
  Inference,  // running batch-norm statistics, no dropout
  Training,   // batch statistics, dropout at model.dropout
};

struct ForwardOptions {
  Mode mode = Mode::Inference;
  bool dropout = true;  // only consulted in Training mode
  Rng* rng = nullptr;   // dropout masks; required when dropout is on
};

class BatchForward;

// Inference for one utterance. Throws Error(Shape) unless emb.layers == 25
// (or dims.layers) and emb.dim == dims.feature_dim.
TractVariableMatrix forward(const InversionModel& model, const EmbeddingTensor& emb,
                            bool training_mode = false, Rng* rng = nullptr);

// Batched forward pass keeping every activation needed for backward().
class BatchForward {
 public:
  BatchForward(const InversionModel& model, std::span<const EmbeddingTensor* const> batch,
               const ForwardOptions& options);
  ~BatchForward();
  BatchForward(const BatchForward&) = delete;
  BatchForward& operator=(const BatchForward&) = delete;

  const std::vector<TractVariableMatrix>& outputs() const;

  // Accumulates d(loss)/d(params) into grad (same layout as model.params)
  // given d(loss)/d(output) per utterance.
  void backward(std::span<const TractVariableMatrix> output_grads,
                std::span<double> grad) const;

  // Folds this batch's normalization statistics into the model's running
  // estimates (Training mode only).
  void update_running_stats(InversionModel& model) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void validate_input(const InversionModel& model, const EmbeddingTensor& emb);

}  // namespace vtv::inversion
