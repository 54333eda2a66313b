#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace vtv {

// Self-supervised speech embeddings: layers x frames x dim, frames at 50 Hz.
struct EmbeddingTensor {
  static constexpr std::size_t kLayers = 25;

  std::size_t layers = 0;
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // row-major [layer][frame][dim]

  EmbeddingTensor() = default;
  EmbeddingTensor(std::size_t l, std::size_t t, std::size_t d)
      : layers(l), frames(t), dim(d), values(l * t * d, 0.0) {}

  double& at(std::size_t l, std::size_t t, std::size_t d) {
    return values[(l * frames + t) * dim + d];
  }
  double at(std::size_t l, std::size_t t, std::size_t d) const {
    return values[(l * frames + t) * dim + d];
  }
};

inline constexpr std::size_t kTvChannelCount = 9;
inline constexpr std::array<std::string_view, kTvChannelCount> kTvChannelNames{
    "LA", "LP", "TTCL", "TTCD", "TBCL", "TBCD", "APER", "PER", "F0"};

// Index of a channel name in kTvChannelNames, or -1.
int tv_channel_index(std::string_view name) noexcept;

// Nine tract/source channels at 100 Hz.
struct TractVariableMatrix {
  std::size_t frames = 0;
  std::vector<double> values;  // [channel][frame]

  TractVariableMatrix() = default;
  explicit TractVariableMatrix(std::size_t n)
      : frames(n), values(kTvChannelCount * n, 0.0) {}

  std::span<double> channel(std::size_t c) {
    return {values.data() + c * frames, frames};
  }
  std::span<const double> channel(std::size_t c) const {
    return {values.data() + c * frames, frames};
  }
  double& at(std::size_t c, std::size_t j) { return values[c * frames + j]; }
  double at(std::size_t c, std::size_t j) const { return values[c * frames + j]; }
};

inline constexpr double kTvSampleRate = 100.0;
inline constexpr double kEmbeddingFrameRate = 50.0;

}  // namespace vtv
