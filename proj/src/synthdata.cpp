#include "vtv/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vtv/error.hpp"
#include "vtv/random.hpp"

namespace vtv {

void SynthSpec::validate() const {
  if (n_frames < 1) throw Error(ErrorKind::Config, "n_frames must be >= 1");
  if (!(noise_sd >= 0.0)) throw Error(ErrorKind::Config, "noise_sd must be >= 0");
  if (embedding_dim < 1) throw Error(ErrorKind::Config, "embedding_dim must be >= 1");
}

namespace {

constexpr double kTraceFront = 0.0;
constexpr double kTraceBack = -90.0;

double trace_x(std::size_t i) {
  return kTraceFront + (kTraceBack - kTraceFront) * static_cast<double>(i) /
                           static_cast<double>(kPalatePoints - 1);
}

}  // namespace

PalateCircle palate_circle(const SynthSpec& spec) {
  Rng rng(mix_seed(spec.seed, 1));
  const double radius = 60.0 + rng.uniform(-5.0, 5.0);
  const double vault = 15.0 + rng.uniform(-1.0, 1.0);
  return {{-45.0, vault - radius}, radius};
}

PalateTrace generate_palate_trace(const SynthSpec& spec) {
  spec.validate();
  std::vector<Point2> pts(kPalatePoints);
  switch (spec.palate_shape) {
    case PalateShape::Flat: {
      Rng rng(mix_seed(spec.seed, 1));
      const double height = 12.0 + rng.uniform(-1.0, 1.0);
      for (std::size_t i = 0; i < kPalatePoints; ++i) pts[i] = {trace_x(i), height};
      break;
    }
    case PalateShape::CircularArc: {
      const PalateCircle c = palate_circle(spec);
      for (std::size_t i = 0; i < kPalatePoints; ++i) {
        const double x = trace_x(i);
        const double dx = x - c.center.x;
        pts[i] = {x, c.center.y + std::sqrt(c.radius * c.radius - dx * dx)};
      }
      break;
    }
    case PalateShape::SplineLike: {
      Rng rng(mix_seed(spec.seed, 1));
      const double a1 = 1.0 + rng.uniform(-0.3, 0.3);
      const double a2 = 1.5 * rng.uniform(-1.0, 1.0);
      const double a3 = 0.8 * rng.uniform(-1.0, 1.0);
      for (std::size_t i = 0; i < kPalatePoints; ++i) {
        const double x = trace_x(i);
        const double s = -x / (kTraceFront - kTraceBack);  // 0 at incisors, 1 at pharynx
        const double y = 2.0 + 12.0 * a1 * std::sin(std::numbers::pi * s) +
                         a2 * std::sin(2.0 * std::numbers::pi * s) +
                         a3 * std::sin(3.0 * std::numbers::pi * s);
        pts[i] = {x, y};
      }
      break;
    }
  }
  return PalateTrace(std::move(pts));
}

PelletSequence generate_pellet_sequence(const SynthSpec& spec) {
  spec.validate();
  const PalateTrace trace = generate_palate_trace(spec);
  Rng rng(mix_seed(spec.seed, 2));
  constexpr std::array<double, 4> kClearance{4.0, 6.0, 8.0, 10.0};
  const double sd = spec.noise_sd;
  const double x_floor = kTraceBack + 1.0;

  PelletSequence seq;
  seq.frames.reserve(spec.n_frames);
  seq.apex_x.reserve(spec.n_frames);
  for (std::size_t i = 0; i < spec.n_frames; ++i) {
    PelletFrame f;
    f.time = static_cast<double>(i) / kTvSampleRate;
    const double apex = -3.0 + sd * rng.normal();

    std::array<double, 4> dist{};
    std::array<Point2*, 4> tongue{&f.t1, &f.t2, &f.t3, &f.t4};
    for (std::size_t k = 0; k < 4; ++k) {
      dist[k] = kPelletApexMeans[k] + sd * kPelletApexSds[k] * rng.normal();
      if (k > 0) dist[k] = std::max(dist[k], dist[k - 1] + 1.0);
      const double x = std::max(apex - dist[k], x_floor - static_cast<double>(3 - k));
      const double clearance = kClearance[k] + sd * std::abs(rng.normal());
      *tongue[k] = {x, trace.height_at(x) - clearance};
    }
    // Keep strict front-to-back order even when the floor clamp engages.
    for (std::size_t k = 1; k < 4; ++k) {
      if (tongue[k]->x >= tongue[k - 1]->x) {
        const double x = tongue[k - 1]->x - 0.5;
        *tongue[k] = {x, std::min(tongue[k]->y, trace.height_at(x) - kClearance[k])};
      }
    }
    f.ul = {1.0 + 0.5 * sd * rng.normal(), 10.0 + sd * rng.normal()};
    f.ll = {0.5 + 0.5 * sd * rng.normal(), -8.0 + sd * rng.normal()};
    seq.frames.push_back(f);
    seq.apex_x.push_back(apex);
  }
  return seq;
}

std::pair<EmbeddingTensor, TractVariableMatrix> synth_training_pair(const SynthSpec& spec) {
  spec.validate();
  const std::size_t frames = spec.n_frames;
  const std::size_t samples = 2 * frames;
  const std::size_t dim = spec.embedding_dim;
  constexpr std::size_t kComponents = 3;

  // Latent trajectories: a few slow sinusoids per channel, sampled at 100 Hz.
  Rng latent_rng(mix_seed(spec.seed, 3));
  std::vector<double> latent(kTvChannelCount * samples, 0.0);
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    std::array<double, kComponents> freq{}, phase{}, amp{};
    for (std::size_t k = 0; k < kComponents; ++k) {
      freq[k] = latent_rng.uniform(0.5, 3.0);
      phase[k] = latent_rng.uniform(0.0, 2.0 * std::numbers::pi);
      amp[k] = latent_rng.uniform(0.4, 1.0);
    }
    const double offset = latent_rng.uniform(-0.3, 0.3);
    for (std::size_t j = 0; j < samples; ++j) {
      const double t = static_cast<double>(j) / kTvSampleRate;
      double v = offset;
      for (std::size_t k = 0; k < kComponents; ++k) {
        v += amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * t + phase[k]);
      }
      latent[c * samples + j] = v / 1.5;
    }
  }

  TractVariableMatrix target(samples);
  for (std::size_t c = 0; c < kTvChannelCount; ++c) {
    for (std::size_t j = 0; j < samples; ++j) {
      target.at(c, j) = std::tanh(latent[c * samples + j]);
    }
  }

  // Fixed mapping: each embedding feature mixes both 100 Hz samples of its
  // 50 Hz frame; layers are scaled copies plus a little independent noise.
  Rng map_rng(mix_seed(spec.mapping_seed, 4));
  const std::size_t in = 2 * kTvChannelCount;
  std::vector<double> mix(dim * in);
  for (double& m : mix) m = map_rng.normal() / std::sqrt(static_cast<double>(in));
  std::array<double, EmbeddingTensor::kLayers> gain{};
  for (double& g : gain) g = map_rng.uniform(0.5, 1.5);

  Rng noise_rng(mix_seed(spec.seed, 5));
  EmbeddingTensor emb(EmbeddingTensor::kLayers, frames, dim);
  std::vector<double> frame_feat(dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      double v = 0.0;
      for (std::size_t c = 0; c < kTvChannelCount; ++c) {
        v += mix[d * in + 2 * c] * latent[c * samples + 2 * t];
        v += mix[d * in + 2 * c + 1] * latent[c * samples + 2 * t + 1];
      }
      frame_feat[d] = v;
    }
    for (std::size_t l = 0; l < EmbeddingTensor::kLayers; ++l) {
      for (std::size_t d = 0; d < dim; ++d) {
        emb.at(l, t, d) = gain[l] * frame_feat[d] + 0.01 * noise_rng.normal();
      }
    }
  }
  return {std::move(emb), std::move(target)};
}

}  // namespace vtv
