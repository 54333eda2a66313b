#pragma once

// Deterministic generators standing in for the articulography and clinical
// corpora. Every output is a pure function of the SynthSpec.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vtv/geometry.hpp"
#include "vtv/ratings.hpp"
#include "vtv/segments.hpp"
#include "vtv/kinematics.hpp"
#include "vtv/tensors.hpp"

namespace vtv {

enum class PalateShape { Flat, CircularArc, SplineLike };

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t n_frames = 100;
  std::size_t speaker_count = 1;
  PalateShape palate_shape = PalateShape::SplineLike;
  double noise_sd = 1.0;  // mm; 0 freezes every frame

  std::size_t embedding_dim = 32;
  // Seed of the fixed embedding-to-target mapping shared by every utterance.
  std::uint64_t mapping_seed = 7;

  void validate() const;
};

struct PalateCircle {
  Point2 center;
  double radius = 0.0;
};

inline constexpr std::size_t kPalatePoints = 64;

PalateTrace generate_palate_trace(const SynthSpec& spec);

// Generator circle behind a CircularArc trace.
PalateCircle palate_circle(const SynthSpec& spec);

// Mean distance of T1..T4 behind the tongue apex, and their spread at
// noise_sd = 1 mm.
inline constexpr std::array<double, 4> kPelletApexMeans{8.5, 25.2, 43.8, 60.1};
inline constexpr std::array<double, 4> kPelletApexSds{1.07, 2.44, 3.49, 4.14};

struct PelletSequence {
  std::vector<PelletFrame> frames;
  std::vector<double> apex_x;  // tongue apex x per frame
};

PelletSequence generate_pellet_sequence(const SynthSpec& spec);

// Embedding (25 layers at 50 Hz, spec.n_frames frames) and a 9-channel target
// at 100 Hz, linked by a smooth deterministic mapping.
std::pair<EmbeddingTensor, TractVariableMatrix> synth_training_pair(const SynthSpec& spec);

// Clinical corpus: one utterance per file with a single target or control
// phone, three raters per target file, and tract-variable series in the
// normalized articulatory space. Control phones sit `delta` beyond the correct
// means on each predicted channel; an error file with consensus mean score m
// sits the fraction (5 - m) / 5 of the way from correct to its control.
struct ClinicalSpec {
  std::uint64_t seed = 0;
  std::size_t speakers = 12;
  std::size_t correct_per_speaker = 4;
  std::size_t control_per_speaker = 3;
  std::size_t error_per_speaker = 5;
  // Files of the error groups without a paired control (r_l, s_affricate),
  // kept below the minimum group size.
  std::size_t rare_error_files = 6;
  double delta = 0.4;
  double speaker_sd = 0.10;
  double utterance_sd = 0.05;
  double token_sd = 0.02;
  double sample_sd = 0.02;

  void validate() const;
};

struct ClinicalFile {
  std::string file_id;
  std::string speaker_id;
  std::string utterance_id;
  std::string word;
  std::string timepoint;
  std::string phone;  // generating label (correct, control or error phone)
  TractVariableMatrix tv;
};

struct ClinicalCorpus {
  std::vector<ClinicalFile> files;
  std::vector<PhoneInterval> alignment;  // aligner labels: target phones, controls, fillers
  std::vector<RatingRecord> ratings;     // target files only, in submission order
};

ClinicalCorpus synth_clinical_corpus(const ClinicalSpec& spec);

}  // namespace vtv
