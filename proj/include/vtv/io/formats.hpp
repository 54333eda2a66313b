#pragma once

// File formats for pellets, palate traces, tract-variable series, embeddings,
// checkpoints and the training manifest.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/geometry.hpp"
#include "vtv/inversion/model.hpp"
#include "vtv/kinematics.hpp"
#include "vtv/tensors.hpp"

namespace vtv::io {

// `time_s,UL_x,UL_y,LL_x,LL_y,T1_x,T1_y,T2_x,T2_y,T3_x,T3_y,T4_x,T4_y`
std::vector<PelletFrame> parse_pellet_csv(std::string_view text);
std::string write_pellet_csv(const std::vector<PelletFrame>& frames);

// `x_mm,y_mm`, anterior to posterior.
PalateTrace parse_palate_csv(std::string_view text);
std::string write_palate_csv(const PalateTrace& trace);

// `time_s,LA,LP,TTCL,TTCD,TBCL,TBCD[,PER,APER,F0]` at 100 Hz. Absent source
// columns read as zero.
struct TvSeries {
  TractVariableMatrix matrix;
  bool has_source = false;
};
TvSeries parse_tv_csv(std::string_view text);
std::string write_tv_csv(const TractVariableMatrix& matrix, bool include_source);

// Little-endian `VTVE`, u32 L, u32 T, u32 D, then L*T*D float32.
std::string encode_embedding(const EmbeddingTensor& emb);
EmbeddingTensor decode_embedding(std::string_view bytes);
EmbeddingTensor read_embedding(const std::filesystem::path& path);
void write_embedding(const std::filesystem::path& path, const EmbeddingTensor& emb);

// Little-endian `VTVM`, u32 version, u32 dim count, u32 dims[], u64 param
// count, float32 params, u64 buffer count, float32 normalization buffers,
// u64 seed, u32 byte length, config JSON.
struct Checkpoint {
  inversion::InversionModel model;
  std::string config_json;
};
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

enum class Split { Train, Val, Test };
std::string_view to_string(Split split) noexcept;

struct ManifestEntry {
  std::filesystem::path embedding;  // resolved against the manifest directory
  std::filesystem::path target;
  std::string speaker_id;
  Split split = Split::Train;
};

// `embedding,target,speaker_id,split`. Throws Error(Validation) when a
// speaker appears in more than one split.
std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string write_manifest(const std::vector<ManifestEntry>& entries);

}  // namespace vtv::io
