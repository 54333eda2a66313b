#include "vtv/io/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <map>

#include <fmt/format.h>

#include "vtv/error.hpp"
#include "vtv/io/csv.hpp"

namespace vtv::io {

namespace {

const std::vector<std::string> kPelletHeader{"time_s", "UL_x", "UL_y", "LL_x", "LL_y",
                                             "T1_x",   "T1_y", "T2_x", "T2_y", "T3_x",
                                             "T3_y",   "T4_x", "T4_y"};
const std::vector<std::string> kPalateHeader{"x_mm", "y_mm"};
const std::vector<std::string> kTvOralHeader{"time_s", "LA",   "LP",  "TTCL",
                                             "TTCD",   "TBCL", "TBCD"};
const std::vector<std::string> kTvSourceColumns{"PER", "APER", "F0"};
const std::vector<std::string> kManifestHeader{"embedding", "target", "speaker_id", "split"};

class Writer {
 public:
  void bytes(std::string_view s) { out_ += s; }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string_view what) : data_(data), what_(what) {}
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f32() {
    const float f = std::bit_cast<float>(u32());
    if (!std::isfinite(f)) throw Error(ErrorKind::Parse, std::string(what_) + ": non-finite value");
    return static_cast<double>(f);
  }
  void finish() const {
    if (pos_ != data_.size()) {
      throw Error(ErrorKind::Parse, std::string(what_) + ": trailing bytes");
    }
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorKind::Parse, std::string(what_) + ": truncated");
  }
  std::string_view data_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<PelletFrame> parse_pellet_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  require_header(t, kPelletHeader, "pellet CSV");
  std::vector<PelletFrame> frames;
  frames.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto num = [&](std::size_t c) {
      return parse_double(row[c], fmt::format("pellet CSV row {} column {}", r + 1, t.header[c]));
    };
    PelletFrame f;
    f.time = num(0);
    Point2* pts[] = {&f.ul, &f.ll, &f.t1, &f.t2, &f.t3, &f.t4};
    for (std::size_t k = 0; k < 6; ++k) *pts[k] = {num(1 + 2 * k), num(2 + 2 * k)};
    frames.push_back(f);
  }
  return frames;
}

std::string write_pellet_csv(const std::vector<PelletFrame>& frames) {
  CsvTable t;
  t.header = kPelletHeader;
  for (const auto& f : frames) {
    std::vector<std::string> row{format_double(f.time)};
    for (const Point2& p : {f.ul, f.ll, f.t1, f.t2, f.t3, f.t4}) {
      row.push_back(format_double(p.x));
      row.push_back(format_double(p.y));
    }
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

PalateTrace parse_palate_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  require_header(t, kPalateHeader, "palate CSV");
  std::vector<Point2> pts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    pts.push_back({parse_double(t.rows[r][0], fmt::format("palate CSV row {}", r + 1)),
                   parse_double(t.rows[r][1], fmt::format("palate CSV row {}", r + 1))});
  }
  return PalateTrace(std::move(pts));
}

std::string write_palate_csv(const PalateTrace& trace) {
  CsvTable t;
  t.header = kPalateHeader;
  for (const Point2& p : trace.points()) t.rows.push_back({format_double(p.x), format_double(p.y)});
  return write_csv(t);
}

TvSeries parse_tv_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  TvSeries out;
  std::vector<std::string> with_source = kTvOralHeader;
  with_source.insert(with_source.end(), kTvSourceColumns.begin(), kTvSourceColumns.end());
  if (t.header == with_source) {
    out.has_source = true;
  } else {
    require_header(t, kTvOralHeader, "tract-variable CSV");
  }
  out.matrix = TractVariableMatrix(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      const int ch = tv_channel_index(t.header[c]);
      out.matrix.at(static_cast<std::size_t>(ch), r) = parse_double(
          t.rows[r][c], fmt::format("tract-variable CSV row {} column {}", r + 1, t.header[c]));
    }
  }
  return out;
}

std::string write_tv_csv(const TractVariableMatrix& m, bool include_source) {
  CsvTable t;
  t.header = kTvOralHeader;
  if (include_source) t.header.insert(t.header.end(), kTvSourceColumns.begin(), kTvSourceColumns.end());
  std::vector<std::size_t> channels;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    channels.push_back(static_cast<std::size_t>(tv_channel_index(t.header[c])));
  }
  for (std::size_t j = 0; j < m.frames; ++j) {
    std::vector<std::string> row{format_double(static_cast<double>(j) / kTvSampleRate)};
    for (std::size_t ch : channels) row.push_back(format_double(m.at(ch, j)));
    t.rows.push_back(std::move(row));
  }
  return write_csv(t);
}

std::string encode_embedding(const EmbeddingTensor& emb) {
  Writer w;
  w.bytes("VTVE");
  w.u32(static_cast<std::uint32_t>(emb.layers));
  w.u32(static_cast<std::uint32_t>(emb.frames));
  w.u32(static_cast<std::uint32_t>(emb.dim));
  for (double v : emb.values) w.f32(v);
  return w.take();
}

EmbeddingTensor decode_embedding(std::string_view bytes) {
  Reader r(bytes, "embedding file");
  if (r.bytes(4) != "VTVE") throw Error(ErrorKind::Parse, "embedding file: bad magic");
  const std::size_t l = r.u32(), t = r.u32(), d = r.u32();
  if (r.remaining() != l * t * d * 4) {
    throw Error(ErrorKind::Parse, "embedding file: payload size does not match header");
  }
  EmbeddingTensor emb(l, t, d);
  for (double& v : emb.values) v = r.f32();
  r.finish();
  return emb;
}

EmbeddingTensor read_embedding(const std::filesystem::path& path) {
  return decode_embedding(read_text_file(path));
}

void write_embedding(const std::filesystem::path& path, const EmbeddingTensor& emb) {
  write_text_file(path, encode_embedding(emb));
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const auto& m = ckpt.model;
  Writer w;
  w.bytes("VTVM");
  w.u32(kCheckpointVersion);
  const std::size_t dims[] = {m.dims.layers, m.dims.conv_channels, m.dims.feature_dim,
                              m.dims.gru1,   m.dims.gru2,          m.dims.dense1,
                              m.dims.outputs};
  w.u32(static_cast<std::uint32_t>(std::size(dims)));
  for (std::size_t d : dims) w.u32(static_cast<std::uint32_t>(d));
  w.u64(m.params.size());
  for (double v : m.params) w.f32(v);
  w.u64(m.bn_running.size());
  for (double v : m.bn_running) w.f32(v);
  w.u64(m.seed);
  w.u32(static_cast<std::uint32_t>(ckpt.config_json.size()));
  w.bytes(ckpt.config_json);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes, "checkpoint");
  if (r.bytes(4) != "VTVM") throw Error(ErrorKind::Parse, "checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Parse, fmt::format("checkpoint: unsupported version {}", version));
  }
  if (r.u32() != 7) throw Error(ErrorKind::Parse, "checkpoint: unexpected dimension table");
  inversion::ModelDims d;
  d.layers = r.u32();
  d.conv_channels = r.u32();
  d.feature_dim = r.u32();
  d.gru1 = r.u32();
  d.gru2 = r.u32();
  d.dense1 = r.u32();
  d.outputs = r.u32();
  if (d.outputs != kTvChannelCount) throw Error(ErrorKind::Parse, "checkpoint: output count must be 9");
  Checkpoint ck;
  ck.model.dims = d;
  const inversion::ParamLayout lay(d);
  const std::uint64_t n = r.u64();
  if (n != lay.total) throw Error(ErrorKind::Parse, "checkpoint: parameter count mismatch");
  ck.model.params.resize(n);
  for (double& v : ck.model.params) v = r.f32();
  const std::uint64_t nb = r.u64();
  if (nb != 2 * d.conv_channels + 2) throw Error(ErrorKind::Parse, "checkpoint: buffer count mismatch");
  ck.model.bn_running.resize(nb);
  for (double& v : ck.model.bn_running) v = r.f32();
  ck.model.seed = r.u64();
  const std::uint32_t len = r.u32();
  ck.config_json = std::string(r.bytes(len));
  r.finish();
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_text_file(path));
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, encode_checkpoint(ckpt));
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir) {
  const CsvTable t = parse_csv(text);
  require_header(t, kManifestHeader, "manifest");
  std::vector<ManifestEntry> out;
  std::map<std::string, Split> speaker_split;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ManifestEntry e;
    e.embedding = base_dir / row[0];
    e.target = base_dir / row[1];
    e.speaker_id = row[2];
    if (row[3] == "train") {
      e.split = Split::Train;
    } else if (row[3] == "val") {
      e.split = Split::Val;
    } else if (row[3] == "test") {
      e.split = Split::Test;
    } else {
      throw Error(ErrorKind::Parse, fmt::format("manifest row {}: unknown split '{}'", r + 1, row[3]));
    }
    const auto [it, inserted] = speaker_split.emplace(e.speaker_id, e.split);
    if (!inserted && it->second != e.split) {
      throw Error(ErrorKind::Validation,
                  fmt::format("speaker '{}' appears in both {} and {} splits", e.speaker_id,
                              to_string(it->second), to_string(e.split)));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path());
}

std::string write_manifest(const std::vector<ManifestEntry>& entries) {
  CsvTable t;
  t.header = kManifestHeader;
  for (const auto& e : entries) {
    t.rows.push_back({e.embedding.generic_string(), e.target.generic_string(), e.speaker_id,
                      std::string(to_string(e.split))});
  }
  return write_csv(t);
}

}  // namespace vtv::io
