#include "vtv/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "vtv/error.hpp"
#include "vtv/extract.hpp"
#include "vtv/inversion/evaluate.hpp"
#include "vtv/inversion/train.hpp"
#include "vtv/io/csv.hpp"
#include "vtv/io/formats.hpp"
#include "vtv/kinematics.hpp"
#include "vtv/random.hpp"
#include "vtv/ratings.hpp"
#include "vtv/segments.hpp"
#include "vtv/service/rating_service.hpp"
#include "vtv/stats/analysis.hpp"
#include "vtv/synthdata.hpp"

namespace vtv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 13> kPathNames{
    "pellets", "palate", "manifest", "embedding", "checkpoint", "alignment", "ratings",
    "files",   "observations", "pool", "training-key", "log", "input"};

std::string env_name(std::string_view key) {
  std::string out = "VTV_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::string> env(std::string_view key) {
  const char* v = std::getenv(env_name(key).c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Layered settings: config file < environment < flags.
class Settings {
 public:
  json config = json::object();
  fs::path config_dir = ".";
  std::map<std::string, std::string> flags;
  std::vector<std::string> inputs;  // repeated --input

  std::optional<std::string> value(std::string_view key) const {
    if (const auto it = flags.find(std::string(key)); it != flags.end()) return it->second;
    if (auto e = env(key)) return e;
    const std::string k(key);
    if (config.contains(k) && !config[k].is_null()) {
      const json& v = config[k];
      return v.is_string() ? v.get<std::string>() : v.dump();
    }
    return std::nullopt;
  }

  std::optional<fs::path> path(std::string_view key) const {
    const std::string k(key);
    if (const auto it = flags.find(k); it != flags.end()) return fs::path(it->second);
    if (auto e = env(key)) return fs::path(*e);
    if (config.contains("paths") && config["paths"].contains(k)) {
      const fs::path p = config["paths"][k].get<std::string>();
      return p.is_absolute() ? p : config_dir / p;
    }
    return std::nullopt;
  }

  fs::path require_input(std::string_view key) const {
    const auto p = path(key);
    if (!p) throw Error(ErrorKind::Config, fmt::format("--{} is required", key));
    if (!fs::exists(*p)) throw Error(ErrorKind::Io, fmt::format("input file {} does not exist", p->string()));
    return *p;
  }

  std::uint64_t seed() const {
    const auto v = value("seed");
    if (!v) return 0;
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return s;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "seed must be an unsigned integer, got '" + *v + "'");
    }
  }

  fs::path out() const {
    if (const auto v = flags.find("out"); v != flags.end()) return v->second;
    if (auto e = env("out")) return *e;
    if (config.contains("out")) {
      const fs::path p = config["out"].get<std::string>();
      return p.is_absolute() ? p : config_dir / p;
    }
    return "out";
  }

  std::string format() const {
    const std::string f = value("format").value_or("csv");
    if (f != "csv" && f != "json") throw Error(ErrorKind::Config, "format must be csv or json");
    return f;
  }

  Target target() const {
    const auto v = value("target");
    if (!v) throw Error(ErrorKind::Config, "--target is required");
    return parse_target(*v);
  }

  json section(const std::string& name) const {
    return config.contains(name) ? config[name] : json::object();
  }
};

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, fmt::format("config key '{}' has the wrong type", key));
  }
}

// CSV text as JSON records; numeric-looking fields become numbers, empty
// fields null.
std::string csv_as_json(const std::string& csv) {
  const io::CsvTable t = io::parse_csv(csv);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json rec;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const std::string& v = row[c];
      if (v.empty()) {
        rec[t.header[c]] = nullptr;
        continue;
      }
      const bool integral = v.find_first_not_of("-0123456789") == std::string::npos;
      try {
        if (integral) {
          rec[t.header[c]] = io::parse_int(v, "");
          continue;
        }
        rec[t.header[c]] = io::parse_double(v, "");
      } catch (const Error&) {
        rec[t.header[c]] = v;
      }
    }
    arr.push_back(rec);
  }
  return arr.dump(2) + "\n";
}

struct Writer {
  fs::path dir;
  std::string format;
  std::ostream* log;

  // Writes a CSV report, or its JSON form when --format json.
  fs::path table(const std::string& stem, const std::string& csv) const {
    const bool as_json = format == "json";
    const fs::path p = dir / (stem + (as_json ? ".json" : ".csv"));
    io::write_text_file(p, as_json ? csv_as_json(csv) : csv);
    *log << p.string() << '\n';
    return p;
  }
  fs::path raw(const fs::path& rel, std::string_view text) const {
    const fs::path p = dir / rel;
    io::write_text_file(p, text);
    *log << p.string() << '\n';
    return p;
  }
};

PalateShape parse_shape(const std::string& s) {
  if (s == "flat") return PalateShape::Flat;
  if (s == "circular-arc") return PalateShape::CircularArc;
  if (s == "spline-like") return PalateShape::SplineLike;
  throw Error(ErrorKind::Config, "palate_shape must be flat, circular-arc or spline-like");
}

// ---- subcommands ----------------------------------------------------------

void cmd_synth(const Settings& st, const Writer& w) {
  const json cfg = st.section("synth");
  const std::uint64_t seed = st.seed();

  SynthSpec geo;
  geo.seed = seed;
  geo.n_frames = get_or<std::size_t>(cfg, "n_frames", 200);
  geo.palate_shape = parse_shape(get_or<std::string>(cfg, "palate_shape", "spline-like"));
  geo.noise_sd = get_or<double>(cfg, "noise_sd", 1.0);
  w.raw("articulography/palate.csv", io::write_palate_csv(generate_palate_trace(geo)));
  w.raw("articulography/pellets.csv", io::write_pellet_csv(generate_pellet_sequence(geo).frames));

  // Inversion corpus: one utterance per speaker, speaker-disjoint splits.
  const std::size_t utterances = get_or<std::size_t>(cfg, "utterances", 10);
  if (utterances < 3) throw Error(ErrorKind::Config, "synth.utterances must be >= 3");
  std::vector<io::ManifestEntry> manifest;
  for (std::size_t u = 0; u < utterances; ++u) {
    SynthSpec s;
    s.seed = mix_seed(seed, 100 + u);
    s.n_frames = get_or<std::size_t>(cfg, "utterance_frames", 50);
    s.embedding_dim = get_or<std::size_t>(cfg, "embedding_dim", 32);
    s.mapping_seed = mix_seed(seed, 99);
    const auto [emb, target] = synth_training_pair(s);
    const std::string stem = fmt::format("utt{:03}", u + 1);
    const fs::path dir = w.dir / "inversion";
    io::write_embedding(dir / (stem + ".vtve"), emb);
    io::write_text_file(dir / (stem + ".csv"), io::write_tv_csv(target, true));
    const io::Split split = u < utterances - 2 ? io::Split::Train
                                               : (u == utterances - 2 ? io::Split::Val : io::Split::Test);
    manifest.push_back({stem + ".vtve", stem + ".csv", fmt::format("spk{:03}", u + 1), split});
  }
  w.raw("inversion/manifest.csv", io::write_manifest(manifest));

  // Clinical corpus.
  const json cc = cfg.contains("clinical") ? cfg["clinical"] : json::object();
  ClinicalSpec spec;
  spec.seed = seed;
  spec.speakers = get_or<std::size_t>(cc, "speakers", spec.speakers);
  spec.correct_per_speaker = get_or<std::size_t>(cc, "correct_per_speaker", spec.correct_per_speaker);
  spec.control_per_speaker = get_or<std::size_t>(cc, "control_per_speaker", spec.control_per_speaker);
  spec.error_per_speaker = get_or<std::size_t>(cc, "error_per_speaker", spec.error_per_speaker);
  spec.delta = get_or<double>(cc, "delta", spec.delta);
  const ClinicalCorpus corpus = synth_clinical_corpus(spec);
  std::vector<FileRecord> files;
  std::vector<service::PoolEntry> pool;
  std::set<std::string> rated;
  for (const auto& r : corpus.ratings) rated.insert(r.file_id);
  for (const auto& f : corpus.files) {
    const std::string rel = "tv/" + f.file_id + ".csv";
    io::write_text_file(w.dir / "clinical" / rel, io::write_tv_csv(f.tv, true));
    files.push_back({f.file_id, f.speaker_id, f.utterance_id, rel});
    if (rated.contains(f.file_id)) {
      const auto fam = stats::phone_family(f.phone);
      pool.push_back({fam.value_or(Target::R),
                      {f.file_id, f.word, "audio/" + f.file_id + ".wav", f.speaker_id, f.timepoint}});
    }
  }
  w.raw("clinical/files.csv", write_files_csv(files));
  w.raw("clinical/alignment.csv", write_alignment(corpus.alignment));
  w.raw("clinical/ratings.csv", write_ratings(corpus.ratings));
  w.raw("clinical/pool.csv", service::write_pool_csv(pool));

  // Training-module answer key.
  Rng rng(mix_seed(seed, 500));
  std::vector<service::TrainingItem> key;
  const std::size_t per_target = get_or<std::size_t>(cfg, "training_items", 60);
  for (Target t : {Target::R, Target::S}) {
    for (std::size_t i = 0; i < per_target; ++i) {
      const std::string id = fmt::format("train_{}_{:03}", to_string(t), i + 1);
      key.push_back({t, id, t == Target::R ? "rabbit" : "sock", "audio/" + id + ".wav",
                     1 + static_cast<int>(rng.index(5))});
    }
  }
  w.raw("clinical/training_key.csv", service::write_training_key(key));
}

void cmd_tv_compute(const Settings& st, const Writer& w) {
  const auto frames = io::parse_pellet_csv(io::read_text_file(st.require_input("pellets")));
  const PalateTrace trace = io::parse_palate_csv(io::read_text_file(st.require_input("palate")));
  const std::string orient = st.value("orientation").value_or("articulatory");
  if (orient != "raw" && orient != "articulatory") {
    throw Error(ErrorKind::Config, "orientation must be raw or articulatory");
  }
  TractVariableMatrix m(frames.size());
  for (std::size_t j = 0; j < frames.size(); ++j) {
    TractVariableFrame f = compute_tract_variables(frames[j], trace);
    if (orient == "articulatory") f = orient_articulatory(f);
    for (std::size_t c = 0; c < kOralChannelCount; ++c) m.at(c, j) = f.values[c];
  }
  w.table("tv", io::write_tv_csv(m, false));
}

void cmd_normalize(const Settings& st, const Writer& w) {
  std::vector<fs::path> inputs;
  for (const auto& s : st.inputs) inputs.emplace_back(s);
  if (inputs.empty()) {
    if (auto p = st.path("input")) inputs.push_back(*p);
  }
  if (inputs.empty()) throw Error(ErrorKind::Config, "--input is required (one per utterance)");
  std::vector<io::TvSeries> series;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw Error(ErrorKind::Io, "input file " + p.string() + " does not exist");
    series.push_back(io::parse_tv_csv(io::read_text_file(p)));
  }
  const bool source = std::all_of(series.begin(), series.end(), [](const auto& s) { return s.has_source; });
  const std::size_t channels = source ? kTvChannelCount : kOralChannelCount;
  std::vector<std::vector<double>> values(channels);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < channels; ++c) {
    names.emplace_back(kTvChannelNames[c]);
    for (const auto& s : series) {
      const auto ch = s.matrix.channel(c);
      values[c].insert(values[c].end(), ch.begin(), ch.end());
    }
  }
  const SpeakerRange range = fit_speaker_range(values, names);
  nlohmann::ordered_json rj;
  for (std::size_t c = 0; c < channels; ++c) {
    rj[names[c]] = {{"min", range.ranges[c].min}, {"max", range.ranges[c].max}};
  }
  w.raw("speaker_range.json", rj.dump(2) + "\n");
  for (std::size_t i = 0; i < series.size(); ++i) {
    TractVariableMatrix m = series[i].matrix;
    for (std::size_t c = 0; c < channels; ++c) {
      for (double& v : m.channel(c)) v = normalize(v, range.ranges[c]);
    }
    w.raw(fs::path("normalized") / inputs[i].filename(), io::write_tv_csv(m, source));
  }
}

std::vector<inversion::Sample> load_split(const std::vector<io::ManifestEntry>& entries, io::Split split) {
  std::vector<inversion::Sample> out;
  for (const auto& e : entries) {
    if (e.split != split) continue;
    inversion::Sample s;
    s.embedding = io::read_embedding(e.embedding);
    s.target = io::parse_tv_csv(io::read_text_file(e.target)).matrix;
    if (s.target.frames != 2 * s.embedding.frames) {
      throw Error(ErrorKind::Shape, fmt::format("{}: target has {} samples for {} embedding frames",
                                                e.target.string(), s.target.frames, s.embedding.frames));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void cmd_train(const Settings& st, const Writer& w) {
  const auto entries = io::read_manifest(st.require_input("manifest"));
  const auto train_set = load_split(entries, io::Split::Train);
  const auto val_set = load_split(entries, io::Split::Val);
  if (train_set.empty() || val_set.empty()) {
    throw Error(ErrorKind::EmptyInput, "manifest needs train and val entries");
  }
  const json tc = st.section("train");
  inversion::TrainConfig cfg;
  cfg.learning_rate = get_or<double>(tc, "learning_rate", cfg.learning_rate);
  cfg.batch_size = get_or<std::size_t>(tc, "batch_size", cfg.batch_size);
  cfg.patience_epochs = get_or<std::size_t>(tc, "patience_epochs", cfg.patience_epochs);
  cfg.alpha = get_or<double>(tc, "alpha", cfg.alpha);
  cfg.max_epochs = get_or<std::size_t>(tc, "max_epochs", cfg.max_epochs);
  if (auto v = st.value("max-epochs")) cfg.max_epochs = static_cast<std::size_t>(io::parse_int(*v, "max-epochs"));
  cfg.plateau_factor = get_or<double>(tc, "plateau_factor", cfg.plateau_factor);
  cfg.plateau_patience = get_or<std::size_t>(tc, "plateau_patience", cfg.plateau_patience);
  cfg.dropout = get_or<bool>(tc, "dropout", cfg.dropout);
  cfg.seed = st.seed();
  cfg.validate();

  const json mc = st.section("model");
  inversion::ModelDims dims;
  dims.feature_dim = train_set.front().embedding.dim;
  dims.conv_channels = get_or<std::size_t>(mc, "conv_channels", dims.conv_channels);
  dims.gru1 = get_or<std::size_t>(mc, "gru1", dims.gru1);
  dims.gru2 = get_or<std::size_t>(mc, "gru2", dims.gru2);
  dims.dense1 = get_or<std::size_t>(mc, "dense1", dims.dense1);
  inversion::InversionModel model(dims, cfg.seed);

  const auto result = inversion::train(std::move(model), train_set, val_set, cfg);
  nlohmann::ordered_json echo{{"learning_rate", cfg.learning_rate},
                              {"batch_size", cfg.batch_size},
                              {"patience_epochs", cfg.patience_epochs},
                              {"alpha", cfg.alpha},
                              {"max_epochs", cfg.max_epochs},
                              {"seed", cfg.seed},
                              {"plateau_factor", cfg.plateau_factor},
                              {"plateau_patience", cfg.plateau_patience},
                              {"dropout", cfg.dropout},
                              {"best_epoch", result.best_epoch}};
  const fs::path ck = w.dir / "model.vtvm";
  io::write_checkpoint(ck, {result.model, echo.dump()});
  *w.log << ck.string() << '\n';
  io::CsvTable hist;
  hist.header = {"epoch", "train_loss", "val_loss", "learning_rate"};
  for (const auto& h : result.history) {
    hist.rows.push_back({std::to_string(h.epoch), io::format_double(h.train_loss),
                         io::format_double(h.val_loss), io::format_double(h.learning_rate)});
  }
  w.table("history", io::write_csv(hist));
}

void cmd_infer(const Settings& st, const Writer& w) {
  const io::Checkpoint ck = io::read_checkpoint(st.require_input("checkpoint"));
  if (st.path("embedding")) {
    const fs::path p = st.require_input("embedding");
    const auto pred = inversion::forward(ck.model, io::read_embedding(p));
    w.raw(fs::path("predictions") / (p.stem().string() + ".csv"), io::write_tv_csv(pred, true));
    return;
  }
  const auto entries = io::read_manifest(st.require_input("manifest"));
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (e.split != io::Split::Test) continue;
    const auto pred = inversion::forward(ck.model, io::read_embedding(e.embedding));
    w.raw(fs::path("predictions") / (e.embedding.stem().string() + ".csv"), io::write_tv_csv(pred, true));
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::EmptyInput, "manifest has no test entries");
}

std::vector<ConsensusLabel> labels_from(const Settings& st, const fs::path& ratings_path) {
  ConsensusOptions opt;
  const json th = st.section("thresholds");
  opt.strict_majority = get_or<bool>(th, "strict_majority", true);
  return consensus_all(parse_ratings(io::read_text_file(ratings_path)), opt);
}

void cmd_consensus(const Settings& st, const Writer& w) {
  w.table("consensus", write_consensus(labels_from(st, st.require_input("ratings"))));
}

void cmd_extract(const Settings& st, const Writer& w) {
  const fs::path files_path = st.require_input("files");
  const auto files = parse_files_csv(io::read_text_file(files_path));
  const auto alignment = parse_alignment(io::read_text_file(st.require_input("alignment")));
  const auto labels = labels_from(st, st.require_input("ratings"));
  std::map<std::string, TractVariableMatrix> matrices;
  for (const auto& f : files) {
    const fs::path p = files_path.parent_path() / f.tv_csv;
    if (!fs::exists(p)) throw Error(ErrorKind::Io, "tract-variable file " + p.string() + " does not exist");
    matrices[f.file_id] = io::parse_tv_csv(io::read_text_file(p)).matrix;
  }
  ExtractOptions opt;
  const json th = st.section("thresholds");
  opt.min_group_size = get_or<std::size_t>(th, "min_count", kMinGroupSize);
  if (opt.min_group_size < 1) throw Error(ErrorKind::Config, "thresholds.min_count must be positive");
  const ExtractResult r = extract_observations(files, matrices, alignment, labels, opt);
  w.table("consensus", write_consensus(labels));
  w.table("observations", write_observations(r.observations));
  io::CsvTable groups;
  groups.header = {"group", "count", "retained"};
  for (const auto& [g, n] : r.group_counts) {
    const bool dropped = std::count(r.dropped_groups.begin(), r.dropped_groups.end(), g) > 0;
    groups.rows.push_back({g, std::to_string(n), dropped ? "no" : "yes"});
  }
  w.table("groups", io::write_csv(groups));
}

void cmd_analyze_categorical(const Settings& st, const Writer& w) {
  const auto obs = parse_observations(io::read_text_file(st.require_input("observations")));
  const Target t = st.target();
  stats::CategoricalOptions opt;
  opt.alpha = get_or<double>(st.section("thresholds"), "bh_alpha", 0.05);
  const auto rep = stats::analyze_categorical(obs, t, opt);
  w.table(fmt::format("contrasts_{}", to_string(t)), stats::write_contrasts(rep.contrasts));
}

void cmd_analyze_gradient(const Settings& st, const Writer& w) {
  const auto obs = parse_observations(io::read_text_file(st.require_input("observations")));
  const auto rep = stats::analyze_gradient(obs);
  w.table("coefficients", stats::write_coefficients(rep.coefficients));
  w.table("msd", stats::write_msd_rows(rep.rows));
}

void cmd_report(const Settings& st, const Writer& w) {
  bool any = false;
  if (st.path("checkpoint") && st.path("manifest")) {
    const io::Checkpoint ck = io::read_checkpoint(st.require_input("checkpoint"));
    const auto test = load_split(io::read_manifest(st.require_input("manifest")), io::Split::Test);
    if (test.empty()) throw Error(ErrorKind::EmptyInput, "manifest has no test entries");
    const auto report = inversion::evaluate(ck.model, test);
    w.table("eval_table", inversion::format_eval_csv(report, "model", true));
    any = true;
  }
  if (st.path("observations")) {
    const auto obs = parse_observations(io::read_text_file(st.require_input("observations")));
    w.raw("ellipses.json", stats::write_ellipses_json(stats::phone_ellipses(obs)));
    any = true;
  }
  if (!any) throw Error(ErrorKind::Config, "report needs --checkpoint with --manifest, or --observations");
}

void cmd_serve(const Settings& st, const Writer& w, std::ostream& out) {
  service::ServiceConfig cfg;
  cfg.pool = service::parse_pool_csv(io::read_text_file(st.require_input("pool")));
  cfg.training = service::parse_training_key(io::read_text_file(st.require_input("training-key")));
  cfg.seed = st.seed();
  cfg.log_path = st.path("log").value_or(w.dir / "ratings_log.jsonl");
  fs::create_directories(cfg.log_path->parent_path().empty() ? fs::path(".") : cfg.log_path->parent_path());
  const json sc = st.section("serve");
  const std::string host = st.value("host").value_or(get_or<std::string>(sc, "host", "127.0.0.1"));
  const int port = static_cast<int>(io::parse_int(
      st.value("port").value_or(std::to_string(get_or<int>(sc, "port", 8080))), "port"));
  service::RatingService svc(std::move(cfg));
  service::HttpServer server(svc);
  const int bound = server.bind(host, port);
  out << fmt::format("listening on {}:{}", host, bound) << std::endl;
  server.listen();
}

void print_error(std::ostream& err, std::string_view kind, std::string_view message) {
  err << json{{"kind", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Articulatory inversion and perceptual-rating workbench"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Settings st;
  std::string config_path, seed, target, out_dir, format, orientation, host, port, max_epochs;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "Base seed (u64)");
  app.add_option("--target", target, "Target phoneme: r or s");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--format", format, "Report format: csv or json");
  std::map<std::string, std::string> path_flags;
  for (std::string_view name : kPathNames) {
    if (name == "input") continue;
    app.add_option(fmt::format("--{}", name), path_flags[std::string(name)], fmt::format("{} path", name));
  }
  app.add_option("--input", st.inputs, "Input tract-variable CSV (repeatable)");
  app.add_option("--orientation", orientation, "raw or articulatory");
  app.add_option("--host", host, "Bind address for serve");
  app.add_option("--port", port, "Port for serve (0 picks a free port)");
  app.add_option("--max-epochs", max_epochs, "Training epoch limit");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "Write synthetic articulography, inversion and clinical fixtures"},
      {"tv-compute", "Pellets and palate trace to tract variables"},
      {"normalize", "Speaker min-max normalization of tract-variable CSVs"},
      {"train", "Train the inversion network from a manifest"},
      {"infer", "Predict tract variables from embeddings"},
      {"extract", "Consensus labels and phone observations"},
      {"consensus", "Per-file consensus from ratings"},
      {"analyze-categorical", "Signed contrasts for one target phoneme"},
      {"analyze-gradient", "Rating-score model on articulatory distances"},
      {"report", "Correlation table and ellipse plot data"},
      {"serve", "Run the rating HTTP service"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "config", e.what());
    return 2;
  }

  try {
    if (config_path.empty()) {
      if (auto e = env("config")) config_path = *e;
    }
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw Error(ErrorKind::Io, "config file " + config_path + " does not exist");
      try {
        st.config = json::parse(io::read_text_file(config_path));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("malformed config: ") + e.what());
      }
      if (!st.config.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
      st.config_dir = fs::path(config_path).parent_path();
      if (st.config_dir.empty()) st.config_dir = ".";
    }
    const std::pair<const char*, std::string*> scalars[] = {
        {"seed", &seed}, {"target", &target}, {"out", &out_dir}, {"format", &format},
        {"orientation", &orientation}, {"host", &host}, {"port", &port}, {"max-epochs", &max_epochs}};
    for (const auto& [k, v] : scalars) {
      if (!v->empty()) st.flags[k] = *v;
    }
    for (const auto& [k, v] : path_flags) {
      if (!v.empty()) st.flags[k] = v;
    }

    const Writer w{st.out(), st.format(), &out};
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") cmd_synth(st, w);
    else if (cmd == "tv-compute") cmd_tv_compute(st, w);
    else if (cmd == "normalize") cmd_normalize(st, w);
    else if (cmd == "train") cmd_train(st, w);
    else if (cmd == "infer") cmd_infer(st, w);
    else if (cmd == "extract") cmd_extract(st, w);
    else if (cmd == "consensus") cmd_consensus(st, w);
    else if (cmd == "analyze-categorical") cmd_analyze_categorical(st, w);
    else if (cmd == "analyze-gradient") cmd_analyze_gradient(st, w);
    else if (cmd == "report") cmd_report(st, w);
    else cmd_serve(st, w, out);
    return 0;
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "io", e.what());
    return 1;
  }
}

}  // namespace vtv::cli
