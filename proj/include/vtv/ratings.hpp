#pragma once

// Clinician rating records, per-file consensus, subtype group filtering,
// training-module scoring and progression, and masked rating batches.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vtv {

enum class Target { R, S };
std::string_view to_string(Target t) noexcept;
Target parse_target(std::string_view text);  // "r" or "s"

// Allowed subtype labels for a target, in display order.
std::span<const std::string_view> subtype_labels(Target t) noexcept;
inline constexpr std::string_view kOmitted = "omitted";

enum class RatingFlag { JunkAudio, PartialAudio, TranscriptMismatch };
std::string_view to_string(RatingFlag f) noexcept;
RatingFlag parse_flag(std::string_view text);

inline constexpr int kMaxReplays = 5;

struct RatingRecord {
  std::string rater_id;
  std::string file_id;
  int score = 0;
  std::optional<std::string> subtype;
  std::set<RatingFlag> flags;
  bool lengthened = false;
  std::string comment;
  int replay_count = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

// Throws Error(Validation): score outside 1..5, score 1 without subtype,
// subtype on a 4 or 5, replay count outside 0..5, or (when a target is
// given) a subtype not listed for it.
void validate_rating(const RatingRecord& r, std::optional<Target> target = std::nullopt);

// Keeps the last record of each (rater, file) in input order.
std::vector<RatingRecord> latest_per_rater(std::span<const RatingRecord> records);

enum class Outcome { CorrectUnanimous, ErrorSubtype, Excluded };
enum class ExclusionReason { Flagged, Omission, NoConsensus };

struct ConsensusLabel {
  std::string file_id;
  Outcome outcome = Outcome::Excluded;
  std::string subtype;  // ErrorSubtype only
  ExclusionReason reason = ExclusionReason::NoConsensus;  // Excluded only
  std::optional<double> mean_score;  // over non-flagged ratings
  std::size_t n_raters = 0;

  friend bool operator==(const ConsensusLabel&, const ConsensusLabel&) = default;
};

struct ConsensusOptions {
  bool strict_majority = true;  // false: at least half of the raters
};

// Ratings of one file (superseded records are dropped first). Rules in order:
// any flag; any omitted subtype; all scores 5; mean < 5 with one subtype
// chosen by >= 2 raters forming a majority of all raters; otherwise excluded.
ConsensusLabel consensus(std::span<const RatingRecord> ratings,
                         const ConsensusOptions& options = {});

// Groups by file_id and labels each file, sorted by file_id.
std::vector<ConsensusLabel> consensus_all(std::span<const RatingRecord> ratings,
                                          const ConsensusOptions& options = {});

struct GroupFilterResult {
  std::vector<ConsensusLabel> labels;  // input minus the dropped subtype groups
  std::map<std::string, std::size_t> counts;  // every ErrorSubtype group
  std::set<std::string> dropped;
};

inline constexpr std::size_t kMinGroupSize = 15;

GroupFilterResult filter_min_count(std::span<const ConsensusLabel> labels,
                                   std::size_t threshold = kMinGroupSize);

struct ModuleResult {
  int module_id = 0;
  std::size_t item_count = 0;
  double binary_agreement_pct = 0.0;
  double within_one_pct = 0.0;
  bool passed = false;
};

inline constexpr int kMaintenanceModule = 5;
inline constexpr std::size_t kBatchesPerMaintenance = 20;
std::size_t module_item_count(int module_id);

// Binary agreement collapses 1-3 and 4-5; within-one is |rater - expert| <= 1.
// Pass requires both at >= 90 %.
ModuleResult score_module(std::span<const int> rater, std::span<const int> expert,
                          int module_id = 1);

struct TrainingState {
  int module_id = 1;  // 1..4 while training; kMaintenanceModule afterwards
  bool certified = false;
  std::size_t batches_completed = 0;  // since certification or last maintenance
  bool maintenance_due = false;

  friend bool operator==(const TrainingState&, const TrainingState&) = default;
};

TrainingState advance_training(const TrainingState& state, const ModuleResult& result);
TrainingState record_batch_completed(const TrainingState& state);

struct PoolFile {
  std::string file_id;
  std::string word;
  std::string audio_ref;
  std::string speaker_id;
  std::string timepoint;
};

// Masked view of a pool file: no speaker or timepoint.
struct BatchItem {
  std::string file_id;
  std::string word;
  std::string audio_ref;

  friend bool operator==(const BatchItem&, const BatchItem&) = default;
};

inline constexpr std::size_t kBatchSize = 100;

// Seeded shuffle of the pool, partitioned into batches of `size`.
std::vector<std::vector<BatchItem>> make_batches(std::span<const PoolFile> pool,
                                                 std::size_t size, std::uint64_t seed);
std::vector<BatchItem> make_batch(std::span<const PoolFile> pool, std::size_t size,
                                  std::uint64_t seed);

// `file_id,rater_id,score,subtype,flags,lengthened,comment,replay_count`;
// flags are ';'-separated, lengthened is 0/1.
std::vector<RatingRecord> parse_ratings(std::string_view text);
std::string write_ratings(std::span<const RatingRecord> records);
std::string ratings_csv_header();

// `file_id,outcome,subtype,mean_score,n_raters`. Outcomes are
// `correct`, `error` and `excluded`; for exclusions the subtype column
// carries the reason.
std::string write_consensus(std::span<const ConsensusLabel> labels);
std::vector<ConsensusLabel> parse_consensus(std::string_view text);
std::string_view to_string(ExclusionReason r) noexcept;

}  // namespace vtv
