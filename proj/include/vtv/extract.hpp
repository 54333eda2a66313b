#pragma once

// Joins per-file tract-variable series, phone alignments and consensus labels
// into phone observations for the statistical models.

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtv/ratings.hpp"
#include "vtv/segments.hpp"
#include "vtv/tensors.hpp"

namespace vtv {

struct FileRecord {
  std::string file_id;
  std::string speaker_id;
  std::string utterance_id;
  std::string tv_csv;  // relative to the files CSV

  friend bool operator==(const FileRecord&, const FileRecord&) = default;
};

// `file_id,speaker_id,utterance_id,tv_csv`; file ids must be unique.
std::vector<FileRecord> parse_files_csv(std::string_view text);
std::string write_files_csv(std::span<const FileRecord> files);

struct ExtractOptions {
  std::size_t min_group_size = kMinGroupSize;
  bool keep_source = true;
};

struct ExtractResult {
  std::vector<PhoneObservation> observations;  // file order, then time
  std::map<std::string, std::size_t> group_counts;  // "<target>:<subtype>"
  std::vector<std::string> dropped_groups;          // "<target>:<subtype>"
  std::size_t excluded = 0;  // target phones of excluded or unrated files
  std::size_t dropped = 0;   // target phones of files in dropped groups
};

// Target intervals (r, s) take the file's consensus label: unanimous correct
// keeps the target label, an agreed subtype becomes its error label, and
// everything else is skipped. Error groups below `min_group_size` are
// counted per target and skipped. Control intervals keep their label with no
// score; other phones are ignored.
ExtractResult extract_observations(std::span<const FileRecord> files,
                                   const std::map<std::string, TractVariableMatrix>& matrices,
                                   std::span<const PhoneInterval> alignment,
                                   std::span<const ConsensusLabel> labels,
                                   const ExtractOptions& options = {});

}  // namespace vtv
