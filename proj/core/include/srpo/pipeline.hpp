#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srpo/dataset.hpp"
#include "srpo/rng.hpp"
#include "srpo/world.hpp"

namespace srpo {

enum class Stage : std::uint8_t { queried, reasoned, reflected, checked, summarized };

std::string stage_to_string(Stage s);

// Intermediate artifact flowing through the five-stage construction
// protocol. Stage transitions are monotone; a rejected record carries its
// reason and advances no further.
struct CandidateRecord {
  std::string id;
  std::vector<Fact> facts;
  Instruction instruction;
  Stage stage = Stage::queried;
  std::optional<std::string> rejection_reason;
};

struct PipelineConfig {
  // Imperfection rates of the query stage. Redundancy and missing facts are
  // repaired by reflection; unknown entities and deny tokens are discarded
  // by the check stage. At most one imperfection per candidate.
  double redundancy_rate = 0.15;
  double missing_fact_rate = 0.15;
  double unknown_entity_rate = 0.05;
  double deny_token_rate = 0.0;
  std::vector<std::string> deny_list;  // default: the FLAG-bypass markers

  static PipelineConfig defaults();
  void validate() const;
};

// Markers whose presence makes an instruction unimodally unsafe.
extern const std::vector<std::string> kFlagBypassMarkers;

// Emits a candidate whose facts and instruction are individually benign;
// the combination is hazardous with the world's configured ratio.
CandidateRecord query_stage(Rng& rng, const WorldConfig& world, const PipelineConfig& cfg, std::string id);

// Attaches the canonical reasoning path for the candidate as it stands;
// stage queried -> reasoned. For candidates still missing a mixed fact the
// path is provisional and is recomputed when reflection repairs them.
ReasoningPath reasoning_stage(CandidateRecord& c, const WorldConfig& world);

struct ReflectionOutcome {
  int redundancy_stripped = 0;
  int facts_supplemented = 0;
};

// Strips instruction content duplicating the facts and supplements a mixed
// in-world entity missing from them; idempotent. Repairs recompute `path`.
ReflectionOutcome reflect_stage(CandidateRecord& c, ReasoningPath& path, const WorldConfig& world);

// Number of restated instruction entries duplicating a fact exactly.
int redundancy_scan(const CandidateRecord& c);
// Mixed in-world entities absent from the facts.
std::vector<int> completeness_scan(const CandidateRecord& c, const WorldConfig& world);

// Accept (nullopt, stage -> checked) or reject with a reason:
// "unimodal-unsafe" for deny-list tokens, "invalid" for unknown entities.
std::optional<std::string> check_stage(CandidateRecord& c, const WorldConfig& world, const PipelineConfig& cfg);

// Assembles the Tag record; errors if the path fails verification against
// the ground-truth answer (pipeline integrity breach).
TagRecord summary_stage(const CandidateRecord& c, const ReasoningPath& path, const WorldConfig& world);

struct PipelineReport {
  std::uint64_t queried = 0;
  std::uint64_t reasoned = 0;
  std::uint64_t reflected = 0;
  std::uint64_t checked = 0;
  std::uint64_t summarized = 0;
  std::map<std::string, std::uint64_t> rejections;
  std::uint64_t redundancy_stripped = 0;
  std::uint64_t facts_supplemented = 0;

  std::uint64_t rejected_total() const;
  double yield() const;  // summarized / queried

  std::string to_json_text() const;
  static PipelineReport from_json_text(const std::string& text);
};

// Runs candidates through all stages until n records are accepted; writes
// the dataset file. Pure function of (seed, n, config): two runs with the
// same arguments produce byte-identical files.
PipelineReport run_pipeline(int n, std::uint64_t seed, const WorldConfig& world, const PipelineConfig& cfg,
                            const std::filesystem::path& dataset_out);

}  // namespace srpo
