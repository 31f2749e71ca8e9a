#pragma once

#include <filesystem>
#include <vector>

#include "srpo/path.hpp"
#include "srpo/world.hpp"

namespace srpo {

// One formatted dataset entry: a question, its reasoning chain and answer.
struct TagRecord {
  Question question;
  ReasoningPath reasoning;
  Answer answer;
};

struct Dataset {
  WorldConfig world;
  std::vector<TagRecord> records;

  std::size_t size() const { return records.size(); }
  const TagRecord* find(const std::string& question_id) const;
};

// Line-delimited records headed by a schema-version line; the header also
// embeds the world config so files are self-describing.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Validates the schema version and re-verifies every reference path against
// its stored answer.
Dataset load_dataset(const std::filesystem::path& path);

// Deterministic index split: the leading (1 - holdout_fraction) of records
// train, the tail is held out.
struct DatasetSplit {
  Dataset train;
  Dataset holdout;
};
DatasetSplit split_dataset(const Dataset& ds, double holdout_fraction);

// Subset of records whose question is cross-modally hazardous.
Dataset hazardous_subset(const Dataset& ds);

}  // namespace srpo
