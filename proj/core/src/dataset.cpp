#include "srpo/dataset.hpp"

#include <sstream>

#include "json_io.hpp"
#include "srpo/errors.hpp"
#include "srpo/io.hpp"
#include "srpo/version.hpp"

namespace srpo {

using jsonio::json;

const TagRecord* Dataset::find(const std::string& question_id) const {
  for (const TagRecord& r : records)
    if (r.question.id == question_id) return &r;
  return nullptr;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  json header{{"schema", kDatasetSchemaName}, {"version", kDatasetSchemaVersion}, {"world", jsonio::world_to_json(ds.world)}};
  out << header.dump() << '\n';
  for (const TagRecord& r : ds.records) {
    json rec{
        {"id", r.question.id},
        {"facts", jsonio::question_to_json(r.question).at("facts")},
        {"instruction", jsonio::instruction_to_json(r.question.instruction)},
        {"category", {r.question.category.primary, r.question.category.secondary, r.question.category.tertiary}},
        {"answer", jsonio::answer_to_json(r.answer)},
        {"reference_path", jsonio::path_to_json(r.reasoning)},
    };
    out << rec.dump() << '\n';
  }
  write_file(path, out.str());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("dataset file is empty: " + path.string());
  const json header = jsonio::parse_or_data_error(lines[0], path.string());
  if (header.value("schema", "") != kDatasetSchemaName)
    throw DataError("not a dataset file (schema field mismatch): " + path.string());
  if (header.value("version", -1) != kDatasetSchemaVersion)
    throw DataError("dataset schema version " + std::to_string(header.value("version", -1)) +
                    " unsupported (expected " + std::to_string(kDatasetSchemaVersion) + "): " + path.string());
  Dataset ds;
  ds.world = jsonio::world_from_json(header.at("world"));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const json j = jsonio::parse_or_data_error(lines[i], path.string());
    TagRecord rec;
    rec.question.id = j.at("id").get<std::string>();
    for (const auto& f : j.at("facts")) rec.question.facts.push_back(Fact{f.at(0).get<int>(), f.at(1).get<int>()});
    rec.question.instruction = jsonio::instruction_from_json(j.at("instruction"));
    const auto& cat = j.at("category");
    rec.question.category =
        CategoryTag{cat.at(0).get<std::string>(), cat.at(1).get<std::string>(), cat.at(2).get<std::string>()};
    rec.answer = jsonio::answer_from_json(j.at("answer"));
    rec.reasoning = jsonio::path_from_json(j.at("reference_path"));
    validate_path(rec.reasoning, static_cast<std::size_t>(ds.world.max_path_len));
    if (verify(rec.reasoning, rec.answer) != 1)
      throw DataError("dataset record " + rec.question.id + " fails verification against its answer");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

DatasetSplit split_dataset(const Dataset& ds, double holdout_fraction) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0)
    throw ConfigError("holdout_fraction must lie in [0, 1)");
  DatasetSplit split;
  split.train.world = ds.world;
  split.holdout.world = ds.world;
  const std::size_t train_n =
      ds.records.size() - static_cast<std::size_t>(static_cast<double>(ds.records.size()) * holdout_fraction);
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    (i < train_n ? split.train : split.holdout).records.push_back(ds.records[i]);
  return split;
}

Dataset hazardous_subset(const Dataset& ds) {
  Dataset out;
  out.world = ds.world;
  for (const TagRecord& r : ds.records)
    if (is_hazardous(r.question, ds.world)) out.records.push_back(r);
  return out;
}

}  // namespace srpo
