#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kmn/filtering.hpp"

namespace kmn {

// ordered_json keeps insertion order when dumping, which is what makes
// rerun outputs byte-identical.
using Json = nlohmann::ordered_json;

Json model_to_json(const FilterModel& model, const Json& train_metadata);
FilterModel model_from_json(const Json& j);

// Checkpoints are JSON with full-precision numbers (the serializer emits the
// shortest decimal that parses back to the identical double, so round-trips
// are value-exact).
void save_checkpoint(const FilterModel& model, const Json& train_metadata,
                     const std::string& path);
FilterModel load_checkpoint(const std::string& path);

Json trial_to_json(const TrialRecord& trial);
TrialRecord trial_from_json(const Json& j);

// Newline-delimited JSON, one trial per line.
void save_trials_jsonl(const std::vector<TrialRecord>& trials,
                       const std::string& path);
std::vector<TrialRecord> load_trials_jsonl(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

void save_json(const Json& j, const std::string& path);
Json load_json(const std::string& path);

}  // namespace kmn
