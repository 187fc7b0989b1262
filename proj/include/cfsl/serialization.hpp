#pragma once

// JSON mappings for the configuration types. Readers are strict: unknown
// keys and missing required keys raise ConfigError naming the key.

#include "json.hpp"

#include "cfsl/episodes.hpp"
#include "cfsl/models.hpp"
#include "cfsl/replay.hpp"

namespace cfsl {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);
void to_json(Json& j, const LearnerSpec& s);
void from_json(const Json& j, LearnerSpec& s);
void to_json(Json& j, const PretrainConfig& p);
void from_json(const Json& j, PretrainConfig& p);
void to_json(Json& j, const ReplayConfig& r);
void from_json(const Json& j, ReplayConfig& r);

// Rejects keys outside `allowed`; appends one message per offender.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where,
                std::vector<std::string>& errors);

// Task manifest record: config, label count, and (class_id, sample_id,
// label) for every support and target item.
Json task_manifest(const Task& task, const ExperimentConfig& config, std::int64_t seed, int task_index);
Json buffer_manifest(const ReplayBuffer& buffer);

// Parses text, turning parser failures into cfsl::ParseError with offset.
Json parse_json(std::string_view text, const std::string& what);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cfsl
