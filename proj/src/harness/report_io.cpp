#include <fstream>
#include <sstream>

#include "cfsl/error.hpp"
#include "cfsl/harness.hpp"

namespace cfsl {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional_number(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

Json point_json(const std::map<std::string, double>& point) {
    Json j = Json::object();
    for (const auto& [k, v] : point) j[k] = v;
    return j;
}

}  // namespace

Json to_json(const RunSetup& setup) {
    return Json{{"experiment", setup.experiment},
                {"learner", setup.learner},
                {"replay", setup.replay ? Json(*setup.replay) : Json(nullptr)},
                {"pretrain", setup.pretrain}};
}

RunSetup setup_from_json(const Json& j) {
    std::vector<std::string> errors;
    check_keys(j, {"experiment", "learner", "replay", "pretrain"}, "setup", errors);
    if (!errors.empty()) throw ConfigError(errors.front());
    RunSetup s;
    s.experiment = j.at("experiment").get<ExperimentConfig>();
    s.learner = j.at("learner").get<LearnerSpec>();
    if (!j.at("replay").is_null()) s.replay = j.at("replay").get<ReplayConfig>();
    s.pretrain = j.at("pretrain").get<PretrainConfig>();
    return s;
}

Json to_json(const RunReport& r) {
    Json seeds = Json::array();
    for (const auto& s : r.per_seed) {
        seeds.push_back(Json{{"seed", s.seed},
                             {"per_task_accuracies", s.per_task_accuracies},
                             {"mean", s.mean},
                             {"std", s.std},
                             {"error", s.error ? Json(*s.error) : Json(nullptr)},
                             {"ensemble_accuracy", optional_number(s.ensemble_accuracy)},
                             {"member_accuracies", s.member_accuracies}});
    }
    Json hashes = Json::object();
    for (const auto& [k, v] : r.artifact_hashes) hashes[k] = v;
    return Json{{"schema_version", r.schema_version},
                {"experiment", r.experiment},
                {"learner", r.learner},
                {"replay", r.replay ? Json(*r.replay) : Json(nullptr)},
                {"pretrain", r.pretrain},
                {"counts", {{"label_count", r.counts.label_count}, {"samples_per_label", r.counts.samples_per_label}}},
                {"per_seed", seeds},
                {"overall", {{"mean", r.overall_mean}, {"std", r.overall_std}, {"std_kind", "population"}}},
                {"ensemble_accuracy", optional_number(r.ensemble_accuracy)},
                {"wall_time_seconds", r.wall_time_seconds},
                {"artifact_hashes", hashes},
                {"flags",
                 {{"reduced_num_tasks", r.reduced_num_tasks},
                  {"reduced_fine_tune_steps", r.reduced_fine_tune_steps},
                  {"partial", r.partial}}}};
}

RunReport report_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("schema_version")) throw ConfigError("report has no schema_version");
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version > kReportSchemaVersion) {
        throw VersionError("report schema version " + std::to_string(r.schema_version) + " is newer than supported " +
                           std::to_string(kReportSchemaVersion));
    }
    try {
        r.experiment = j.at("experiment").get<ExperimentConfig>();
        r.learner = j.at("learner").get<LearnerSpec>();
        if (!j.at("replay").is_null()) r.replay = j.at("replay").get<ReplayConfig>();
        r.pretrain = j.at("pretrain").get<PretrainConfig>();
        r.counts.label_count = j.at("counts").at("label_count").get<int>();
        r.counts.samples_per_label = j.at("counts").at("samples_per_label").get<int>();
        for (const auto& s : j.at("per_seed")) {
            SeedResult sr;
            sr.seed = s.at("seed").get<std::int64_t>();
            sr.per_task_accuracies = s.at("per_task_accuracies").get<std::vector<double>>();
            sr.mean = s.at("mean").get<double>();
            sr.std = s.at("std").get<double>();
            if (!s.at("error").is_null()) sr.error = s.at("error").get<std::string>();
            sr.ensemble_accuracy = read_optional_number(s, "ensemble_accuracy");
            sr.member_accuracies = s.at("member_accuracies").get<std::vector<double>>();
            r.per_seed.push_back(std::move(sr));
        }
        r.overall_mean = j.at("overall").at("mean").get<double>();
        r.overall_std = j.at("overall").at("std").get<double>();
        r.ensemble_accuracy = read_optional_number(j, "ensemble_accuracy");
        r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
        for (const auto& [k, v] : j.at("artifact_hashes").items()) r.artifact_hashes[k] = v.get<std::string>();
        const auto& f = j.at("flags");
        r.reduced_num_tasks = f.at("reduced_num_tasks").get<bool>();
        r.reduced_fine_tune_steps = f.at("reduced_fine_tune_steps").get<bool>();
        r.partial = f.at("partial").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
    return r;
}

Json to_json(const SweepResult& result) {
    Json rows = Json::array();
    int rank = 1;
    for (const auto& e : result.leaderboard) {
        rows.push_back(Json{{"rank", rank++},
                            {"point", point_json(e.point)},
                            {"mean", e.mean},
                            {"std", e.std},
                            {"num_tasks", e.setup.experiment.num_tasks},
                            {"error", e.error ? Json(*e.error) : Json(nullptr)},
                            {"setup", to_json(e.setup)}});
    }
    return Json{{"schema_version", kReportSchemaVersion},
                {"grid_size", result.grid_size},
                {"runs", result.leaderboard.size()},
                {"subsampled", result.subsampled},
                {"leaderboard", rows}};
}

void persist_report(const RunReport& report, const std::filesystem::path& path) {
    write_text_file(path, to_json(report).dump(2) + "\n");
}

RunReport load_report(const std::filesystem::path& path) {
    try {
        return report_from_json(read_json_file(path));
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace cfsl
