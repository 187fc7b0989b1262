#include <fstream>
#include <set>
#include <sstream>

#include "cfsl/error.hpp"
#include "cfsl/serialization.hpp"

namespace cfsl {
namespace {

template <class T>
T required(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string(where) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

void strict(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
    std::vector<std::string> errors;
    check_keys(j, allowed, where, errors);
    if (!errors.empty()) throw ConfigError(errors.front());
}

Json item_record(const LabeledItem& item) {
    return Json{{"label", item.label}, {"class_id", item.class_id}, {"sample_id", item.sample_id}};
}

}  // namespace

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where,
                std::vector<std::string>& errors) {
    if (!j.is_object()) {
        errors.push_back(where + ": expected an object");
        return;
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) errors.push_back(where + ": unknown key '" + it.key() + "'");
    }
}

void to_json(Json& j, const ExperimentConfig& c) {
    j = Json{{"name", c.name},         {"nss", c.nss},       {"cci", c.cci},
             {"n_way", c.n_way},       {"k_shot", c.k_shot}, {"mode", std::string(to_string(c.mode))},
             {"num_tasks", c.num_tasks}, {"seeds", c.seeds}};
}

void from_json(const Json& j, ExperimentConfig& c) {
    strict(j, {"name", "nss", "cci", "n_way", "k_shot", "mode", "num_tasks", "seeds"}, "experiment");
    c.name = required<std::string>(j, "name", "experiment");
    c.nss = required<int>(j, "nss", "experiment");
    c.cci = required<int>(j, "cci", "experiment");
    c.n_way = required<int>(j, "n_way", "experiment");
    c.k_shot = required<int>(j, "k_shot", "experiment");
    c.mode = parse_task_mode(required<std::string>(j, "mode", "experiment"));
    c.num_tasks = required<int>(j, "num_tasks", "experiment");
    c.seeds = required<std::vector<std::int64_t>>(j, "seeds", "experiment");
}

void to_json(Json& j, const LearnerSpec& s) {
    j = Json{{"kind", std::string(to_string(s.kind))},
             {"filters", s.filters},
             {"stages", s.stages},
             {"lr", s.lr},
             {"fine_tune_steps", s.fine_tune_steps},
             {"image_size", s.image_size}};
}

void from_json(const Json& j, LearnerSpec& s) {
    strict(j, {"kind", "filters", "stages", "lr", "fine_tune_steps", "image_size"}, "learner");
    s.kind = parse_learner_kind(required<std::string>(j, "kind", "learner"));
    s.filters = required<int>(j, "filters", "learner");
    s.stages = required<int>(j, "stages", "learner");
    s.lr = required<double>(j, "lr", "learner");
    s.fine_tune_steps = required<int>(j, "fine_tune_steps", "learner");
    s.image_size = required<int>(j, "image_size", "learner");
}

void to_json(Json& j, const PretrainConfig& p) {
    j = Json{{"epochs", p.epochs},
             {"iterations_per_epoch", p.iterations_per_epoch},
             {"batch_size", p.batch_size},
             {"episode_way", p.episode_way},
             {"episode_queries", p.episode_queries},
             {"lr", p.lr},
             {"augment", p.augment},
             {"seed", p.seed}};
}

void from_json(const Json& j, PretrainConfig& p) {
    strict(j, {"epochs", "iterations_per_epoch", "batch_size", "episode_way", "episode_queries", "lr", "augment", "seed"},
           "pretrain");
    p.epochs = required<int>(j, "epochs", "pretrain");
    p.iterations_per_epoch = required<int>(j, "iterations_per_epoch", "pretrain");
    p.batch_size = required<int>(j, "batch_size", "pretrain");
    p.episode_way = required<int>(j, "episode_way", "pretrain");
    p.episode_queries = required<int>(j, "episode_queries", "pretrain");
    p.lr = required<double>(j, "lr", "pretrain");
    p.augment = required<bool>(j, "augment", "pretrain");
    p.seed = required<std::int64_t>(j, "seed", "pretrain");
}

void to_json(Json& j, const ReplayConfig& r) { j = Json{{"b", r.b}, {"k", r.k}}; }

void from_json(const Json& j, ReplayConfig& r) {
    strict(j, {"b", "k"}, "replay");
    r.b = required<int>(j, "b", "replay");
    r.k = required<int>(j, "k", "replay");
}

Json task_manifest(const Task& task, const ExperimentConfig& config, std::int64_t seed, int task_index) {
    Json sets = Json::array();
    for (const auto& s : task.support_sets) {
        Json items = Json::array();
        for (const auto& item : s.items) items.push_back(item_record(item));
        sets.push_back(Json{{"index", s.index}, {"items", std::move(items)}});
    }
    Json target = Json::array();
    for (const auto& item : task.target_set) target.push_back(item_record(item));
    return Json{{"seed", seed},
                {"task_index", task_index},
                {"config", config},
                {"label_count", task.label_count},
                {"support_sets", std::move(sets)},
                {"target_set", std::move(target)}};
}

Json buffer_manifest(const ReplayBuffer& buffer) {
    Json slots = Json::array();
    for (const auto& s : buffer.slots()) {
        Json items = Json::array();
        for (const auto& item : s.items) items.push_back(item_record(item));
        slots.push_back(Json{{"index", s.index}, {"items", std::move(items)}});
    }
    return Json{{"capacity", buffer.capacity()}, {"slots", std::move(slots)}};
}

Json parse_json(std::string_view text, const std::string& what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("cannot parse " + what + ": " + e.what(), e.byte);
    }
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str(), "'" + path.string() + "'");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw LoadError("short write to '" + path.string() + "'");
}

}  // namespace cfsl
