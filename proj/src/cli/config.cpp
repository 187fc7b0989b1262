#include <cstdio>
#include <sstream>

#include "cfsl/cli.hpp"
#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/kernels.hpp"

namespace cfsl::cli {
namespace fs = std::filesystem;
namespace {

// Collects every problem instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    const Json* section(const Json& root, const char* name, std::initializer_list<const char*> allowed) {
        if (!root.contains(name)) return nullptr;
        const Json& s = root.at(name);
        check_keys(s, allowed, name, errors);
        return s.is_object() ? &s : nullptr;
    }

    template <class T>
    std::optional<T> get(const Json* j, const char* key, const std::string& where) {
        if (!j || !j->contains(key)) return std::nullopt;
        const Json& v = j->at(key);
        try {
            if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::int64_t>) {
                if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            }
            return v.get<T>();
        } catch (const std::exception& e) {
            errors.push_back(where + "." + key + ": " + e.what());
            return std::nullopt;
        }
    }

    template <class T>
    void set(const Json* j, const char* key, const std::string& where, T& target) {
        if (auto v = get<T>(j, key, where)) target = *v;
    }

    void absorb(const std::vector<std::string>& more, const std::string& prefix = "") {
        for (const auto& m : more) errors.push_back(prefix + m);
    }
};

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

}  // namespace

RunConfigFile parse_run_config(const Json& j, const fs::path& base_dir) {
    Reader r;
    RunConfigFile cfg;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(j, {"dataset", "experiment", "learner", "pretrain", "replay", "evaluation", "execution", "output"},
               "config", r.errors);

    // dataset
    if (const Json* d = r.section(j, "dataset", {"path", "manifest", "synthetic", "image_size", "split"})) {
        if (auto p = r.get<std::string>(d, "path", "dataset")) cfg.dataset.path = resolve(base_dir, *p);
        if (auto p = r.get<std::string>(d, "manifest", "dataset")) cfg.dataset.manifest = resolve(base_dir, *p);
        if (const Json* s = r.section(*d, "synthetic", {"classes", "samples", "seed"})) {
            SyntheticParams sp;
            r.set(s, "classes", "dataset.synthetic", sp.classes);
            r.set(s, "samples", "dataset.synthetic", sp.samples);
            r.set(s, "seed", "dataset.synthetic", sp.seed);
            if (sp.classes < 2) r.errors.push_back("dataset.synthetic.classes must be >= 2");
            if (sp.samples < 1) r.errors.push_back("dataset.synthetic.samples must be >= 1");
            cfg.dataset.synthetic = sp;
        }
        r.set(d, "image_size", "dataset", cfg.dataset.image_size);
        if (cfg.dataset.image_size < 4) r.errors.push_back("dataset.image_size must be >= 4");
        const int sources = cfg.dataset.path.has_value() + cfg.dataset.manifest.has_value() +
                            cfg.dataset.synthetic.has_value();
        if (sources != 1) r.errors.push_back("dataset: exactly one of path, manifest, synthetic is required");
        if (cfg.dataset.manifest && d->contains("split")) {
            r.errors.push_back("dataset: split comes from the manifest; remove dataset.split");
        }
        if (const Json* s = r.section(*d, "split", {"background_fraction", "seed", "background", "evaluation"})) {
            auto& sp = cfg.dataset.split;
            r.set(s, "background_fraction", "dataset.split", sp.background_fraction);
            r.set(s, "seed", "dataset.split", sp.seed);
            const bool lists = s->contains("background") || s->contains("evaluation");
            if (lists) {
                sp.mode = SplitSpec::Mode::explicit_lists;
                if (s->contains("background_fraction")) {
                    r.errors.push_back("dataset.split: background_fraction and explicit lists are mutually exclusive");
                }
                try {
                    sp.background_ids = s->at("background").get<std::vector<std::string>>();
                    sp.evaluation_ids = s->at("evaluation").get<std::vector<std::string>>();
                } catch (const std::exception&) {
                    r.errors.push_back("dataset.split: background and evaluation must both be lists of class ids");
                }
            } else if (!(sp.background_fraction > 0.0 && sp.background_fraction < 1.0)) {
                r.errors.push_back("dataset.split.background_fraction must be in (0, 1)");
            }
        }
    } else {
        r.errors.push_back("config: missing section 'dataset'");
    }

    // experiment
    ExperimentConfig& exp = cfg.setup.experiment;
    bool have_experiment = false;
    if (const Json* e = r.section(j, "experiment", {"preset", "name", "nss", "cci", "n_way", "k_shot", "mode",
                                                     "num_tasks", "seeds"})) {
        if (auto name = r.get<std::string>(e, "preset", "experiment")) {
            std::vector<std::string> explicit_keys;
            for (const char* k : {"name", "nss", "cci", "n_way", "k_shot", "mode"}) {
                if (e->contains(k)) explicit_keys.push_back(k);
            }
            for (const auto& k : explicit_keys) {
                r.errors.push_back("experiment: preset and explicit field '" + k + "' are mutually exclusive");
            }
            try {
                exp = preset(*name);
                have_experiment = true;
            } catch (const LookupError& ex) {
                r.errors.push_back(std::string("experiment.preset: ") + ex.what());
            }
        } else {
            for (const char* k : {"nss", "cci", "n_way", "k_shot"}) {
                if (!e->contains(k)) r.errors.push_back(std::string("experiment: missing '") + k + "' (or use a preset)");
            }
            r.set(e, "name", "experiment", exp.name);
            r.set(e, "nss", "experiment", exp.nss);
            r.set(e, "cci", "experiment", exp.cci);
            r.set(e, "n_way", "experiment", exp.n_way);
            r.set(e, "k_shot", "experiment", exp.k_shot);
            if (auto m = r.get<std::string>(e, "mode", "experiment")) {
                try {
                    exp.mode = parse_task_mode(*m);
                } catch (const Error& ex) {
                    r.errors.push_back(std::string("experiment.mode: ") + ex.what());
                }
            }
            have_experiment = true;
        }
        r.set(e, "num_tasks", "experiment", exp.num_tasks);
        if (e->contains("seeds")) {
            try {
                exp.seeds = e->at("seeds").get<std::vector<std::int64_t>>();
            } catch (const std::exception&) {
                r.errors.push_back("experiment.seeds: expected a list of integers");
            }
        }
        if (have_experiment) r.absorb(exp.violations(), "experiment: ");
    } else {
        r.errors.push_back("config: missing section 'experiment'");
    }

    // learner
    LearnerSpec& spec = cfg.setup.learner;
    const Json* l = r.section(j, "learner", {"kind", "filters", "stages", "lr", "fine_tune_steps"});
    if (auto kind = r.get<std::string>(l, "kind", "learner")) {
        try {
            spec.kind = parse_learner_kind(*kind);
        } catch (const Error& ex) {
            r.errors.push_back(std::string("learner.kind: ") + ex.what());
        }
    }
    if (have_experiment && is_preset(exp.name)) spec = learner_preset(exp.name, spec.kind);
    r.set(l, "filters", "learner", spec.filters);
    r.set(l, "stages", "learner", spec.stages);
    r.set(l, "lr", "learner", spec.lr);
    r.set(l, "fine_tune_steps", "learner", spec.fine_tune_steps);
    spec.image_size = cfg.dataset.image_size;
    r.absorb(spec.violations(), "learner: ");

    // pretrain
    PretrainConfig& pc = cfg.setup.pretrain;
    if (const Json* p = r.section(j, "pretrain", {"epochs", "iterations_per_epoch", "batch_size", "episode_way",
                                                   "episode_queries", "lr", "augment"})) {
        r.set(p, "epochs", "pretrain", pc.epochs);
        r.set(p, "iterations_per_epoch", "pretrain", pc.iterations_per_epoch);
        r.set(p, "batch_size", "pretrain", pc.batch_size);
        r.set(p, "episode_way", "pretrain", pc.episode_way);
        r.set(p, "episode_queries", "pretrain", pc.episode_queries);
        r.set(p, "lr", "pretrain", pc.lr);
        r.set(p, "augment", "pretrain", pc.augment);
    }
    r.absorb(pc.violations(), "pretrain: ");

    // replay
    if (const Json* rp = r.section(j, "replay", {"enabled", "b", "k"})) {
        bool enabled = false;
        r.set(rp, "enabled", "replay", enabled);
        if (!rp->contains("enabled")) r.errors.push_back("replay: missing 'enabled'");
        if (enabled) {
            ReplayConfig rc = have_experiment && is_preset(exp.name) ? replay_preset(exp.name) : ReplayConfig{};
            r.set(rp, "b", "replay", rc.b);
            r.set(rp, "k", "replay", rc.k);
            r.absorb(rc.violations(), "replay: ");
            cfg.setup.replay = rc;
            if (have_experiment && exp.nss <= 1) {
                r.errors.push_back("replay requires NSS > 1 (experiment '" + exp.name + "' has NSS = 1)");
            }
            if (spec.kind != LearnerKind::convnet) r.errors.push_back("replay: only the convnet learner supports replay");
        } else if (rp->contains("b") || rp->contains("k")) {
            r.errors.push_back("replay: b/k given but replay is not enabled");
        }
    }

    // evaluation
    if (const Json* ev = r.section(j, "evaluation", {"ensemble", "ensemble_size", "validation_fraction",
                                                     "validation_tasks"})) {
        r.set(ev, "ensemble", "evaluation", cfg.ensemble);
        r.set(ev, "ensemble_size", "evaluation", cfg.ensemble_size);
        r.set(ev, "validation_fraction", "evaluation", cfg.validation_fraction);
        r.set(ev, "validation_tasks", "evaluation", cfg.validation_tasks);
        if (cfg.ensemble_size < 1) r.errors.push_back("evaluation.ensemble_size must be >= 1");
        if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
            r.errors.push_back("evaluation.validation_fraction must be in (0, 1)");
        }
        if (cfg.validation_tasks < 1) r.errors.push_back("evaluation.validation_tasks must be >= 1");
    }

    // execution
    if (const Json* ex = r.section(j, "execution", {"workers", "kernels"})) {
        r.set(ex, "workers", "execution", cfg.workers);
        r.set(ex, "kernels", "execution", cfg.kernels);
        if (cfg.workers < 1) r.errors.push_back("execution.workers must be >= 1");
        try {
            kernels::parse_isa(cfg.kernels);
        } catch (const Error& e) {
            r.errors.push_back(std::string("execution.kernels: ") + e.what());
        }
    }

    // output
    if (const Json* o = r.section(j, "output", {"directory"})) {
        if (auto d = r.get<std::string>(o, "directory", "output")) cfg.output_directory = resolve(base_dir, *d);
    }
    if (cfg.output_directory.empty()) r.errors.push_back("output.directory is required");

    if (!r.errors.empty()) {
        std::string msg = "invalid config (" + std::to_string(r.errors.size()) + " problem" +
                          (r.errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : r.errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfigFile load_run_config(const fs::path& path) {
    const Json j = read_json_file(path);
    return parse_run_config(j, fs::absolute(path).parent_path());
}

Json resolved_config(const RunConfigFile& c) {
    Json dataset = Json::object();
    if (c.dataset.path) dataset["path"] = fs::absolute(*c.dataset.path).string();
    if (c.dataset.manifest) dataset["manifest"] = fs::absolute(*c.dataset.manifest).string();
    if (c.dataset.synthetic) {
        dataset["synthetic"] = Json{{"classes", c.dataset.synthetic->classes},
                                    {"samples", c.dataset.synthetic->samples},
                                    {"seed", c.dataset.synthetic->seed}};
    }
    dataset["image_size"] = c.dataset.image_size;
    if (!c.dataset.manifest) {
        if (c.dataset.split.mode == SplitSpec::Mode::ratio) {
            dataset["split"] = Json{{"background_fraction", c.dataset.split.background_fraction},
                                    {"seed", c.dataset.split.seed}};
        } else {
            dataset["split"] = Json{{"seed", c.dataset.split.seed},
                                    {"background", c.dataset.split.background_ids},
                                    {"evaluation", c.dataset.split.evaluation_ids}};
        }
    }
    const auto& e = c.setup.experiment;
    const auto& l = c.setup.learner;
    const auto& p = c.setup.pretrain;
    Json replay{{"enabled", c.setup.replay.has_value()}};
    if (c.setup.replay) {
        replay["b"] = c.setup.replay->b;
        replay["k"] = c.setup.replay->k;
    }
    return Json{
        {"dataset", dataset},
        {"experiment",
         {{"name", e.name},
          {"nss", e.nss},
          {"cci", e.cci},
          {"n_way", e.n_way},
          {"k_shot", e.k_shot},
          {"mode", std::string(to_string(e.mode))},
          {"num_tasks", e.num_tasks},
          {"seeds", e.seeds}}},
        {"learner",
         {{"kind", std::string(to_string(l.kind))},
          {"filters", l.filters},
          {"stages", l.stages},
          {"lr", l.lr},
          {"fine_tune_steps", l.fine_tune_steps}}},
        {"pretrain",
         {{"epochs", p.epochs},
          {"iterations_per_epoch", p.iterations_per_epoch},
          {"batch_size", p.batch_size},
          {"episode_way", p.episode_way},
          {"episode_queries", p.episode_queries},
          {"lr", p.lr},
          {"augment", p.augment}}},
        {"replay", replay},
        {"evaluation",
         {{"ensemble", c.ensemble},
          {"ensemble_size", c.ensemble_size},
          {"validation_fraction", c.validation_fraction},
          {"validation_tasks", c.validation_tasks}}},
        {"execution", {{"workers", c.workers}, {"kernels", c.kernels}}},
        {"output", {{"directory", fs::absolute(c.output_directory).string()}}}};
}

DatasetSplit load_dataset(const DatasetSection& d) {
    if (d.manifest) {
        const Json m = read_json_file(*d.manifest);
        try {
            const fs::path images = resolve(d.manifest->parent_path(), m.at("images").get<std::string>());
            if (m.at("image_size").get<int>() != d.image_size) {
                throw ConfigError("manifest '" + d.manifest->string() + "' was prepared at image_size " +
                                  std::to_string(m.at("image_size").get<int>()) + ", config asks for " +
                                  std::to_string(d.image_size));
            }
            SplitSpec s;
            s.mode = SplitSpec::Mode::explicit_lists;
            s.background_ids = m.at("background").get<std::vector<std::string>>();
            s.evaluation_ids = m.at("evaluation").get<std::vector<std::string>>();
            const ClassDataset data = load_image_folder(images, d.image_size);
            const std::string expected = m.at("dataset_fingerprint").get<std::string>();
            if (hex_digest(data.fingerprint()) != expected) {
                throw IngestionError("dataset under '" + images.string() + "' no longer matches its manifest");
            }
            return split_background_eval(data, s);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("malformed manifest '" + d.manifest->string() + "': " + e.what());
        }
    }
    const ClassDataset data = d.synthetic ? synth_generate(d.synthetic->classes, d.synthetic->samples, d.image_size,
                                                           d.synthetic->seed)
                                          : load_image_folder(*d.path, d.image_size);
    return split_background_eval(data, d.split);
}

RunOptions run_options(const RunConfigFile& c) {
    RunOptions o;
    o.pretrain = c.setup.pretrain;
    o.workers = c.workers;
    o.ensemble = c.ensemble;
    o.ensemble_size = c.ensemble_size;
    o.validation_fraction = c.validation_fraction;
    o.validation_tasks = c.validation_tasks;
    return o;
}

std::string count_label(const RunReport& report) {
    const char* key = report.experiment.mode == TaskMode::instance ? "NI=" : "NC=";
    return key + std::to_string(report.counts.label_count);
}

std::string summary_line(const RunReport& r) {
    char buf[64];
    std::ostringstream s;
    std::string model(to_string(r.learner.kind));
    if (r.replay) model += "+replay";
    s << r.experiment.name << " | " << model << " | " << count_label(r) << " | " << r.per_seed.size() << " seed"
      << (r.per_seed.size() == 1 ? "" : "s") << " x " << r.experiment.num_tasks << " tasks | accuracy ";
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * r.overall_mean, 100.0 * r.overall_std);
    s << buf;
    if (r.ensemble_accuracy) {
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *r.ensemble_accuracy);
        s << " | ensemble " << buf;
    }
    std::vector<std::string> flags;
    if (r.reduced_num_tasks) flags.push_back("num_tasks");
    if (r.reduced_fine_tune_steps) flags.push_back("fine_tune_steps");
    if (!flags.empty()) {
        s << " | reduced:";
        for (const auto& f : flags) s << ' ' << f;
    }
    if (r.partial) s << " | PARTIAL";
    return s.str();
}

}  // namespace cfsl::cli
