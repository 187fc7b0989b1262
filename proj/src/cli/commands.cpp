#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "cfsl/cli.hpp"
#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/kernels.hpp"

namespace cfsl::cli {
namespace fs = std::filesystem;
namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::string hash_text(const std::string& text) {
    Fnv1a h;
    h.update(text);
    return hex_digest(h.digest());
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string model_label(const RunReport& r) {
    std::string s(to_string(r.learner.kind));
    if (r.replay) s += "+replay";
    return s;
}

}  // namespace

void apply_synthetic_tokens(const std::vector<std::string>& tokens, PrepareArgs& args) {
    SyntheticParams p;
    for (const auto& t : tokens) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("--synthetic expects key=value tokens, got '" + t + "'");
        const std::string key = t.substr(0, eq), value = t.substr(eq + 1);
        try {
            if (key == "classes") {
                p.classes = std::stoi(value);
            } else if (key == "samples") {
                p.samples = std::stoi(value);
            } else if (key == "seed") {
                p.seed = std::stoll(value);
            } else if (key == "image_size") {
                args.image_size = std::stoi(value);
            } else if (key == "out") {
                args.out = value;
            } else {
                throw ConfigError("unknown --synthetic key '" + key + "'");
            }
        } catch (const std::logic_error&) {
            throw ConfigError("--synthetic " + key + ": '" + value + "' is not a number");
        }
    }
    if (p.classes < 2 || p.samples < 1) throw ConfigError("--synthetic needs classes >= 2 and samples >= 1");
    args.synthetic = p;
}

int cmd_prepare(const PrepareArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.synthetic.has_value() == args.root.has_value()) {
            throw ConfigError("prepare needs exactly one of --synthetic or --root");
        }
        if (!(args.split > 0.0 && args.split < 1.0)) throw ConfigError("--split must be in (0, 1)");
        ClassDataset data;
        Json source;
        fs::path images;
        if (args.synthetic) {
            const auto& s = *args.synthetic;
            data = synth_generate(s.classes, s.samples, args.image_size, s.seed);
            source = Json{{"kind", "synthetic"}, {"classes", s.classes}, {"samples", s.samples}, {"seed", s.seed}};
            images = "images";
        } else {
            data = load_image_folder(*args.root, args.image_size);
            images = fs::absolute(*args.root).lexically_normal();
            source = Json{{"kind", "folder"}, {"root", images.string()}};
        }
        SplitSpec spec;
        spec.background_fraction = args.split;
        spec.seed = args.split_seed;
        const DatasetSplit split = split_background_eval(data, spec);

        auto ids = [](const ClassDataset& d) {
            std::vector<std::string> v;
            for (const auto& c : d.classes) v.push_back(c.class_id);
            return v;
        };
        const Json manifest{{"schema_version", 1},
                            {"source", source},
                            {"images", images.string()},
                            {"image_size", args.image_size},
                            {"split", {{"background_fraction", args.split}, {"seed", args.split_seed}}},
                            {"dataset_fingerprint", hex_digest(data.fingerprint())},
                            {"class_count", data.class_count()},
                            {"sample_count", data.sample_count()},
                            {"background", ids(split.background)},
                            {"evaluation", ids(split.evaluation)}};
        const std::string text = manifest.dump(2) + "\n";

        if (args.synthetic) save_image_folder(data, args.out / "images");
        write_text_file(args.out / "manifest.json", text);
        out << "prepared " << data.class_count() << " classes (" << split.background.class_count() << " background, "
            << split.evaluation.class_count() << " evaluation) in " << args.out.string() << "\n"
            << "manifest hash " << hash_text(text) << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_run(const fs::path& config_path, std::ostream& out, std::ostream& err) {
    RunConfigFile cfg;
    DatasetSplit split;
    try {
        cfg = load_run_config(config_path);
        kernels::select_isa(kernels::parse_isa(cfg.kernels));
        split = load_dataset(cfg.dataset);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        const RunReport report =
            run_experiment(split, cfg.setup.experiment, cfg.setup.learner, cfg.setup.replay, run_options(cfg));
        const std::string line = summary_line(report);
        persist_report(report, cfg.output_directory / "report.json");
        write_text_file(cfg.output_directory / "summary.txt", line + "\n");
        write_text_file(cfg.output_directory / "resolved_config.json", resolved_config(cfg).dump(2) + "\n");
        out << line << "\n";
        if (report.partial) {
            for (const auto& s : report.per_seed) {
                if (s.error) err << "seed " << s.seed << " failed: " << *s.error << "\n";
            }
            return kExitFailure;
        }
        return 0;
    } catch (const ReplayError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SamplingError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_sweep(const fs::path& config_path, const fs::path& grid_path, std::ostream& out, std::ostream& err) {
    RunConfigFile cfg;
    DatasetSplit split;
    SweepSpec spec;
    try {
        cfg = load_run_config(config_path);
        const Json g = read_json_file(grid_path);
        std::vector<std::string> errors;
        check_keys(g, {"grid", "budget", "num_tasks", "seed"}, "grid file", errors);
        if (!errors.empty()) throw ConfigError(errors.front());
        try {
            for (const auto& [name, values] : g.at("grid").items()) {
                spec.grid[name] = values.get<std::vector<double>>();
            }
            std::size_t product = 1;
            for (const auto& [name, values] : spec.grid) product *= values.size();
            spec.budget = g.contains("budget") ? g.at("budget").get<int>() : static_cast<int>(product);
            if (g.contains("num_tasks")) spec.num_tasks = g.at("num_tasks").get<int>();
            if (g.contains("seed")) spec.seed = g.at("seed").get<std::int64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("grid file '" + grid_path.string() + "': " + e.what());
        }
        const auto v = spec.violations();
        if (!v.empty()) throw ConfigError("grid file '" + grid_path.string() + "': " + v.front());
        for (const auto& [name, values] : spec.grid) {
            for (double value : values) apply_point(cfg.setup, {{name, value}});
        }
        kernels::select_isa(kernels::parse_isa(cfg.kernels));
        split = load_dataset(cfg.dataset);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        const SweepResult result = sweep(split, cfg.setup, spec, run_options(cfg));
        write_text_file(cfg.output_directory / "leaderboard.json", to_json(result).dump(2) + "\n");
        int rank = 1;
        for (const auto& e : result.leaderboard) {
            out << rank++ << ". " << Json(e.point).dump() << "  ";
            if (e.error) {
                out << "failed: " << *e.error << "\n";
            } else {
                out << percent(e.mean) << " ± " << percent(e.std) << "\n";
            }
        }
        const auto best = std::find_if(result.leaderboard.begin(), result.leaderboard.end(),
                                       [](const SweepEntry& e) { return !e.error; });
        if (best == result.leaderboard.end()) {
            err << "error: every sweep run failed\n";
            return kExitFailure;
        }
        RunConfigFile best_cfg = cfg;
        best_cfg.setup = best->setup;
        best_cfg.output_directory = cfg.output_directory / "best_run";
        write_text_file(cfg.output_directory / "best_config.json", resolved_config(best_cfg).dump(2) + "\n");
        const bool any_failed = std::any_of(result.leaderboard.begin(), result.leaderboard.end(),
                                            [](const SweepEntry& e) { return e.error.has_value(); });
        return any_failed ? kExitFailure : 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_tasks(const fs::path& config_path, int count, const fs::path& out_path, std::ostream& out, std::ostream& err) {
    RunConfigFile cfg;
    DatasetSplit split;
    try {
        if (count < 1) throw ConfigError("--count must be >= 1");
        cfg = load_run_config(config_path);
        split = load_dataset(cfg.dataset);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        std::string text;
        const auto& exp = cfg.setup.experiment;
        for (const std::int64_t seed : exp.seeds) {
            for (int t = 0; t < count; ++t) {
                text += task_manifest(make_task(split.evaluation, exp, seed, t), exp, seed, t).dump() + "\n";
            }
        }
        write_text_file(out_path, text);
        out << "wrote " << count * exp.seeds.size() << " task records to " << out_path.string() << "\n";
        return 0;
    } catch (const SamplingError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_report(const std::vector<fs::path>& paths, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    try {
        if (paths.empty()) throw ConfigError("report needs at least one report file");
        std::vector<RunReport> reports;
        for (const auto& p : paths) {
            try {
                reports.push_back(load_report(p));
            } catch (const VersionError& e) {
                throw VersionError("incompatible report schema: " + std::string(e.what()));
            }
        }
        for (std::size_t i = 1; i < reports.size(); ++i) {
            if (reports[i].schema_version != reports[0].schema_version) {
                throw VersionError("incompatible report schemas: '" + paths[0].string() + "' has version " +
                                   std::to_string(reports[0].schema_version) + ", '" + paths[i].string() +
                                   "' has version " + std::to_string(reports[i].schema_version));
            }
        }

        std::vector<std::string> rows, cols;
        auto index_of = [](std::vector<std::string>& v, const std::string& s) {
            auto it = std::find(v.begin(), v.end(), s);
            if (it != v.end()) return static_cast<std::size_t>(it - v.begin());
            v.push_back(s);
            return v.size() - 1;
        };
        struct Cell {
            const RunReport* report = nullptr;
            std::size_t file = 0;
        };
        std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const std::size_t r = index_of(rows, reports[i].experiment.name);
            const std::size_t c = index_of(cols, model_label(reports[i]));
            auto [it, inserted] = cells.insert({{r, c}, {&reports[i], i}});
            if (!inserted) {
                throw ConfigError("'" + paths[it->second.file].string() + "' and '" + paths[i].string() +
                                  "' both report " + rows[r] + " / " + cols[c]);
            }
        }

        std::ostringstream table;
        table << "| experiment | count |";
        for (const auto& c : cols) table << ' ' << c << " |";
        table << "\n|---|---|";
        for (std::size_t c = 0; c < cols.size(); ++c) table << "---|";
        table << "\n";
        Json summary_rows = Json::array();
        std::vector<ChartSeries> series(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) series[c].name = cols[c];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::string count;
            std::ostringstream line;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                auto it = cells.find({r, c});
                if (it == cells.end()) {
                    line << " - |";
                    series[c].means.push_back(std::nullopt);
                    series[c].stds.push_back(std::nullopt);
                    continue;
                }
                const RunReport& rep = *it->second.report;
                count = count_label(rep);
                line << ' ' << percent(rep.overall_mean) << " ± " << percent(rep.overall_std) << " |";
                series[c].means.push_back(100.0 * rep.overall_mean);
                series[c].stds.push_back(100.0 * rep.overall_std);
                summary_rows.push_back(Json{{"experiment", rows[r]},
                                            {"model", cols[c]},
                                            {"count", count},
                                            {"mean", rep.overall_mean},
                                            {"std", rep.overall_std},
                                            {"seeds", rep.per_seed.size()},
                                            {"num_tasks", rep.experiment.num_tasks},
                                            {"ensemble_accuracy", rep.ensemble_accuracy ? Json(*rep.ensemble_accuracy)
                                                                                        : Json(nullptr)},
                                            {"partial", rep.partial},
                                            {"source", paths[it->second.file].filename().string()}});
            }
            table << "| " << rows[r] << " | " << count << " |" << line.str() << "\n";
        }
        const Json summary{{"schema_version", reports[0].schema_version},
                           {"columns", cols},
                           {"rows", rows},
                           {"entries", summary_rows}};
        const std::string title = "Accuracy (%), error bars: 1 std across seeds";
        const std::string svg = render_svg(rows, series, title);

        write_text_file(out_dir / "table.md", table.str());
        write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
        write_text_file(out_dir / "chart.svg", svg);
        write_png_chart(rows, series, title, out_dir / "chart.png");
        out << table.str();
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace cfsl::cli
