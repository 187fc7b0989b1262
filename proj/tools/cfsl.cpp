// cfsl: prepare datasets, run experiments and sweeps, export task streams,
// summarize reports.

#include <iostream>

#include "CLI11.hpp"
#include "cfsl/cli.hpp"
#include "cfsl/error.hpp"

int main(int argc, char** argv) {
    namespace cli = cfsl::cli;
    CLI::App app{"Continual few-shot learning experiments"};
    app.require_subcommand(1);

    cli::PrepareArgs prep;
    std::vector<std::string> synthetic_tokens;
    std::string root;
    std::string out_dir = "prepared";
    auto* prepare = app.add_subcommand("prepare", "Ingest or synthesize a dataset and write its split manifest");
    prepare->add_option("--synthetic", synthetic_tokens, "key=value tokens: classes, samples, seed, image_size, out")
        ->expected(1, -1);
    prepare->add_option("--root", root, "Class-folder dataset root");
    prepare->add_option("--split", prep.split, "Background fraction of classes")->capture_default_str();
    prepare->add_option("--seed", prep.split_seed, "Split seed")->capture_default_str();
    prepare->add_option("--image-size", prep.image_size, "Square image side")->capture_default_str();
    auto* out_opt = prepare->add_option("--out", out_dir, "Output directory")->capture_default_str();

    std::string config_path, grid_path;
    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("config", config_path, "Run config (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep", "Grid search over hyperparameters");
    sweep->add_option("config", config_path, "Base run config (JSON)")->required();
    sweep->add_option("grid", grid_path, "Grid file (JSON)")->required();

    int task_count = 10;
    std::string tasks_out = "tasks.jsonl";
    auto* tasks = app.add_subcommand("tasks", "Export sampled task streams as manifest records");
    tasks->add_option("config", config_path, "Run config (JSON)")->required();
    tasks->add_option("--count", task_count, "Tasks per seed")->capture_default_str();
    tasks->add_option("--out", tasks_out, "Output file (JSON lines)")->capture_default_str();

    std::vector<std::string> report_paths;
    std::string report_out = "report";
    auto* report = app.add_subcommand("report", "Tables and charts from one or more run reports");
    report->add_option("reports", report_paths, "report.json files")->required();
    report->add_option("--out", report_out, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (*prepare) {
        try {
            if (!synthetic_tokens.empty()) cli::apply_synthetic_tokens(synthetic_tokens, prep);
        } catch (const cfsl::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        if (!root.empty()) prep.root = root;
        // --out beats the token form only when given explicitly.
        if (out_opt->count() > 0 || synthetic_tokens.empty()) prep.out = out_dir;
        return cli::cmd_prepare(prep, std::cout, std::cerr);
    }
    if (*run) return cli::cmd_run(config_path, std::cout, std::cerr);
    if (*tasks) return cli::cmd_tasks(config_path, task_count, tasks_out, std::cout, std::cerr);
    if (*sweep) return cli::cmd_sweep(config_path, grid_path, std::cout, std::cerr);
    std::vector<std::filesystem::path> paths(report_paths.begin(), report_paths.end());
    return cli::cmd_report(paths, report_out, std::cout, std::cerr);
}
