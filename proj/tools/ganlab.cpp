// ganlab command-line driver: train, eval, sweep, report.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ganlab/checkpoint.hpp"
#include "ganlab/error.hpp"
#include "ganlab/experiment.hpp"

namespace fs = std::filesystem;
using namespace ganlab;

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::string precision;
    std::optional<std::uint64_t> seed_override;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config, "Experiment config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out, "Output directory (overrides output.dir and $GANLAB_OUT)");
    cmd->add_option("--precision", opts.precision, "Training precision")->check(CLI::IsMember({"f32", "f64"}));
    cmd->add_option("--seed-override", opts.seed_override, "Replace train.seed");
}

ExperimentConfig resolve(const CommonOptions& opts) {
    ExperimentConfig cfg = load_config(opts.config);
    if (!opts.out.empty())
        cfg.output_dir = opts.out;
    else if (const char* env = std::getenv("GANLAB_OUT"); env && *env)
        cfg.output_dir = env;
    if (!opts.precision.empty()) cfg.precision = parse_precision(opts.precision);
    if (opts.seed_override) cfg.train.seed_train = *opts.seed_override;
    cfg.validate();
    for (const auto& e : cfg.sweep)
        if (const auto warning = cfg.train_config_for(e).validate(); !warning.empty())
            std::cerr << "warning: " << e.label() << ": " << warning << "\n";
    return cfg;
}

void print_reports(const std::vector<MetricsReport>& reports) {
    for (const auto& r : reports)
        std::printf("%-12s %-24s avg=%.6g top10=%.6g top5=%.6g (queries=%zu)\n", direction_name(r.direction),
                    r.space.c_str(), r.avg, r.top10, r.top5, r.query_count);
}

int cmd_train(const CommonOptions& opts) {
    const ExperimentConfig cfg = resolve(opts);
    fs::create_directories(cfg.output_dir);
    const SampleSet data = build_dataset(cfg.dataset, cfg.train.seed_data);
    const LatentSet latents = make_fixed_latents(cfg.train.k, cfg.train.latent_dim, cfg.train.seed_latent);

    RunRecord record;
    record.dataset = cfg.dataset.name;
    record.config_hash = config_hash(cfg);
    record.config_text = canonical_config(cfg);
    record.precision = precision_name(cfg.precision);
    const fs::path record_path = cfg.output_dir / "record.json";
    for (const auto& entry : cfg.sweep) {
        std::cerr << "training " << entry.label() << "\n";
        RegimeRecord rr = run_regime(cfg, entry, data, latents, cfg.output_dir, false);
        const bool failed = rr.status != "complete";
        std::cerr << "  " << rr.status << " after " << rr.iterations << " iterations ("
                  << (rr.converged ? "converged" : "iteration cap") << ", " << rr.seconds << " s)\n";
        if (failed) std::cerr << "  error: " << rr.error << "\n";
        record.regimes.push_back(std::move(rr));
        save_record(record, record_path);
        if (failed) return 1;
    }
    record.complete = true;
    save_record(record, record_path);
    return 0;
}

int cmd_sweep(const CommonOptions& opts) {
    const ExperimentConfig cfg = resolve(opts);
    std::cerr << "sweep over " << cfg.sweep.size() << " regimes into " << cfg.output_dir << "\n";
    const RunRecord record = run_experiment(cfg);
    for (const auto& rr : record.regimes) {
        std::printf("== %s: %llu iterations%s\n", rr.entry.label().c_str(),
                    static_cast<unsigned long long>(rr.iterations), rr.converged ? " (converged)" : "");
        print_reports(rr.reports);
    }
    std::printf("table: %s\n", (cfg.output_dir / record.table).string().c_str());
    return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint, const std::string& table) {
    const ExperimentConfig cfg = resolve(opts);
    const auto reports = evaluate_checkpoint(cfg, checkpoint);
    print_reports(reports);
    if (!table.empty()) {
        RunRecord rec;
        rec.dataset = cfg.dataset.name;
        RegimeRecord rr;
        rr.entry = cfg.sweep.front();
        rr.reports = reports;
        rec.regimes.push_back(rr);
        emit_table({rec}, table);
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
    std::vector<RunRecord> records;
    for (const auto& r : runs) {
        fs::path p = r;
        if (fs::is_directory(p)) p /= "record.json";
        RunRecord rec = load_record(p);
        if (!rec.complete) std::cerr << "warning: " << p << " is incomplete; reporting finished regimes only\n";
        records.push_back(std::move(rec));
    }
    emit_table(records, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN training lab: stochasticity regimes and nearest-neighbour diagnostics"};
    app.require_subcommand(1);

    CommonOptions train_opts, eval_opts, sweep_opts;
    auto* train = app.add_subcommand("train", "Train every sweep entry of a config (no evaluation)");
    add_common(train, train_opts);

    auto* eval = app.add_subcommand("eval", "Evaluate the EMA generator stored in a checkpoint");
    add_common(eval, eval_opts);
    std::string checkpoint, eval_table;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train or sweep")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--table", eval_table, "Also write the reports as a CSV table");

    auto* sweep = app.add_subcommand("sweep", "Train and evaluate every sweep entry, then write the table");
    add_common(sweep, sweep_opts);

    auto* report = app.add_subcommand("report", "Combine run records into one CSV table");
    std::vector<std::string> runs;
    std::string report_out = "table.csv";
    report->add_option("runs", runs, "Run directories or record.json files")->required();
    report->add_option("--out", report_out, "Output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(train_opts);
        if (*eval) return cmd_eval(eval_opts, checkpoint, eval_table);
        if (*sweep) return cmd_sweep(sweep_opts);
        if (*report) return cmd_report(runs, report_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
