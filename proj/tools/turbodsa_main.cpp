// SPDX-License-Identifier: Apache-2.0
//
// Batch front end: vocabulary building, training, SNR-sweep evaluation and
// figure emission. Exit codes: 0 success, 1 runtime failure, 2 usage/config
// error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "turbodsa/config.hpp"
#include "turbodsa/errors.hpp"
#include "turbodsa/metrics.hpp"
#include "turbodsa/svg_plot.hpp"
#include "turbodsa/text_corpus.hpp"
#include "turbodsa/training.hpp"

namespace fs = std::filesystem;
using namespace turbodsa;

namespace {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed,
                           const RunConfig& cfg) {
    if (cli_seed) return *cli_seed;
    if (const char* env = std::getenv("TURBODSA_SEED")) {
        try {
            return static_cast<std::uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError("TURBODSA_SEED is not an integer");
        }
    }
    return cfg.seeds.front();
}

int cmd_build_vocab(const std::string& corpus, std::size_t min_freq, const std::string& out) {
    Vocabulary vocab = Vocabulary::build(corpus, min_freq);
    if (fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    vocab.save(out);
    std::cout << "vocabulary size " << vocab.size() << " written to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed_opt,
              const std::string& resume) {
    RunConfig cfg = RunConfig::from_json_file(config_path);
    TrainOptions opts;
    opts.seed = resolve_seed(seed_opt, cfg);
    opts.resume_path = resume;
    TrainResult result = train(cfg, opts);
    if (result.diverged) {
        std::cerr << "divergence: loss became non-finite; last good checkpoint at "
                  << result.checkpoint_path << "\n";
        return 1;
    }
    std::cout << "trained " << result.epochs_run << " epochs"
              << (result.converged ? " (converged)" : "") << ", final loss " << std::setprecision(6)
              << result.final_loss << "\n";
    std::cout << "checkpoint: " << result.checkpoint_path << "\n";
    std::cout << "loss log:   " << result.loss_log_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& snr_text, const std::string& metrics_text,
                 const std::string& split_text, std::size_t iterations,
                 const std::optional<std::uint64_t>& seed_opt, std::string out_path) {
    RunConfig cfg = RunConfig::from_json_file(config_path);
    EvalOptions opts;
    opts.snrs = parse_snr_grid(snr_text);
    opts.seed = resolve_seed(seed_opt, cfg);
    opts.turbo_iterations = iterations;

    std::set<std::string> metrics;
    std::stringstream ms(metrics_text);
    std::string item;
    while (std::getline(ms, item, ',')) metrics.insert(item);
    opts.with_bleu = metrics.count("bleu") > 0;
    opts.with_ss = metrics.count("ss") > 0;
    opts.with_loss = metrics.count("loss") > 0;
    if (!opts.with_bleu && !opts.with_ss && !opts.with_loss)
        throw ConfigError("no known metric in --metrics (expected bleu, ss or loss)");

    if (split_text == "train")
        opts.split = EvalOptions::Split::train;
    else if (split_text == "validation")
        opts.split = EvalOptions::Split::validation;
    else if (split_text == "all")
        opts.split = EvalOptions::Split::all;
    else
        throw ConfigError("unknown split: " + split_text);

    MetricReport report = evaluate(cfg, checkpoint, opts);

    if (out_path.empty()) {
        fs::create_directories(cfg.output_dir);
        out_path = (fs::path(cfg.output_dir) /
                    ("report_" + cfg.model.architecture + "_seed" +
                     std::to_string(opts.seed) + ".csv"))
                       .string();
    } else if (fs::path(out_path).has_parent_path()) {
        fs::create_directories(fs::path(out_path).parent_path());
    }
    report.save_csv(out_path);

    std::cout << "report written to " << out_path << "\n";
    std::cout << std::setw(8) << "snr_db" << std::setw(12) << "metric" << std::setw(8)
              << "ngram" << std::setw(12) << "value"
              << "\n";
    for (const auto& row : report.rows) {
        std::cout << std::setw(8) << row.snr_db << std::setw(12) << row.metric << std::setw(8)
                  << (row.ngram ? std::to_string(*row.ngram) : "-") << std::setw(12)
                  << std::fixed << std::setprecision(4) << row.value << "\n";
        std::cout.unsetf(std::ios::fixed);
    }
    return 0;
}

int cmd_plot(const std::vector<std::string>& report_paths, const std::string& out_dir,
             const std::string& style) {
    if (style != "line" && style != "box") throw ConfigError("style must be line or box");
    MetricReport merged;
    for (const auto& path : report_paths) {
        MetricReport r = MetricReport::load_csv(path);
        merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
    }
    if (merged.rows.empty()) throw std::runtime_error("empty report: nothing to plot");
    fs::create_directories(out_dir);

    // figures are keyed by (metric, ngram); models overlay inside one figure
    std::set<std::pair<std::string, int>> figures;
    for (const auto& row : merged.rows)
        figures.insert({row.metric, row.ngram ? *row.ngram : 0});

    std::size_t written = 0;
    for (const auto& [metric, ngram] : figures) {
        std::string stem = metric;
        if (metric == "bleu") stem += "-" + std::to_string(ngram);
        const std::string fig_path = (fs::path(out_dir) / (stem + ".svg")).string();
        const std::string csv_path = (fs::path(out_dir) / (stem + ".csv")).string();

        MetricReport tidy;
        // model -> snr -> values over seeds
        std::map<std::string, std::map<double, std::vector<double>>> grouped;
        for (const auto& row : merged.rows) {
            if (row.metric != metric || (row.ngram ? *row.ngram : 0) != ngram) continue;
            tidy.rows.push_back(row);
            grouped[row.model][row.snr_db].push_back(row.value);
        }
        tidy.save_csv(csv_path);

        const std::string title = stem + " vs SNR";
        if (style == "line") {
            std::vector<PlotSeries> series;
            for (const auto& [model, by_snr] : grouped) {
                PlotSeries s;
                s.label = model;
                for (const auto& [snr, values] : by_snr) {
                    double mean = 0.0;
                    for (double v : values) mean += v;
                    s.points.emplace_back(snr, mean / static_cast<double>(values.size()));
                }
                series.push_back(std::move(s));
            }
            write_line_plot_svg(fig_path, title, "SNR (dB)", stem, series);
        } else {
            std::vector<BoxSeries> series;
            for (const auto& [model, by_snr] : grouped) {
                BoxSeries s;
                s.label = model;
                for (const auto& [snr, values] : by_snr) s.groups.emplace_back(snr, values);
                series.push_back(std::move(s));
            }
            write_box_plot_svg(fig_path, title, "SNR (dB)", stem, series);
        }
        ++written;
        std::cout << "wrote " << fig_path << " and " << csv_path << "\n";
    }
    std::cout << written << " figure(s) in " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic communication toolkit: trainable transformer+turbo text "
                 "transceiver over simulated maritime channels"};
    app.require_subcommand(1);

    // build-vocab
    auto* sc_vocab = app.add_subcommand("build-vocab", "Build a vocabulary file from a corpus");
    std::string vocab_corpus, vocab_out;
    std::size_t vocab_min_freq = 1;
    sc_vocab->add_option("--corpus", vocab_corpus, "corpus file, one sentence per line")
        ->required();
    sc_vocab->add_option("--min-freq", vocab_min_freq, "minimum token frequency");
    sc_vocab->add_option("--out", vocab_out, "output vocabulary file")->required();

    // train
    auto* sc_train = app.add_subcommand("train", "Train a model end to end");
    std::string train_config, train_resume;
    std::optional<std::uint64_t> train_seed;
    sc_train->add_option("--config", train_config, "run configuration JSON")->required();
    sc_train->add_option("--seed", train_seed, "override the run seed");
    sc_train->add_option("--resume", train_resume, "checkpoint to resume from");

    // evaluate
    auto* sc_eval = app.add_subcommand("evaluate", "Sweep SNR points and write a metric report");
    std::string eval_config, eval_ckpt, eval_snr, eval_metrics = "bleu,ss";
    std::string eval_split = "validation", eval_out;
    std::size_t eval_iterations = 0;
    std::optional<std::uint64_t> eval_seed;
    sc_eval->add_option("--config", eval_config, "run configuration JSON")->required();
    sc_eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
    sc_eval->add_option("--snr", eval_snr, "grid start:stop:step or a single value")->required();
    sc_eval->add_option("--metrics", eval_metrics, "comma list of bleu,ss,loss");
    sc_eval->add_option("--split", eval_split, "train | validation | all");
    sc_eval->add_option("--iterations", eval_iterations,
                        "override turbo decode iterations (0 keeps config)");
    sc_eval->add_option("--seed", eval_seed, "override the run seed");
    sc_eval->add_option("--out", eval_out, "report CSV path");

    // plot
    auto* sc_plot = app.add_subcommand("plot", "Render metric reports as SVG figures");
    std::vector<std::string> plot_reports;
    std::string plot_out = "plots", plot_style = "line";
    sc_plot->add_option("--report", plot_reports, "metric report CSV (repeatable)")->required();
    sc_plot->add_option("--out", plot_out, "output directory");
    sc_plot->add_option("--style", plot_style, "line | box");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sc_vocab->parsed()) return cmd_build_vocab(vocab_corpus, vocab_min_freq, vocab_out);
        if (sc_train->parsed()) return cmd_train(train_config, train_seed, train_resume);
        if (sc_eval->parsed())
            return cmd_evaluate(eval_config, eval_ckpt, eval_snr, eval_metrics, eval_split,
                                eval_iterations, eval_seed, eval_out);
        if (sc_plot->parsed()) return cmd_plot(plot_reports, plot_out, plot_style);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
