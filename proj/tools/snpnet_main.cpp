#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "snpnet/error.h"
#include "snpnet/pipeline.h"

namespace
{

enum ExitCode
{
    kOk = 0,
    kValidation = 2,
    kRuntime = 3,
};

bool is_validation(snpnet::Errc c)
{
    using snpnet::Errc;
    return c == Errc::ConfigInvalid || c == Errc::SpecInvalid || c == Errc::DepthOutOfRange;
}

}  // namespace

int main(int argc, char** argv)
{
    namespace sp = snpnet::pipeline;

    CLI::App app{"snpnet: GWAS QC, association filtering and stacked-autoencoder classifiers"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string preset = "default";
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--output", output, "Output directory");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--preset", preset, "Preset used when no config is given")
        ->check(CLI::IsMember({"default", "fidelity"}));

    std::optional<double> threshold;
    std::optional<std::size_t> depth;
    std::string eval_stage;
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic dataset and its ground-truth manifest");
    auto* qc = app.add_subcommand("qc", "Individual and marker quality control");
    auto* scan = app.add_subcommand("scan", "Split samples and run the per-variant logistic scan");
    auto* baseline = app.add_subcommand("baseline", "Train baseline classifiers per p-value threshold");
    baseline->add_option("--threshold", threshold, "Run a single threshold");
    auto* stack = app.add_subcommand("stack", "Pretrain the autoencoder stack and fine-tune per depth");
    stack->add_option("--depth", depth, "Run a single depth");
    auto* evaluate = app.add_subcommand("evaluate", "Re-score a trained model on the validation and test splits");
    evaluate->add_option("stage", eval_stage, "baseline or stack")
        ->required()
        ->check(CLI::IsMember({"baseline", "stack"}));
    evaluate->add_option("--threshold", threshold, "Baseline threshold");
    evaluate->add_option("--depth", depth, "Stack depth");
    auto* report = app.add_subcommand("report", "Collate stage artifacts into a summary");
    auto* run = app.add_subcommand("run", "Run every stage in order");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    try
    {
        sp::PipelineConfig cfg;
        if (!config_path.empty())
        {
            cfg = sp::load_config(config_path);
        }
        else
        {
            if (preset == "fidelity")
            {
                cfg = sp::PipelineConfig::fidelity();
            }
            cfg.simulate = snpnet::sim::SimSpec{};
            cfg.simulate->seed = cfg.seed;
        }
        if (!output.empty())
        {
            cfg.output_dir = output;
        }
        if (seed)
        {
            cfg.set_seed(*seed);
        }
        if (threads)
        {
            cfg.threads = *threads;
            cfg.qc.threads = *threads;
        }

        if (report->parsed())
        {
            const auto s = sp::report_bundle(cfg.output_dir);
            std::cout << s.text;
            return kOk;
        }
        cfg.validate();
        if (run->parsed())
        {
            const auto s = sp::run_all(cfg);
            std::cout << s.text;
            return kOk;
        }

        sp::OutputLock lock(cfg.output_dir);
        if (simulate->parsed())
        {
            sp::stage_simulate(cfg);
            std::cout << "wrote " << (cfg.output_dir / "data").string() << "\n";
        }
        else if (qc->parsed())
        {
            const auto r = sp::stage_qc(cfg);
            std::cout << "samples " << r.samples_before << " -> " << r.samples_after << ", variants "
                      << r.variants_before << " -> " << r.variants_after << "\n";
        }
        else if (scan->parsed())
        {
            const auto r = sp::stage_scan(cfg);
            std::cout << "scanned " << r.size() << " variants\n";
        }
        else if (baseline->parsed())
        {
            for (const auto& row : sp::run_baseline(cfg, threshold))
            {
                std::cout << row.key << (row.skipped ? " skipped" : " test auc " + std::to_string(row.test.auc))
                          << "\n";
            }
        }
        else if (stack->parsed())
        {
            for (const auto& row : sp::run_stack_experiment(cfg, depth))
            {
                std::cout << row.key << " test auc " << row.test.auc << "\n";
            }
        }
        else if (evaluate->parsed())
        {
            const auto row = sp::stage_evaluate(cfg, eval_stage, threshold, depth);
            std::cout << row.stage << ' ' << row.key << " valid auc " << row.valid.auc << " test auc "
                      << row.test.auc << "\n";
        }
        return kOk;
    }
    catch (const snpnet::Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return is_validation(e.code()) ? kValidation : kRuntime;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
