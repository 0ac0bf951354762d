#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "snpnet/model_io.h"
#include "snpnet/pipeline.h"
#include "test_util.h"

using namespace snpnet;
using namespace snpnet::testing;
using nlohmann::json;
namespace sp = snpnet::pipeline;

namespace
{

std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nn::TrainConfig quick_train()
{
    nn::TrainConfig t;
    t.learning_rate = 0.01;
    t.hidden_dropout = 0.0;
    t.epochs_max = 8;
    t.early_stop_patience = 4;
    return t;
}

// Small simulated run that exercises every stage in a few seconds.
sp::PipelineConfig small_config(const std::filesystem::path& out, std::uint64_t seed = 3)
{
    sp::PipelineConfig cfg;
    sim::SimSpec s;
    s.n_samples = 300;
    s.n_variants = 300;
    s.n_marginal = 4;
    s.n_epistatic_pairs = 2;
    s.marginal_odds_ratio = 2.0;
    s.base_prevalence = 0.2;
    cfg.simulate = s;
    cfg.thresholds = {5e-2, 5e-3, 1e-30};
    cfg.stack_sizes = {20, 10};
    cfg.baseline_train = quick_train();
    cfg.finetune_train = quick_train();
    cfg.autoencoder.base = quick_train();
    cfg.autoencoder.base.epochs_max = 4;
    cfg.comparison_threshold = 5e-3;
    cfg.output_dir = out;
    cfg.set_seed(seed);
    return cfg;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(SNPNET_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(PipelineConfig, DefaultsAndValidation)
{
    sp::PipelineConfig cfg;
    EXPECT_EQ(cfg.thresholds, (std::vector<double>{5e-3, 5e-4, 5e-5, 5e-6, 5e-7, 5e-8}));
    EXPECT_EQ(cfg.stack_sizes, (std::vector<std::size_t>{2000, 1000, 500, 200, 100, 50}));
    ASSERT_EQ(cfg.baseline_head.size(), 5u);
    for (std::size_t l = 0; l < 4; ++l)
    {
        EXPECT_EQ(cfg.baseline_head[l].size, 10u);
        EXPECT_EQ(cfg.stack_head[l].size, 10u);
    }
    cfg.simulate = sim::SimSpec{};
    EXPECT_NO_THROW(cfg.validate());

    auto bad = cfg;
    bad.thresholds = {5e-8, 5e-3};
    EXPECT_EQ(error_code([&] { bad.validate(); }), Errc::ConfigInvalid);
    bad = cfg;
    bad.stack_sizes = {50, 100};
    EXPECT_EQ(error_code([&] { bad.validate(); }), Errc::ConfigInvalid);
    bad = cfg;
    bad.simulate.reset();
    EXPECT_EQ(error_code([&] { bad.validate(); }), Errc::ConfigInvalid);
    bad = cfg;
    bad.plink_prefix = "x";
    EXPECT_EQ(error_code([&] { bad.validate(); }), Errc::ConfigInvalid);
}

TEST(PipelineConfig, JsonRoundTrip)
{
    TempDir dir;
    auto cfg = small_config(dir.path());
    cfg.depth_learning_rates = {1e-3, 1e-4};
    cfg.freeze_encoders = true;
    const auto text = sp::config_to_json(cfg);
    EXPECT_EQ(sp::config_to_json(sp::config_from_json(text)), text);
    EXPECT_EQ(error_code([] { (void)sp::config_from_json("{not json"); }), Errc::ConfigInvalid);

    const auto fidelity = sp::PipelineConfig::fidelity();
    EXPECT_EQ(fidelity.depth_learning_rates.size(), 6u);
    EXPECT_TRUE(fidelity.per_split_f1);
}

TEST(PipelineConfig, SeedPropagatesToSimulation)
{
    sp::PipelineConfig cfg;
    cfg.simulate = sim::SimSpec{};
    cfg.set_seed(42);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.simulate->seed, 42u);
}

TEST(OutputLock, IsExclusive)
{
    TempDir dir;
    {
        sp::OutputLock a(dir.path());
        EXPECT_EQ(error_code([&] { sp::OutputLock b(dir.path()); }), Errc::OutputLocked);
    }
    EXPECT_NO_THROW(sp::OutputLock c(dir.path()));
}

TEST(ThresholdLabel, Examples)
{
    EXPECT_EQ(sp::threshold_label(5e-3), "5e-03");
    EXPECT_EQ(sp::threshold_label(5e-8), "5e-08");
}

TEST(ReportBundle, FreshDirectoryHasNoArtifacts)
{
    TempDir dir;
    EXPECT_EQ(error_code([&] { (void)sp::report_bundle(dir.path()); }), Errc::NoArtifacts);
}

TEST(RunAll, SmallSimulationEndToEnd)
{
    TempDir dir;
    const auto cfg = small_config(dir / "a");
    const auto summary = sp::run_all(cfg);
    EXPECT_EQ(summary.row_count, cfg.thresholds.size() + cfg.stack_sizes.size());

    const auto j = json::parse(summary.json);
    std::size_t skipped = 0;
    for (const auto& row : j.at("rows"))
    {
        if (row.at("skipped").get<bool>())
        {
            ++skipped;
            EXPECT_FALSE(row.at("skip_reason").get<std::string>().empty());
            continue;
        }
        for (const char* split : {"valid", "test"})
        {
            for (const char* metric : {"sensitivity", "specificity", "gini", "logloss", "auc", "mse"})
            {
                EXPECT_TRUE(row.at(split).contains(metric)) << metric;
            }
            const double auc = row.at(split).at("auc").get<double>();
            EXPECT_NEAR(row.at(split).at("gini").get<double>(), 2.0 * auc - 1.0, 1e-12);
        }
    }
    // 1e-30 passes nothing.
    EXPECT_EQ(skipped, 1u);

    // Stack widths are the configured sizes clipped to the subset width.
    const auto stack = io::read_stack(cfg.output_dir / "stack" / "stack.bin");
    ASSERT_EQ(stack.depth(), cfg.stack_sizes.size());
    const auto expect_sizes = ae::clip_stack_sizes(cfg.stack_sizes, stack.input_dim);
    for (std::size_t k = 1; k <= stack.depth(); ++k)
    {
        EXPECT_EQ(stack.layers[k - 1].hidden_size, expect_sizes[k - 1]);
        const auto r = json::parse(read_text(cfg.output_dir / "stack" / ("depth_" + std::to_string(k)) / "report.json"));
        EXPECT_EQ(r.at("n_features").get<std::size_t>(), expect_sizes[k - 1]);
        EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "stack" / ("depth_" + std::to_string(k)) / "roc_test.csv"));
        EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "stack" / ("depth_" + std::to_string(k)) / "history.csv"));
    }
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "report" / "summary.txt"));
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "report" / "metrics.json"));
    EXPECT_FALSE(std::filesystem::exists(cfg.output_dir / ".lock"));

    // Autoencoder pretraining saw training rows only.
    const auto split = json::parse(read_text(cfg.output_dir / "scan" / "split.json"));
    const auto train = split.at("train").get<std::vector<std::size_t>>();
    std::set<std::size_t> held_out;
    for (const char* part : {"valid", "test"})
    {
        for (auto i : split.at(part).get<std::vector<std::size_t>>())
        {
            held_out.insert(i);
        }
    }
    std::istringstream rows(read_text(cfg.output_dir / "stack" / "pretrain_rows.csv"));
    std::string line;
    std::getline(rows, line);
    std::vector<std::size_t> pretrain;
    while (std::getline(rows, line))
    {
        const auto i = static_cast<std::size_t>(std::stoull(line.substr(0, line.find(','))));
        EXPECT_EQ(held_out.count(i), 0u) << i;
        pretrain.push_back(i);
    }
    EXPECT_EQ(pretrain, train);

    // Same seed, fresh directory: identical metrics.
    const auto again = small_config(dir / "b");
    sp::run_all(again);
    EXPECT_EQ(read_text(cfg.output_dir / "report" / "metrics.json"),
              read_text(again.output_dir / "report" / "metrics.json"));

    // Re-scoring a saved model reproduces its report.
    const auto eval = sp::stage_evaluate(cfg, "baseline", 5e-2, std::nullopt);
    const auto stored = json::parse(read_text(cfg.output_dir / "baseline" / "5e-02" / "report.json"));
    EXPECT_DOUBLE_EQ(eval.test.auc, stored.at("test").at("auc").get<double>());
    EXPECT_DOUBLE_EQ(eval.valid.logloss, stored.at("valid").at("logloss").get<double>());
    EXPECT_EQ(error_code([&] { (void)sp::stage_evaluate(cfg, "stack", std::nullopt, 9); }), Errc::NoArtifacts);
}

TEST(Stages, RunIndependentlyFromArtifacts)
{
    TempDir dir;
    const auto cfg = small_config(dir / "s", 5);
    sp::stage_simulate(cfg);
    const auto qc = sp::stage_qc(cfg);
    EXPECT_LE(qc.samples_after, qc.samples_before);
    EXPECT_EQ(sp::stage_scan(cfg).size(), qc.variants_after);
    const auto rows = sp::run_baseline(cfg, 5e-2);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].key, "5e-02");
    EXPECT_EQ(sp::report_bundle(cfg.output_dir).row_count, 1u);

    // A rerun of one threshold reproduces its report byte for byte.
    const auto report = read_text(cfg.output_dir / "baseline" / "5e-02" / "report.json");
    sp::run_baseline(cfg, 5e-2);
    EXPECT_EQ(read_text(cfg.output_dir / "baseline" / "5e-02" / "report.json"), report);

    // Later stages create missing upstream artifacts themselves.
    const auto fresh = small_config(dir / "t", 5);
    EXPECT_EQ(sp::run_baseline(fresh, 5e-2).size(), 1u);
    EXPECT_EQ(read_text(fresh.output_dir / "baseline" / "5e-02" / "report.json"), report);
}

TEST(Cli, ExitCodes)
{
    TempDir dir;
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("report --output " + (dir / "empty").string()), 3);

    const auto cfg_path = dir / "bad.json";
    std::ofstream(cfg_path) << R"({"simulate": {"n_samples": 100, "n_variants": 50}, "thresholds": [1e-8, 1e-3]})";
    EXPECT_EQ(run_cli("--config " + cfg_path.string() + " --output " + (dir / "o").string() + " simulate"), 2);

    auto cfg = small_config(dir / "cli");
    std::ofstream(dir / "good.json") << sp::config_to_json(cfg);
    EXPECT_EQ(run_cli("--config " + (dir / "good.json").string() + " simulate"), 0);
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "data" / "manifest.json"));
    EXPECT_EQ(run_cli("--config " + (dir / "good.json").string() + " baseline --threshold 0.05"), 0);
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "baseline" / "5e-02" / "report.json"));
    EXPECT_EQ(run_cli("--config " + (dir / "good.json").string() + " evaluate stack --depth 1"), 3);
}
