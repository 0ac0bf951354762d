#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snpnet/assoc.h"
#include "snpnet/autoencoder.h"
#include "snpnet/genotype.h"
#include "snpnet/metrics.h"
#include "snpnet/network.h"
#include "snpnet/qc.h"
#include "snpnet/simdata.h"

namespace snpnet::pipeline
{

struct PipelineConfig
{
    // Exactly one data source: a PLINK prefix or a simulation spec.
    std::optional<std::string> plink_prefix;
    std::optional<sim::SimSpec> simulate;
    bool simulate_seed_explicit = false;

    qc::QcThresholds qc;
    bool run_qc = true;

    std::vector<double> thresholds{5e-3, 5e-4, 5e-5, 5e-6, 5e-7, 5e-8};
    std::vector<std::size_t> stack_sizes{2000, 1000, 500, 200, 100, 50};
    // Layers after the input: hidden layers then the output layer.
    std::vector<nn::LayerSpec> baseline_head;
    std::vector<nn::LayerSpec> stack_head;

    nn::TrainConfig baseline_train;
    nn::TrainConfig finetune_train;
    ae::SparseAeConfig autoencoder;
    // Fine-tuning learning rate per stack depth; empty = finetune_train's.
    std::vector<double> depth_learning_rates;
    bool freeze_encoders = false;
    // Pick the F1-optimal cutoff separately on each split instead of reusing
    // the validation cutoff for the test report.
    bool per_split_f1 = false;
    // Baseline threshold the deepest stack layer is compared against.
    double comparison_threshold = 5e-5;

    std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
    std::filesystem::path output_dir = "snpnet_out";
    std::uint64_t seed = 1;
    unsigned threads = 1;

    PipelineConfig();

    /// Published settings including per-depth fine-tuning rates and per-split
    /// F1 thresholds.
    static PipelineConfig fidelity();

    /// Sets the master seed (and the simulation seed unless given explicitly).
    void set_seed(std::uint64_t s);

    /// Throws ConfigInvalid.
    void validate() const;
};

PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// Exclusive ownership of an output directory through `<dir>/.lock`.
class OutputLock
{
public:
    /// Throws OutputLocked when another run holds the directory.
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Directory-name label of a p-value threshold, e.g. "5e-03".
std::string threshold_label(double t);

struct EvalRow
{
    std::string stage;  // "baseline" or "stack"
    std::string key;    // threshold label or "depth_<k>"
    double threshold = 0.0;
    std::size_t depth = 0;
    std::size_t n_features = 0;
    bool skipped = false;
    std::string skip_reason;
    std::size_t best_epoch = 0;
    double f1_threshold_valid = 0.5;
    double f1_threshold_test = 0.5;
    metrics::EvalReport valid;
    metrics::EvalReport test;
};

// Stage entry points. Each reads and writes only artifacts under
// cfg.output_dir so stages can be rerun independently.
void stage_simulate(const PipelineConfig& cfg);
qc::QcReport stage_qc(const PipelineConfig& cfg);
std::vector<assoc::AssocResult> stage_scan(const PipelineConfig& cfg);
std::vector<EvalRow> run_baseline(const PipelineConfig& cfg, std::optional<double> only_threshold = std::nullopt);
std::vector<EvalRow> run_stack_experiment(const PipelineConfig& cfg, std::optional<std::size_t> only_depth = std::nullopt);
/// Re-scores a saved model ("baseline" + threshold or "stack" + depth) and
/// writes output_dir/evaluate/<key>.json.
EvalRow stage_evaluate(const PipelineConfig& cfg, const std::string& stage, std::optional<double> threshold,
                       std::optional<std::size_t> depth);

struct Summary
{
    std::string json;
    std::string text;
    std::size_t row_count = 0;
};

/// Collates every stage artifact under output_dir into report/summary.json
/// and report/summary.txt. Throws NoArtifacts.
Summary report_bundle(const std::filesystem::path& output_dir);

/// simulate (when configured), qc, scan, baseline, stack, report.
Summary run_all(const PipelineConfig& cfg);

/// Artifacts shared by the learning stages.
struct Prepared
{
    Dataset dataset;
    sim::SplitIndices split;
    std::vector<assoc::AssocResult> scan;
};

Prepared load_prepared(const PipelineConfig& cfg);

/// Features x samples matrix restricted to `rows`.
Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& design, std::span<const std::size_t> rows);
std::vector<int> labels_for(const Dataset& ds, std::span<const std::size_t> rows);

}  // namespace snpnet::pipeline
