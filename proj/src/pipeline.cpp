#include "snpnet/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "snpnet/error.h"
#include "snpnet/model_io.h"
#include "snpnet/plink_io.h"
#include "snpnet/rng.h"

namespace snpnet::pipeline
{

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using io::plink_paths;
using io::read_bed_dataset;
using io::write_bed_dataset;

namespace
{

// derive_seed streams for the individual stages.
constexpr std::uint64_t kSplitSeed = 11;
constexpr std::uint64_t kBaselineInit = 100;
constexpr std::uint64_t kBaselineTrain = 200;
constexpr std::uint64_t kStackSeed = 300;
constexpr std::uint64_t kHeadInit = 400;
constexpr std::uint64_t kFinetuneTrain = 500;

const std::vector<nn::LayerSpec>& default_head()
{
    static const std::vector<nn::LayerSpec> head{
        {10, nn::Activation::Rectifier}, {10, nn::Activation::Rectifier}, {10, nn::Activation::Rectifier},
        {10, nn::Activation::Rectifier}, {1, nn::Activation::Sigmoid},
    };
    return head;
}

std::string read_text(const fs::path& p)
{
    std::ifstream in(p);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + p.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text)
{
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc);
    out << text;
    if (!out)
    {
        throw Error(Errc::IoFailure, "failed writing " + p.string());
    }
}

json train_to_json(const nn::TrainConfig& c)
{
    json j;
    j["learning_rate"] = c.learning_rate;
    j["rate_annealing"] = c.rate_annealing;
    j["rate_decay"] = c.rate_decay;
    j["weight_decay"] = c.weight_decay;
    j["momentum_start"] = c.momentum_start;
    j["momentum_ramp"] = c.momentum_ramp;
    j["momentum_stable"] = c.momentum_stable;
    j["epochs_max"] = c.epochs_max;
    j["hidden_dropout"] = c.hidden_dropout;
    j["input_dropout"] = c.input_dropout;
    j["early_stop_patience"] = c.early_stop_patience;
    j["batch_size"] = c.batch_size;
    j["loss"] = nn::loss_name(c.loss);
    return j;
}

nn::TrainConfig train_from_json(const json& j, nn::TrainConfig c)
{
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.rate_annealing = j.value("rate_annealing", c.rate_annealing);
    c.rate_decay = j.value("rate_decay", c.rate_decay);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.momentum_start = j.value("momentum_start", c.momentum_start);
    c.momentum_ramp = j.value("momentum_ramp", c.momentum_ramp);
    c.momentum_stable = j.value("momentum_stable", c.momentum_stable);
    c.epochs_max = j.value("epochs_max", c.epochs_max);
    c.hidden_dropout = j.value("hidden_dropout", c.hidden_dropout);
    c.input_dropout = j.value("input_dropout", c.input_dropout);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("loss"))
    {
        c.loss = nn::parse_loss(j.at("loss").get<std::string>());
    }
    return c;
}

json layers_to_json(const std::vector<nn::LayerSpec>& layers)
{
    json a = json::array();
    for (const auto& l : layers)
    {
        a.push_back({{"size", l.size}, {"activation", nn::activation_name(l.activation)}});
    }
    return a;
}

std::vector<nn::LayerSpec> layers_from_json(const json& a)
{
    std::vector<nn::LayerSpec> out;
    for (const auto& e : a)
    {
        out.push_back({e.at("size").get<std::size_t>(),
                       nn::parse_activation(e.value("activation", std::string("rectifier")))});
    }
    return out;
}

json qc_to_json(const qc::QcThresholds& t)
{
    json j;
    j["sample_missing_max"] = t.sample_missing_max;
    j["het_sd_window"] = t.het_sd_window;
    j["sex_homozygosity_low"] = t.sex_homozygosity_low;
    j["sex_homozygosity_high"] = t.sex_homozygosity_high;
    j["ibd_max"] = t.ibd_max;
    j["pc1_min"] = t.pc1_min;
    j["pc2_min"] = t.pc2_min;
    j["diff_missing_p"] = t.diff_missing_p;
    j["maf_min"] = t.maf_min;
    j["variant_call_rate_min"] = t.variant_call_rate_min;
    j["hwe_p_min"] = t.hwe_p_min;
    j["apply_pca_filter"] = t.apply_pca_filter;
    j["pca_components"] = t.pca_components;
    j["ld_thin_max_variants"] = t.ld_thin_max_variants;
    return j;
}

qc::QcThresholds qc_from_json(const json& j, qc::QcThresholds t)
{
    t.sample_missing_max = j.value("sample_missing_max", t.sample_missing_max);
    t.het_sd_window = j.value("het_sd_window", t.het_sd_window);
    t.sex_homozygosity_low = j.value("sex_homozygosity_low", t.sex_homozygosity_low);
    t.sex_homozygosity_high = j.value("sex_homozygosity_high", t.sex_homozygosity_high);
    t.ibd_max = j.value("ibd_max", t.ibd_max);
    t.pc1_min = j.value("pc1_min", t.pc1_min);
    t.pc2_min = j.value("pc2_min", t.pc2_min);
    t.diff_missing_p = j.value("diff_missing_p", t.diff_missing_p);
    t.maf_min = j.value("maf_min", t.maf_min);
    t.variant_call_rate_min = j.value("variant_call_rate_min", t.variant_call_rate_min);
    t.hwe_p_min = j.value("hwe_p_min", t.hwe_p_min);
    t.apply_pca_filter = j.value("apply_pca_filter", t.apply_pca_filter);
    t.pca_components = j.value("pca_components", t.pca_components);
    t.ld_thin_max_variants = j.value("ld_thin_max_variants", t.ld_thin_max_variants);
    return t;
}

json sim_to_json(const sim::SimSpec& s)
{
    json j;
    j["n_samples"] = s.n_samples;
    j["n_variants"] = s.n_variants;
    j["maf_range"] = {s.maf_low, s.maf_high};
    j["n_marginal"] = s.n_marginal;
    j["marginal_odds_ratio"] = s.marginal_odds_ratio;
    j["n_epistatic_pairs"] = s.n_epistatic_pairs;
    j["epistasis_model"] = sim::model_name(s.epistasis_model);
    j["epistatic_odds_ratio"] = s.epistatic_odds_ratio;
    j["base_prevalence"] = s.base_prevalence;
    j["missing_rate"] = s.missing_rate;
    j["n_x_variants"] = s.n_x_variants;
    j["n_diff_missing"] = s.n_diff_missing;
    j["diff_missing_rate"] = s.diff_missing_rate;
    j["seed"] = s.seed;
    return j;
}

sim::SimSpec sim_from_json(const json& j)
{
    sim::SimSpec s;
    s.n_samples = j.value("n_samples", s.n_samples);
    s.n_variants = j.value("n_variants", s.n_variants);
    if (j.contains("maf_range"))
    {
        s.maf_low = j.at("maf_range").at(0).get<double>();
        s.maf_high = j.at("maf_range").at(1).get<double>();
    }
    s.n_marginal = j.value("n_marginal", s.n_marginal);
    s.marginal_odds_ratio = j.value("marginal_odds_ratio", s.marginal_odds_ratio);
    s.n_epistatic_pairs = j.value("n_epistatic_pairs", s.n_epistatic_pairs);
    if (j.contains("epistasis_model"))
    {
        s.epistasis_model = sim::parse_model(j.at("epistasis_model").get<std::string>());
    }
    s.epistatic_odds_ratio = j.value("epistatic_odds_ratio", s.epistatic_odds_ratio);
    s.base_prevalence = j.value("base_prevalence", s.base_prevalence);
    s.missing_rate = j.value("missing_rate", s.missing_rate);
    s.n_x_variants = j.value("n_x_variants", s.n_x_variants);
    s.n_diff_missing = j.value("n_diff_missing", s.n_diff_missing);
    s.diff_missing_rate = j.value("diff_missing_rate", s.diff_missing_rate);
    s.seed = j.value("seed", s.seed);
    return s;
}

json eval_to_json(const metrics::EvalReport& r)
{
    return json::parse(metrics::eval_report_json(r));
}

json row_to_json(const EvalRow& r)
{
    json j;
    j["stage"] = r.stage;
    j["key"] = r.key;
    j["threshold"] = r.threshold;
    j["depth"] = r.depth;
    j["n_features"] = r.n_features;
    j["skipped"] = r.skipped;
    j["skip_reason"] = r.skip_reason;
    if (!r.skipped)
    {
        j["best_epoch"] = r.best_epoch;
        j["f1_threshold_valid"] = r.f1_threshold_valid;
        j["f1_threshold_test"] = r.f1_threshold_test;
        j["valid"] = eval_to_json(r.valid);
        j["test"] = eval_to_json(r.test);
    }
    return j;
}

fs::path data_prefix(const PipelineConfig& cfg)
{
    return cfg.output_dir / "data" / "sim";
}

fs::path clean_prefix(const PipelineConfig& cfg)
{
    return cfg.output_dir / "qc" / "clean";
}

void echo_config(const PipelineConfig& cfg)
{
    write_text(cfg.output_dir / "config.json", config_to_json(cfg) + "\n");
}

std::vector<std::size_t> labelled(const Dataset& ds, std::span<const std::size_t> rows)
{
    std::vector<std::size_t> out;
    for (auto r : rows)
    {
        if (ds.sample(r).phenotype != Phenotype::Missing)
        {
            out.push_back(r);
        }
    }
    return out;
}

/// Dosage design for the given columns; missing calls take the mean of the
/// column over the training rows.
Eigen::MatrixXd learning_design(const Dataset& ds, std::span<const std::size_t> columns,
                                std::span<const std::size_t> train_rows)
{
    Eigen::MatrixXd d(static_cast<Eigen::Index>(ds.n_samples()), static_cast<Eigen::Index>(columns.size()));
    std::vector<std::int8_t> col(ds.n_samples());
    for (std::size_t k = 0; k < columns.size(); ++k)
    {
        ds.column(columns[k], col);
        double sum = 0.0;
        std::size_t n = 0;
        for (auto r : train_rows)
        {
            if (col[r] != kMissingDosage)
            {
                sum += col[r];
                ++n;
            }
        }
        const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
        for (std::size_t i = 0; i < col.size(); ++i)
        {
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                col[i] == kMissingDosage ? mean : static_cast<double>(col[i]);
        }
    }
    return d;
}

struct Features
{
    assoc::SnpSubset subset;
    Eigen::MatrixXd design;
    std::vector<std::size_t> train, valid, test;
};

Features features_at(const Prepared& prep, double threshold)
{
    Features f;
    f.subset = assoc::threshold_filter(prep.scan, prep.dataset, threshold);
    f.train = labelled(prep.dataset, prep.split.train);
    f.valid = labelled(prep.dataset, prep.split.valid);
    f.test = labelled(prep.dataset, prep.split.test);
    f.design = learning_design(prep.dataset, f.subset.variant_index, f.train);
    return f;
}

void write_subset(const fs::path& path, const assoc::SnpSubset& s)
{
    std::ostringstream out;
    out << "variant_id\n";
    for (const auto& id : s.variant_ids)
    {
        out << id << '\n';
    }
    write_text(path, out.str());
}

void write_rows(const fs::path& path, std::span<const std::size_t> rows)
{
    std::ostringstream out;
    out << "row\n";
    for (auto r : rows)
    {
        out << r << '\n';
    }
    write_text(path, out.str());
}

/// Scores valid and test, choosing the cutoff on valid (or per split).
void score_row(EvalRow& row, const nn::NetworkParams& params, const Features& f, bool per_split_f1,
               const fs::path& dir, const Dataset& ds)
{
    const metrics::ScoredLabels valid{nn::predict(params, feature_matrix(f.design, f.valid)), labels_for(ds, f.valid)};
    const metrics::ScoredLabels test{nn::predict(params, feature_matrix(f.design, f.test)), labels_for(ds, f.test)};
    row.f1_threshold_valid = metrics::optimal_f1_threshold(valid).threshold;
    row.f1_threshold_test = per_split_f1 ? metrics::optimal_f1_threshold(test).threshold : row.f1_threshold_valid;
    row.valid = metrics::evaluate(valid, row.f1_threshold_valid);
    row.test = metrics::evaluate(test, row.f1_threshold_test);
    metrics::write_roc_csv(dir / "roc_valid.csv", row.valid.roc_points);
    metrics::write_roc_csv(dir / "roc_test.csv", row.test.roc_points);
}

void write_metrics_csv(const fs::path& path, std::span<const EvalRow> rows)
{
    std::ostringstream out;
    out << std::setprecision(17);
    out << "stage,key,n_features,split,f1_threshold,sensitivity,specificity,gini,logloss,auc,mse\n";
    auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("NA"); };
    for (const auto& r : rows)
    {
        if (r.skipped)
        {
            out << r.stage << ',' << r.key << ',' << r.n_features << ",skipped,NA,NA,NA,NA,NA,NA,NA\n";
            continue;
        }
        for (int s = 0; s < 2; ++s)
        {
            const auto& e = s == 0 ? r.valid : r.test;
            out << r.stage << ',' << r.key << ',' << r.n_features << ',' << (s == 0 ? "valid" : "test") << ','
                << e.threshold << ',' << opt(e.sensitivity) << ',' << opt(e.specificity) << ',' << e.gini << ','
                << e.logloss << ',' << e.auc << ',' << e.mse << '\n';
        }
    }
    write_text(path, out.str());
}

std::string model_config_json(const PipelineConfig& cfg, const nn::TrainConfig& tc, const std::string& stage)
{
    json j;
    j["stage"] = stage;
    j["train"] = train_to_json(tc);
    j["master_seed"] = cfg.seed;
    return j.dump();
}

Dataset load_source(const PipelineConfig& cfg)
{
    if (cfg.plink_prefix)
    {
        return read_bed_dataset(plink_paths(*cfg.plink_prefix));
    }
    const auto prefix = data_prefix(cfg);
    if (!fs::exists(plink_paths(prefix).bed))
    {
        stage_simulate(cfg);
    }
    return read_bed_dataset(plink_paths(prefix));
}

std::string fmt(double v, int prec = 4)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

}  // namespace

PipelineConfig::PipelineConfig() : baseline_head(default_head()), stack_head(default_head())
{
    autoencoder.hidden_size = stack_sizes.front();
}

PipelineConfig PipelineConfig::fidelity()
{
    PipelineConfig c;
    c.depth_learning_rates = {1e-3, 1e-3, 1e-4, 1e-5, 1e-5, 1e-6};
    c.per_split_f1 = true;
    return c;
}

void PipelineConfig::set_seed(std::uint64_t s)
{
    seed = s;
    if (simulate && !simulate_seed_explicit)
    {
        simulate->seed = s;
    }
}

void PipelineConfig::validate() const
{
    auto fail = [](const std::string& why) { throw Error(Errc::ConfigInvalid, why); };
    if (plink_prefix && simulate)
    {
        fail("give either a PLINK input or a simulation spec, not both");
    }
    if (!plink_prefix && !simulate)
    {
        fail("no data source: set input.plink_prefix or simulate");
    }
    if (thresholds.empty())
    {
        fail("threshold list is empty");
    }
    for (std::size_t k = 0; k < thresholds.size(); ++k)
    {
        if (!(thresholds[k] > 0.0 && thresholds[k] <= 1.0))
        {
            fail("thresholds must lie in (0,1]");
        }
        if (k > 0 && !(thresholds[k] < thresholds[k - 1]))
        {
            fail("thresholds must be strictly descending");
        }
    }
    if (stack_sizes.empty())
    {
        fail("stack sizes are empty");
    }
    for (std::size_t k = 0; k < stack_sizes.size(); ++k)
    {
        if (stack_sizes[k] == 0 || (k > 0 && stack_sizes[k] >= stack_sizes[k - 1]))
        {
            fail("stack sizes must be positive and strictly decreasing");
        }
    }
    if (baseline_head.empty() || stack_head.empty())
    {
        fail("classifier heads need at least an output layer");
    }
    for (const auto* head : {&baseline_head, &stack_head})
    {
        for (const auto& l : *head)
        {
            if (l.size == 0)
            {
                fail("layer sizes must be positive");
            }
        }
        if (head->back().size > 2)
        {
            fail("binary head must end in 1 or 2 outputs");
        }
    }
    for (double r : depth_learning_rates)
    {
        if (!(r > 0.0))
        {
            fail("per-depth learning rates must be positive");
        }
    }
    double sum = 0.0;
    for (double f : split_fractions)
    {
        if (!(f > 0.0))
        {
            fail("split fractions must be positive");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
    {
        fail("split fractions must sum to 1");
    }
    if (simulate)
    {
        try
        {
            simulate->validate();
        }
        catch (const Error& e)
        {
            fail(e.what());
        }
    }
    qc.validate();
    baseline_train.validate();
    finetune_train.validate();
    autoencoder.validate();
}

PipelineConfig config_from_json(const std::string& text)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    try
    {
        PipelineConfig c = j.value("preset", std::string("default")) == "fidelity" ? PipelineConfig::fidelity()
                                                                                    : PipelineConfig();
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        if (j.contains("output_dir"))
        {
            c.output_dir = j.at("output_dir").get<std::string>();
        }
        if (j.contains("input") && j.at("input").contains("plink_prefix"))
        {
            c.plink_prefix = j.at("input").at("plink_prefix").get<std::string>();
        }
        if (j.contains("simulate"))
        {
            c.simulate = sim_from_json(j.at("simulate"));
            c.simulate_seed_explicit = j.at("simulate").contains("seed");
            if (!c.simulate_seed_explicit)
            {
                c.simulate->seed = c.seed;
            }
        }
        if (j.contains("qc"))
        {
            c.qc = qc_from_json(j.at("qc"), c.qc);
            c.run_qc = j.at("qc").value("enabled", c.run_qc);
        }
        if (j.contains("thresholds"))
        {
            c.thresholds = j.at("thresholds").get<std::vector<double>>();
        }
        if (j.contains("stack_sizes"))
        {
            c.stack_sizes = j.at("stack_sizes").get<std::vector<std::size_t>>();
        }
        if (j.contains("baseline_head"))
        {
            c.baseline_head = layers_from_json(j.at("baseline_head"));
        }
        if (j.contains("stack_head"))
        {
            c.stack_head = layers_from_json(j.at("stack_head"));
        }
        if (j.contains("baseline_train"))
        {
            c.baseline_train = train_from_json(j.at("baseline_train"), c.baseline_train);
        }
        if (j.contains("finetune_train"))
        {
            c.finetune_train = train_from_json(j.at("finetune_train"), c.finetune_train);
        }
        if (j.contains("autoencoder"))
        {
            const auto& a = j.at("autoencoder");
            c.autoencoder.sparsity_target = a.value("sparsity_target", c.autoencoder.sparsity_target);
            c.autoencoder.sparsity_weight = a.value("sparsity_weight", c.autoencoder.sparsity_weight);
            if (a.contains("train"))
            {
                c.autoencoder.base = train_from_json(a.at("train"), c.autoencoder.base);
            }
        }
        if (j.contains("depth_learning_rates"))
        {
            c.depth_learning_rates = j.at("depth_learning_rates").get<std::vector<double>>();
        }
        c.freeze_encoders = j.value("freeze_encoders", c.freeze_encoders);
        c.per_split_f1 = j.value("per_split_f1", c.per_split_f1);
        c.comparison_threshold = j.value("comparison_threshold", c.comparison_threshold);
        if (j.contains("split_fractions"))
        {
            const auto v = j.at("split_fractions").get<std::vector<double>>();
            if (v.size() != 3)
            {
                throw Error(Errc::ConfigInvalid, "split_fractions needs three entries");
            }
            c.split_fractions = {v[0], v[1], v[2]};
        }
        c.autoencoder.hidden_size = c.stack_sizes.empty() ? 1 : c.stack_sizes.front();
        return c;
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigInvalid, std::string("bad config field: ") + e.what());
    }
}

std::string config_to_json(const PipelineConfig& c)
{
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir.string();
    if (c.plink_prefix)
    {
        j["input"] = {{"plink_prefix", *c.plink_prefix}};
    }
    if (c.simulate)
    {
        j["simulate"] = sim_to_json(*c.simulate);
    }
    j["qc"] = qc_to_json(c.qc);
    j["qc"]["enabled"] = c.run_qc;
    j["thresholds"] = c.thresholds;
    j["stack_sizes"] = c.stack_sizes;
    j["baseline_head"] = layers_to_json(c.baseline_head);
    j["stack_head"] = layers_to_json(c.stack_head);
    j["baseline_train"] = train_to_json(c.baseline_train);
    j["finetune_train"] = train_to_json(c.finetune_train);
    j["autoencoder"] = {{"sparsity_target", c.autoencoder.sparsity_target},
                        {"sparsity_weight", c.autoencoder.sparsity_weight},
                        {"train", train_to_json(c.autoencoder.base)}};
    j["depth_learning_rates"] = c.depth_learning_rates;
    j["freeze_encoders"] = c.freeze_encoders;
    j["per_split_f1"] = c.per_split_f1;
    j["comparison_threshold"] = c.comparison_threshold;
    j["split_fractions"] = c.split_fractions;
    return j.dump(2);
}

PipelineConfig load_config(const fs::path& path)
{
    return config_from_json(read_text(path));
}

OutputLock::OutputLock(const fs::path& dir)
{
    fs::create_directories(dir);
    path_ = dir / ".lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr)
    {
        const auto held = path_;
        path_.clear();
        throw Error(Errc::OutputLocked, held.string() + " exists; another run owns this directory");
    }
    std::fclose(f);
}

OutputLock::~OutputLock()
{
    if (!path_.empty())
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

std::string threshold_label(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0e", t);
    return buf;
}

Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& design, std::span<const std::size_t> rows)
{
    Eigen::MatrixXd x(design.cols(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        x.col(static_cast<Eigen::Index>(k)) = design.row(static_cast<Eigen::Index>(rows[k])).transpose();
    }
    return x;
}

std::vector<int> labels_for(const Dataset& ds, std::span<const std::size_t> rows)
{
    std::vector<int> y;
    y.reserve(rows.size());
    for (auto r : rows)
    {
        y.push_back(ds.sample(r).phenotype == Phenotype::Case ? 1 : 0);
    }
    return y;
}

void stage_simulate(const PipelineConfig& cfg)
{
    if (!cfg.simulate)
    {
        throw Error(Errc::ConfigInvalid, "no simulation spec in the configuration");
    }
    const auto s = sim::generate(*cfg.simulate, cfg.threads);
    const auto prefix = data_prefix(cfg);
    fs::create_directories(prefix.parent_path());
    write_bed_dataset(s.dataset, plink_paths(prefix));
    write_text(cfg.output_dir / "data" / "manifest.json", sim::manifest_json(*cfg.simulate, s.truth) + "\n");
}

qc::QcReport stage_qc(const PipelineConfig& cfg)
{
    const Dataset raw = load_source(cfg);
    auto t = cfg.qc;
    t.threads = cfg.threads;
    qc::QcReport report;
    Dataset clean;
    if (cfg.run_qc)
    {
        auto [after_samples, sample_report] = qc::run_individual_qc(raw, t);
        auto [after_variants, variant_report] = qc::run_variant_qc(after_samples, t);
        report = sample_report;
        report.removed_variants = variant_report.removed_variants;
        report.variants_after = variant_report.variants_after;
        report.notes.insert(report.notes.end(), variant_report.notes.begin(), variant_report.notes.end());
        clean = std::move(after_variants);
    }
    else
    {
        report.samples_before = report.samples_after = raw.n_samples();
        report.variants_before = report.variants_after = raw.n_variants();
        report.notes.push_back("quality control disabled in configuration");
        clean = raw;
    }
    const auto dir = cfg.output_dir / "qc";
    fs::create_directories(dir);
    write_bed_dataset(clean, plink_paths(clean_prefix(cfg)));
    qc::write_qc_report(report, (dir / "qc_report.json").string(), (dir / "removed_samples.csv").string(),
                        (dir / "removed_variants.csv").string());
    echo_config(cfg);
    return report;
}

std::vector<assoc::AssocResult> stage_scan(const PipelineConfig& cfg)
{
    if (!fs::exists(plink_paths(clean_prefix(cfg)).bed))
    {
        stage_qc(cfg);
    }
    const Dataset ds = read_bed_dataset(plink_paths(clean_prefix(cfg)));
    const auto split = sim::split(ds, cfg.split_fractions, derive_seed(cfg.seed, kSplitSeed));
    const auto results = assoc::association_scan(ds, split.train, cfg.threads);

    const auto dir = cfg.output_dir / "scan";
    fs::create_directories(dir);
    assoc::write_assoc_csv(dir / "assoc.csv", results, ds);
    json s;
    auto ids = [&](const std::vector<std::size_t>& rows) {
        std::vector<std::string> out;
        for (auto r : rows)
        {
            out.push_back(ds.sample(r).individual_id);
        }
        return out;
    };
    s["seed"] = derive_seed(cfg.seed, kSplitSeed);
    s["fractions"] = cfg.split_fractions;
    s["train"] = split.train;
    s["valid"] = split.valid;
    s["test"] = split.test;
    s["train_ids"] = ids(split.train);
    s["valid_ids"] = ids(split.valid);
    s["test_ids"] = ids(split.test);
    write_text(dir / "split.json", s.dump(1) + "\n");

    std::ostringstream counts;
    counts << "threshold,n_variants\n";
    for (double t : cfg.thresholds)
    {
        std::size_t n = 0;
        for (const auto& r : results)
        {
            n += (r.flag == assoc::FitFlag::Ok && r.p < t) ? 1 : 0;
        }
        counts << threshold_label(t) << ',' << n << '\n';
    }
    write_text(dir / "threshold_counts.csv", counts.str());
    echo_config(cfg);
    return results;
}

Prepared load_prepared(const PipelineConfig& cfg)
{
    const auto dir = cfg.output_dir / "scan";
    if (!fs::exists(dir / "assoc.csv") || !fs::exists(dir / "split.json"))
    {
        stage_scan(cfg);
    }
    Prepared p;
    p.dataset = read_bed_dataset(plink_paths(clean_prefix(cfg)));
    p.scan = assoc::read_assoc_csv(dir / "assoc.csv");
    const auto s = json::parse(read_text(dir / "split.json"));
    p.split.train = s.at("train").get<std::vector<std::size_t>>();
    p.split.valid = s.at("valid").get<std::vector<std::size_t>>();
    p.split.test = s.at("test").get<std::vector<std::size_t>>();
    if (p.scan.size() != p.dataset.n_variants())
    {
        throw Error(Errc::MetadataMismatch, "association table does not match the cleaned dataset");
    }
    return p;
}

std::vector<EvalRow> run_baseline(const PipelineConfig& cfg, std::optional<double> only_threshold)
{
    cfg.validate();
    const Prepared prep = load_prepared(cfg);
    std::vector<EvalRow> rows;
    for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti)
    {
        const double t = cfg.thresholds[ti];
        if (only_threshold && std::abs(*only_threshold - t) > 1e-12 * t)
        {
            continue;
        }
        EvalRow row;
        row.stage = "baseline";
        row.key = threshold_label(t);
        row.threshold = t;
        const auto dir = cfg.output_dir / "baseline" / row.key;
        fs::create_directories(dir);
        Features f;
        try
        {
            f = features_at(prep, t);
        }
        catch (const Error& e)
        {
            if (e.code() != Errc::EmptySubset)
            {
                throw;
            }
            row.skipped = true;
            row.skip_reason = "no variant passes the threshold";
            write_text(dir / "report.json", row_to_json(row).dump(2) + "\n");
            rows.push_back(row);
            continue;
        }
        row.n_features = f.subset.variant_ids.size();
        write_subset(dir / "snps.csv", f.subset);

        std::vector<nn::LayerSpec> specs{{row.n_features, nn::Activation::Linear}};
        specs.insert(specs.end(), cfg.baseline_head.begin(), cfg.baseline_head.end());
        auto params = nn::init_network(specs, derive_seed(cfg.seed, kBaselineInit + ti));
        auto tc = cfg.baseline_train;
        tc.seed = derive_seed(cfg.seed, kBaselineTrain + ti);
        const auto train_x = feature_matrix(f.design, f.train);
        const auto valid_x = feature_matrix(f.design, f.valid);
        const auto result = nn::train(params, train_x, labels_for(prep.dataset, f.train), valid_x,
                                      labels_for(prep.dataset, f.valid), tc);
        row.best_epoch = result.best_epoch;
        nn::write_history_csv((dir / "history.csv").string(), result.history);
        io::write_model(dir / "model.bin", {result.params, tc.seed, model_config_json(cfg, tc, "baseline")});
        score_row(row, result.params, f, cfg.per_split_f1, dir, prep.dataset);
        write_text(dir / "report.json", row_to_json(row).dump(2) + "\n");
        rows.push_back(row);
    }
    if (!only_threshold)
    {
        write_metrics_csv(cfg.output_dir / "baseline" / "metrics.csv", rows);
    }
    echo_config(cfg);
    return rows;
}

std::vector<EvalRow> run_stack_experiment(const PipelineConfig& cfg, std::optional<std::size_t> only_depth)
{
    cfg.validate();
    const Prepared prep = load_prepared(cfg);
    const double loosest = *std::max_element(cfg.thresholds.begin(), cfg.thresholds.end());
    const Features f = features_at(prep, loosest);
    const auto sizes = ae::clip_stack_sizes(cfg.stack_sizes, f.subset.variant_ids.size());
    if (only_depth && (*only_depth < 1 || *only_depth > sizes.size()))
    {
        throw Error(Errc::DepthOutOfRange, "depth " + std::to_string(*only_depth) + " outside 1.."
                                               + std::to_string(sizes.size()));
    }

    const auto dir = cfg.output_dir / "stack";
    fs::create_directories(dir);
    // Pretraining sees training rows only.
    write_rows(dir / "pretrain_rows.csv", f.train);
    write_subset(dir / "snps.csv", f.subset);
    auto ae_cfg = cfg.autoencoder;
    ae_cfg.base.seed = derive_seed(cfg.seed, kStackSeed);
    const auto train_x = feature_matrix(f.design, f.train);
    const auto stack = ae::stack_train(train_x, sizes, ae_cfg);
    io::write_stack(dir / "stack.bin", stack, ae_cfg.base.seed);

    const auto valid_x = feature_matrix(f.design, f.valid);
    const auto train_y = labels_for(prep.dataset, f.train);
    const auto valid_y = labels_for(prep.dataset, f.valid);
    std::vector<EvalRow> rows;
    for (std::size_t k = 1; k <= stack.depth(); ++k)
    {
        if (only_depth && *only_depth != k)
        {
            continue;
        }
        EvalRow row;
        row.stage = "stack";
        row.key = "depth_" + std::to_string(k);
        row.threshold = loosest;
        row.depth = k;
        row.n_features = stack.layers[k - 1].hidden_size;
        const auto ddir = dir / row.key;
        fs::create_directories(ddir);

        std::vector<nn::LayerSpec> head{{row.n_features, nn::Activation::Sigmoid}};
        head.insert(head.end(), cfg.stack_head.begin(), cfg.stack_head.end());
        auto params = ae::init_classifier_from_stack(stack, k, head, derive_seed(cfg.seed, kHeadInit + k));
        auto tc = cfg.finetune_train;
        tc.seed = derive_seed(cfg.seed, kFinetuneTrain + k);
        if (k <= cfg.depth_learning_rates.size())
        {
            tc.learning_rate = cfg.depth_learning_rates[k - 1];
        }
        tc.frozen_layers = cfg.freeze_encoders ? k : 0;
        const auto result = nn::train(params, train_x, train_y, valid_x, valid_y, tc);
        row.best_epoch = result.best_epoch;
        nn::write_history_csv((ddir / "history.csv").string(), result.history);
        io::write_model(ddir / "model.bin", {result.params, tc.seed, model_config_json(cfg, tc, "stack")});
        score_row(row, result.params, f, cfg.per_split_f1, ddir, prep.dataset);
        write_text(ddir / "report.json", row_to_json(row).dump(2) + "\n");
        rows.push_back(row);
    }
    if (!only_depth)
    {
        write_metrics_csv(dir / "metrics.csv", rows);
    }
    echo_config(cfg);
    return rows;
}

EvalRow stage_evaluate(const PipelineConfig& cfg, const std::string& stage, std::optional<double> threshold,
                       std::optional<std::size_t> depth)
{
    const Prepared prep = load_prepared(cfg);
    EvalRow row;
    row.stage = stage;
    fs::path model_path;
    Features f;
    if (stage == "baseline")
    {
        if (!threshold)
        {
            throw Error(Errc::ConfigInvalid, "evaluate baseline needs --threshold");
        }
        row.threshold = *threshold;
        row.key = threshold_label(*threshold);
        model_path = cfg.output_dir / "baseline" / row.key / "model.bin";
        f = features_at(prep, *threshold);
    }
    else if (stage == "stack")
    {
        if (!depth)
        {
            throw Error(Errc::ConfigInvalid, "evaluate stack needs --depth");
        }
        row.depth = *depth;
        row.key = "depth_" + std::to_string(*depth);
        row.threshold = *std::max_element(cfg.thresholds.begin(), cfg.thresholds.end());
        model_path = cfg.output_dir / "stack" / row.key / "model.bin";
        f = features_at(prep, row.threshold);
    }
    else
    {
        throw Error(Errc::ConfigInvalid, "evaluate expects 'baseline' or 'stack', got '" + stage + "'");
    }
    if (!fs::exists(model_path))
    {
        throw Error(Errc::NoArtifacts, model_path.string() + " has not been trained yet");
    }
    const auto model = io::read_model(model_path);
    row.n_features = stage == "stack" ? model.params.layers[row.depth].size : model.params.input_size();
    const auto dir = cfg.output_dir / "evaluate" / (stage + "_" + row.key);
    fs::create_directories(dir);
    score_row(row, model.params, f, cfg.per_split_f1, dir, prep.dataset);
    write_text(cfg.output_dir / "evaluate" / (stage + "_" + row.key + ".json"), row_to_json(row).dump(2) + "\n");
    return row;
}

Summary report_bundle(const fs::path& output_dir)
{
    std::vector<std::pair<double, json>> baseline;
    std::vector<std::pair<std::size_t, json>> stack;
    if (fs::is_directory(output_dir / "baseline"))
    {
        for (const auto& e : fs::directory_iterator(output_dir / "baseline"))
        {
            if (e.is_directory() && fs::exists(e.path() / "report.json"))
            {
                auto j = json::parse(read_text(e.path() / "report.json"));
                baseline.emplace_back(j.at("threshold").get<double>(), j);
            }
        }
    }
    if (fs::is_directory(output_dir / "stack"))
    {
        for (const auto& e : fs::directory_iterator(output_dir / "stack"))
        {
            if (e.is_directory() && fs::exists(e.path() / "report.json"))
            {
                auto j = json::parse(read_text(e.path() / "report.json"));
                stack.emplace_back(j.at("depth").get<std::size_t>(), j);
            }
        }
    }
    const bool have_qc = fs::exists(output_dir / "qc" / "qc_report.json");
    const bool have_scan = fs::exists(output_dir / "scan" / "threshold_counts.csv");
    if (baseline.empty() && stack.empty() && !have_qc && !have_scan)
    {
        throw Error(Errc::NoArtifacts, "no stage artifacts under " + output_dir.string());
    }
    std::sort(baseline.begin(), baseline.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::sort(stack.begin(), stack.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    json s;
    if (fs::exists(output_dir / "config.json"))
    {
        s["config"] = json::parse(read_text(output_dir / "config.json"));
        s["seed"] = s["config"].at("seed");
    }
    if (fs::exists(output_dir / "data" / "manifest.json"))
    {
        s["simulation"] = json::parse(read_text(output_dir / "data" / "manifest.json")).at("spec");
    }
    if (have_qc)
    {
        const auto q = json::parse(read_text(output_dir / "qc" / "qc_report.json"));
        s["qc"] = q;
    }
    if (have_scan)
    {
        json counts = json::array();
        std::istringstream in(read_text(output_dir / "scan" / "threshold_counts.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line))
        {
            const auto comma = line.find(',');
            if (comma == std::string::npos)
            {
                continue;
            }
            counts.push_back({{"threshold", line.substr(0, comma)},
                              {"n_variants", std::stoull(line.substr(comma + 1))}});
        }
        s["scan_counts"] = counts;
    }
    json rows = json::array();
    for (auto& [t, j] : baseline)
    {
        rows.push_back(j);
    }
    for (auto& [d, j] : stack)
    {
        rows.push_back(j);
    }
    s["rows"] = rows;

    std::ostringstream text;
    text << "snpnet summary for " << output_dir.string() << "\n\n";
    if (have_qc)
    {
        const auto& q = s["qc"];
        text << "QC: samples " << q.value("samples_before", 0) << " -> " << q.value("samples_after", 0)
             << ", variants " << q.value("variants_before", 0) << " -> " << q.value("variants_after", 0) << "\n";
    }
    if (have_scan)
    {
        text << "Association scan (variants passing):";
        for (const auto& c : s["scan_counts"])
        {
            text << ' ' << c.at("threshold").get<std::string>() << '=' << c.at("n_variants").get<std::size_t>();
        }
        text << "\n";
    }
    text << "\n"
         << std::left << std::setw(10) << "stage" << std::setw(10) << "key" << std::setw(8) << "inputs"
         << std::setw(7) << "split" << std::setw(8) << "cutoff" << std::setw(8) << "sens" << std::setw(8) << "spec"
         << std::setw(8) << "gini" << std::setw(9) << "logloss" << std::setw(8) << "auc" << "mse\n";
    for (const auto& r : rows)
    {
        const auto stage = r.at("stage").get<std::string>();
        const auto key = r.at("key").get<std::string>();
        if (r.at("skipped").get<bool>())
        {
            text << std::setw(10) << stage << std::setw(10) << key << "skipped: "
                 << r.at("skip_reason").get<std::string>() << "\n";
            continue;
        }
        for (const char* split : {"valid", "test"})
        {
            const auto& e = r.at(split);
            auto num = [](const json& v) { return v.is_null() ? std::string("NA") : fmt(v.get<double>()); };
            text << std::setw(10) << stage << std::setw(10) << key << std::setw(8)
                 << r.at("n_features").get<std::size_t>() << std::setw(7) << split << std::setw(8)
                 << fmt(e.at("threshold").get<double>()) << std::setw(8) << num(e.at("sensitivity"))
                 << std::setw(8) << num(e.at("specificity")) << std::setw(8) << num(e.at("gini")) << std::setw(9)
                 << num(e.at("logloss")) << std::setw(8) << num(e.at("auc")) << num(e.at("mse")) << "\n";
        }
    }

    Summary out;
    out.json = s.dump(2);
    out.text = text.str();
    out.row_count = rows.size();
    write_text(output_dir / "report" / "summary.json", out.json + "\n");
    write_text(output_dir / "report" / "summary.txt", out.text);
    json m;
    m["qc"] = s.contains("qc") ? s["qc"] : json(nullptr);
    m["scan_counts"] = s.contains("scan_counts") ? s["scan_counts"] : json(nullptr);
    m["rows"] = s["rows"];
    write_text(output_dir / "report" / "metrics.json", m.dump(2) + "\n");
    return out;
}

Summary run_all(const PipelineConfig& cfg)
{
    cfg.validate();
    OutputLock lock(cfg.output_dir);
    if (cfg.simulate)
    {
        stage_simulate(cfg);
    }
    stage_qc(cfg);
    stage_scan(cfg);
    run_baseline(cfg);
    run_stack_experiment(cfg);
    return report_bundle(cfg.output_dir);
}

}  // namespace snpnet::pipeline
