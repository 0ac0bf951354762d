#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snpnet/genotype.h"

namespace snpnet::assoc
{

enum class FitFlag
{
    Ok,
    Separation,   // p not evaluable
    Monomorphic,  // beta 0, p 1
    SingleClass,  // p not evaluable
};

std::string flag_name(FitFlag f);

struct AssocResult
{
    std::string variant_id;
    double beta = 0.0;
    double se = 0.0;
    double wald_z = 0.0;
    double p = 1.0;  // NaN when not evaluable
    std::size_t n_used = 0;
    FitFlag flag = FitFlag::Ok;

    [[nodiscard]] bool evaluable() const { return flag == FitFlag::Ok || flag == FitFlag::Monomorphic; }
};

/// Intercept + slope logistic fit by IRLS with step halving.
struct LogisticFit
{
    double intercept = 0.0;
    double slope = 0.0;
    double se_intercept = 0.0;
    double se_slope = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> log_likelihood_trace;  // one entry per accepted iterate, starting at beta = 0
};

LogisticFit fit_logistic_irls(std::span<const double> x, std::span<const double> y);

/// Additive-model test of one variant. Samples with missing dosage or
/// phenotype (y < 0) are excluded. Throws SingleClass when the remaining
/// samples hold only one phenotype class.
AssocResult fit_logistic_single(std::span<const std::int8_t> dosage, std::span<const int> y);

/// One result per variant in dataset order. `rows` restricts the samples used
/// (empty = all).
std::vector<AssocResult> association_scan(const Dataset& ds, std::span<const std::size_t> rows = {},
                                          unsigned threads = 1);

struct SnpSubset
{
    double threshold = 0.0;
    std::vector<std::string> variant_ids;
    std::vector<std::size_t> variant_index;  // columns in the source dataset
    Eigen::MatrixXd design;                  // N x M, missing -> column mean
};

/// Variants with p < threshold ordered by ascending p then id. Throws
/// EmptySubset when nothing passes.
SnpSubset threshold_filter(std::span<const AssocResult> results, const Dataset& ds, double threshold);

/// Dosage matrix for the given columns; missing calls take the mean of the
/// column's non-missing calls.
Eigen::MatrixXd design_matrix(const Dataset& ds, std::span<const std::size_t> variant_index);

void write_assoc_csv(const std::filesystem::path& path, std::span<const AssocResult> results, const Dataset& ds);
std::vector<AssocResult> read_assoc_csv(const std::filesystem::path& path);

}  // namespace snpnet::assoc
