#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "snpnet/genotype.h"

namespace snpnet::qc
{

struct QcThresholds
{
    double sample_missing_max = 0.02;  // removed when >=
    double het_sd_window = 3.0;
    double sex_homozygosity_low = 0.2;
    double sex_homozygosity_high = 0.8;
    double ibd_max = 0.185;
    double pc1_min = -0.05;
    double pc2_min = 0.00;
    double diff_missing_p = 1e-5;
    double maf_min = 0.01;
    double variant_call_rate_min = 0.98;
    double hwe_p_min = 1e-5;

    // The PC1/PC2 cutoffs are only applied when this is set.
    bool apply_pca_filter = false;
    std::size_t pca_components = 2;
    // IBD and PCA run on every k-th variant so at most this many are used.
    std::size_t ld_thin_max_variants = 50000;
    unsigned threads = 1;

    /// Throws ConfigInvalid when a fraction or p-value is out of range.
    void validate() const;
};

enum class SampleReason
{
    SexCheck,
    Missingness,
    Heterozygosity,
    Relatedness,
    Ancestry,
};

enum class VariantReason
{
    DiffMissingness,
    Maf,
    CallRate,
    Hwe,
};

std::string reason_name(SampleReason r);
std::string reason_name(VariantReason r);

struct QcReport
{
    std::vector<std::pair<std::string, SampleReason>> removed_samples;
    std::vector<std::pair<std::string, VariantReason>> removed_variants;
    std::size_t samples_before = 0;
    std::size_t samples_after = 0;
    std::size_t variants_before = 0;
    std::size_t variants_after = 0;
    // Checks that could not run (e.g. no X chromosome) with the reason.
    std::vector<std::string> notes;
};

/// Per-sample fraction of missing calls over all variants.
std::vector<double> sample_missingness(const Dataset& ds);

/// Per-sample heterozygous / non-missing calls over autosomes; NaN when a
/// sample has no autosomal calls.
std::vector<double> heterozygosity_rates(const Dataset& ds);

/// Indices of samples whose autosomal het rate lies outside mean +- window_sd * SD.
std::vector<std::size_t> heterozygosity_outliers(const Dataset& ds, double window_sd);

/// X-chromosome inbreeding coefficient per sample: (O - E) / (n - E) with O the
/// observed homozygous calls and E the count expected from allele frequencies.
std::vector<double> x_homozygosity(const Dataset& ds);

/// Flags samples with X homozygosity strictly inside (low, high), plus samples
/// whose reported sex contradicts an unambiguous estimate.
std::vector<std::size_t> sex_check(const Dataset& ds, double low = 0.2, double high = 0.8);

/// Every k-th variant so that at most max_variants remain.
Dataset thin_variants(const Dataset& ds, std::size_t max_variants);

/// Method-of-moments PI_HAT for all sample pairs (symmetric, diagonal 1).
Eigen::MatrixXd ibd_estimate(const Dataset& ds, unsigned threads = 1);

/// Greedy relatedness pruning: pairs are visited by decreasing PI_HAT and the
/// member with the higher missingness (tie: larger individual id) is removed
/// unless one of the pair is already gone.
std::vector<std::size_t> ibd_filter(const Eigen::MatrixXd& pi_hat,
                                    std::span<const double> missingness,
                                    std::span<const std::string> individual_ids,
                                    double threshold = 0.185);

struct PcaResult
{
    Eigen::MatrixXd scores;       // N x k, unit-norm columns
    Eigen::VectorXd eigenvalues;  // non-increasing
};

PcaResult pca_ancestry(const Dataset& ds, std::size_t k);

std::vector<std::size_t> pca_outlier_filter(const Eigen::MatrixXd& scores, double pc1_min = -0.05,
                                            double pc2_min = 0.0);

/// Pearson chi-square (1 df) on the missing x case/control table per variant.
std::vector<double> differential_missingness(const Dataset& ds);

struct HweResult
{
    double chi_square = 0.0;
    double p = 1.0;
};

HweResult hwe_test(long n_hom_major, long n_het, long n_hom_minor);

/// Marker QC: reports each failing variant once with its first reason in
/// the order diff-missingness, MAF, call rate, HWE (controls only).
QcReport variant_filters(const Dataset& ds, const QcThresholds& t);

std::pair<Dataset, QcReport> run_variant_qc(const Dataset& ds, const QcThresholds& t);

/// Individual QC: sex check, missingness, heterozygosity, relatedness and
/// (optionally) ancestry; all flagged samples are dropped together at the end.
std::pair<Dataset, QcReport> run_individual_qc(const Dataset& ds, const QcThresholds& t);

std::string qc_report_json(const QcReport& report);
void write_qc_report(const QcReport& report, const std::string& json_path,
                     const std::string& samples_csv, const std::string& variants_csv);

}  // namespace snpnet::qc
