#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "snpnet/genotype.h"

namespace snpnet::sim
{

enum class EpistasisModel
{
    Xor,             // log(OR) * [exactly one of the pair has dosage >= 1]
    Multiplicative,  // log(OR) * dosage_a * dosage_b
    Threshold,       // log(OR) * [dosage_a >= 1 and dosage_b >= 1]
};

std::string model_name(EpistasisModel m);
EpistasisModel parse_model(const std::string& s);

struct SimSpec
{
    std::size_t n_samples = 2000;
    std::size_t n_variants = 5000;  // autosomal
    double maf_low = 0.05;
    double maf_high = 0.5;
    std::size_t n_marginal = 10;
    double marginal_odds_ratio = 1.5;
    std::size_t n_epistatic_pairs = 10;
    EpistasisModel epistasis_model = EpistasisModel::Xor;
    double epistatic_odds_ratio = 3.0;
    double base_prevalence = 0.5;
    double missing_rate = 0.0;
    std::uint64_t seed = 1;

    // Extra null variants on chromosome X; males are hemizygous.
    std::size_t n_x_variants = 0;
    // Null variants whose calls go missing in cases at `diff_missing_rate`.
    std::size_t n_diff_missing = 0;
    double diff_missing_rate = 0.2;

    /// Throws SpecInvalid.
    void validate() const;
};

struct CausalVariant
{
    std::string variant_id;
    std::size_t index = 0;
    std::string role;     // "marginal", "epistatic_a", "epistatic_b"
    double log_odds = 0;  // effect size on the liability logit
    std::string partner;  // other member of an epistatic pair
    double maf = 0.0;
};

struct GroundTruth
{
    std::vector<double> maf;  // drawn MAF per variant (autosomal then X)
    std::vector<CausalVariant> causal;
    std::vector<std::string> diff_missing;
    // Variants whose allele1 was swapped when orienting to the sample minor allele.
    std::vector<std::string> flipped;
};

struct Simulation
{
    Dataset dataset;
    GroundTruth truth;
};

/// Deterministic in spec (including seed) and independent of thread count.
Simulation generate(const SimSpec& spec, unsigned threads = 1);

std::string manifest_json(const SimSpec& spec, const GroundTruth& truth);

struct SplitIndices
{
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
};

/// Stratified by phenotype code; per-class split sizes are within one of the
/// proportional share and overall sizes follow largest-remainder rounding.
/// Each index set is sorted. Throws ConfigInvalid for bad fractions and
/// TooFewSamples when a split with positive fraction would be empty.
SplitIndices split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed);
SplitIndices split(const std::vector<int>& strata, std::array<double, 3> fractions, std::uint64_t seed);

/// Largest-remainder apportionment of n into parts proportional to weights;
/// ties go to the earlier part.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& weights);

}  // namespace snpnet::sim
