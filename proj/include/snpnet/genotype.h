#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace snpnet
{

/// Additive genotype code: number of copies of the designated minor allele.
enum class GenotypeCall : std::uint8_t
{
    HomMajor = 0,
    Het = 1,
    HomMinor = 2,
    Missing = 3,
};

/// Dosage value used in unpacked columns for a missing call.
inline constexpr std::int8_t kMissingDosage = -1;

enum class Sex : std::uint8_t
{
    Unknown = 0,
    Male = 1,
    Female = 2,
};

enum class Phenotype : std::uint8_t
{
    Control = 0,
    Case = 1,
    Missing = 2,
};

struct VariantRecord
{
    std::string id;
    std::string chromosome;
    std::int64_t position = 0;
    // allele1 is the counted (minor) allele; allele2 the other.
    std::string allele1;
    std::string allele2;
    double genetic_distance = 0.0;

    bool operator==(const VariantRecord&) const = default;
};

struct SampleRecord
{
    std::string family_id;
    std::string individual_id;
    Sex reported_sex = Sex::Unknown;
    Phenotype phenotype = Phenotype::Missing;

    bool operator==(const SampleRecord&) const = default;
};

bool is_x_chromosome(const std::string& chrom);
bool is_autosome(const std::string& chrom);

/// Individuals x variants genotype matrix, packed 2 bits per call in
/// variant-major blocks of ceil(N/4) bytes.
class Dataset
{
public:
    Dataset() = default;

    /// All calls start out Missing.
    Dataset(std::vector<SampleRecord> samples, std::vector<VariantRecord> variants);

    [[nodiscard]] std::size_t n_samples() const noexcept { return samples_.size(); }
    [[nodiscard]] std::size_t n_variants() const noexcept { return variants_.size(); }
    [[nodiscard]] std::size_t bytes_per_variant() const noexcept { return (samples_.size() + 3) / 4; }

    [[nodiscard]] const std::vector<SampleRecord>& samples() const noexcept { return samples_; }
    [[nodiscard]] const std::vector<VariantRecord>& variants() const noexcept { return variants_; }
    [[nodiscard]] const SampleRecord& sample(std::size_t i) const { return samples_.at(i); }
    [[nodiscard]] const VariantRecord& variant(std::size_t j) const { return variants_.at(j); }
    SampleRecord& sample(std::size_t i) { return samples_.at(i); }
    VariantRecord& variant(std::size_t j) { return variants_.at(j); }

    [[nodiscard]] GenotypeCall call(std::size_t sample, std::size_t variant) const
    {
        const std::size_t off = variant * bytes_per_variant() + sample / 4;
        return static_cast<GenotypeCall>((packed_[off] >> (2 * (sample % 4))) & 0x3u);
    }

    void set_call(std::size_t sample, std::size_t variant, GenotypeCall g)
    {
        const std::size_t off = variant * bytes_per_variant() + sample / 4;
        const unsigned shift = 2 * (sample % 4);
        packed_[off] = static_cast<std::uint8_t>((packed_[off] & ~(0x3u << shift))
                                                 | (static_cast<unsigned>(g) << shift));
    }

    /// Dosages {0,1,2} with kMissingDosage for missing calls.
    void column(std::size_t variant, std::span<std::int8_t> out) const;
    [[nodiscard]] std::vector<std::int8_t> column(std::size_t variant) const;
    void set_column(std::size_t variant, std::span<const std::int8_t> dosages);

    [[nodiscard]] std::span<const std::uint8_t> packed_column(std::size_t variant) const
    {
        return {packed_.data() + variant * bytes_per_variant(), bytes_per_variant()};
    }

    /// Sub-dataset with the given rows and columns, in the given order.
    [[nodiscard]] Dataset subset(std::span<const std::size_t> sample_idx,
                                 std::span<const std::size_t> variant_idx) const;
    [[nodiscard]] Dataset subset_samples(std::span<const std::size_t> sample_idx) const;
    [[nodiscard]] Dataset subset_variants(std::span<const std::size_t> variant_idx) const;

    /// Case=1, Control=0, Missing=-1 per sample.
    [[nodiscard]] std::vector<int> phenotype_codes() const;

    bool operator==(const Dataset& other) const = default;

private:
    std::vector<SampleRecord> samples_;
    std::vector<VariantRecord> variants_;
    std::vector<std::uint8_t> packed_;
};

/// Recodes every variant so dosage 2 counts the allele with sample frequency
/// <= 0.5 over non-missing calls. Frequency ties keep the current allele1.
Dataset orient_minor_allele(const Dataset& ds);

/// Frequency of allele1 over non-missing calls; NaN when the column is all missing.
double allele1_frequency(std::span<const std::int8_t> dosages);

}  // namespace snpnet
