#include "snpnet/genotype.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snpnet/error.h"

namespace snpnet
{

bool is_x_chromosome(const std::string& chrom)
{
    return chrom == "X" || chrom == "x" || chrom == "23" || chrom == "chrX";
}

bool is_autosome(const std::string& chrom)
{
    std::string_view c = chrom;
    if (c.starts_with("chr"))
    {
        c.remove_prefix(3);
    }
    if (c.empty() || c.size() > 2)
    {
        return false;
    }
    int v = 0;
    for (char ch : c)
    {
        if (ch < '0' || ch > '9')
        {
            return false;
        }
        v = v * 10 + (ch - '0');
    }
    return v >= 1 && v <= 22;
}

Dataset::Dataset(std::vector<SampleRecord> samples, std::vector<VariantRecord> variants)
    : samples_(std::move(samples)), variants_(std::move(variants))
{
    // 0xFF == four Missing calls
    packed_.assign(bytes_per_variant() * variants_.size(), 0xFF);
}

void Dataset::column(std::size_t variant, std::span<std::int8_t> out) const
{
    if (out.size() != n_samples())
    {
        throw Error(Errc::ShapeMismatch, "column buffer length differs from sample count");
    }
    const auto block = packed_column(variant);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        const unsigned code = (block[i / 4] >> (2 * (i % 4))) & 0x3u;
        out[i] = code == 3u ? kMissingDosage : static_cast<std::int8_t>(code);
    }
}

std::vector<std::int8_t> Dataset::column(std::size_t variant) const
{
    std::vector<std::int8_t> out(n_samples());
    column(variant, out);
    return out;
}

void Dataset::set_column(std::size_t variant, std::span<const std::int8_t> dosages)
{
    if (dosages.size() != n_samples())
    {
        throw Error(Errc::ShapeMismatch, "column length differs from sample count");
    }
    for (std::size_t i = 0; i < dosages.size(); ++i)
    {
        const auto d = dosages[i];
        set_call(i, variant, d < 0 || d > 2 ? GenotypeCall::Missing : static_cast<GenotypeCall>(d));
    }
}

Dataset Dataset::subset(std::span<const std::size_t> sample_idx,
                        std::span<const std::size_t> variant_idx) const
{
    std::vector<SampleRecord> s;
    s.reserve(sample_idx.size());
    for (auto i : sample_idx)
    {
        s.push_back(samples_.at(i));
    }
    std::vector<VariantRecord> v;
    v.reserve(variant_idx.size());
    for (auto j : variant_idx)
    {
        v.push_back(variants_.at(j));
    }
    Dataset out(std::move(s), std::move(v));
    for (std::size_t jj = 0; jj < variant_idx.size(); ++jj)
    {
        for (std::size_t ii = 0; ii < sample_idx.size(); ++ii)
        {
            out.set_call(ii, jj, call(sample_idx[ii], variant_idx[jj]));
        }
    }
    return out;
}

Dataset Dataset::subset_samples(std::span<const std::size_t> sample_idx) const
{
    std::vector<std::size_t> all(n_variants());
    for (std::size_t j = 0; j < all.size(); ++j)
    {
        all[j] = j;
    }
    return subset(sample_idx, all);
}

Dataset Dataset::subset_variants(std::span<const std::size_t> variant_idx) const
{
    std::vector<VariantRecord> v;
    v.reserve(variant_idx.size());
    for (auto j : variant_idx)
    {
        v.push_back(variants_.at(j));
    }
    Dataset out(samples_, std::move(v));
    const std::size_t bpv = bytes_per_variant();
    for (std::size_t jj = 0; jj < variant_idx.size(); ++jj)
    {
        std::copy_n(packed_.begin() + static_cast<std::ptrdiff_t>(variant_idx[jj] * bpv), bpv,
                    out.packed_.begin() + static_cast<std::ptrdiff_t>(jj * bpv));
    }
    return out;
}

std::vector<int> Dataset::phenotype_codes() const
{
    std::vector<int> y(samples_.size());
    for (std::size_t i = 0; i < y.size(); ++i)
    {
        switch (samples_[i].phenotype)
        {
            case Phenotype::Case: y[i] = 1; break;
            case Phenotype::Control: y[i] = 0; break;
            case Phenotype::Missing: y[i] = -1; break;
        }
    }
    return y;
}

double allele1_frequency(std::span<const std::int8_t> dosages)
{
    long copies = 0;
    long called = 0;
    for (auto d : dosages)
    {
        if (d >= 0)
        {
            copies += d;
            ++called;
        }
    }
    if (called == 0)
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return static_cast<double>(copies) / static_cast<double>(2 * called);
}

Dataset orient_minor_allele(const Dataset& ds)
{
    Dataset out = ds;
    std::vector<std::int8_t> col(ds.n_samples());
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        ds.column(j, col);
        const double f = allele1_frequency(col);
        if (!(f > 0.5))
        {
            continue;  // already minor, tie, or all missing
        }
        for (auto& d : col)
        {
            if (d >= 0)
            {
                d = static_cast<std::int8_t>(2 - d);
            }
        }
        out.set_column(j, col);
        std::swap(out.variant(j).allele1, out.variant(j).allele2);
    }
    return out;
}

}  // namespace snpnet
