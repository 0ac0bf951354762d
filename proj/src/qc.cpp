#include "snpnet/qc.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"

#include "snpnet/error.h"
#include "snpnet/parallel.h"
#include "snpnet/rng.h"
#include "snpnet/stats.h"

namespace snpnet::qc
{

namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }
bool is_pvalue(double v) { return v > 0.0 && v <= 1.0; }

// Integer counts of each genotype code per sample, restricted to the variants
// selected by keep(variant_index).
struct SampleCounts
{
    std::vector<long> hom_major, het, hom_minor, missing;
};

template <typename Keep>
SampleCounts count_per_sample(const Dataset& ds, Keep keep)
{
    const std::size_t n = ds.n_samples();
    SampleCounts c{std::vector<long>(n, 0), std::vector<long>(n, 0), std::vector<long>(n, 0),
                   std::vector<long>(n, 0)};
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        if (!keep(j))
        {
            continue;
        }
        const auto block = ds.packed_column(j);
        for (std::size_t i = 0; i < n; ++i)
        {
            switch ((block[i / 4] >> (2 * (i % 4))) & 0x3u)
            {
                case 0: ++c.hom_major[i]; break;
                case 1: ++c.het[i]; break;
                case 2: ++c.hom_minor[i]; break;
                default: ++c.missing[i]; break;
            }
        }
    }
    return c;
}

struct ColumnCounts
{
    long hom_major = 0, het = 0, hom_minor = 0, missing = 0;

    [[nodiscard]] long called() const { return hom_major + het + hom_minor; }
};

// y: 1 case, 0 control, -1 missing; which: -2 = everyone, else only y == which.
ColumnCounts count_column(std::span<const std::uint8_t> block, std::span<const int> y, int which)
{
    ColumnCounts c;
    for (std::size_t i = 0; i < y.size(); ++i)
    {
        if (which != -2 && y[i] != which)
        {
            continue;
        }
        switch ((block[i / 4] >> (2 * (i % 4))) & 0x3u)
        {
            case 0: ++c.hom_major; break;
            case 1: ++c.het; break;
            case 2: ++c.hom_minor; break;
            default: ++c.missing; break;
        }
    }
    return c;
}

double chi2_2x2(double a, double b, double c, double d)
{
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0)
    {
        return 0.0;
    }
    const double diff = a * d - b * c;
    return (r1 + r2) * diff * diff / (r1 * r2 * c1 * c2);
}

// Bit-plane representation of a sample's calls over the informative variants.
struct BitPlanes
{
    std::size_t words = 0;
    std::vector<std::uint64_t> g0, g1, g2;  // sample-major, `words` per sample
};

Eigen::MatrixXd ibd_matrix(const Dataset& ds, unsigned threads, bool throw_on_no_overlap)
{
    const std::size_t n = ds.n_samples();
    std::vector<std::size_t> informative;
    std::vector<double> freq;
    std::vector<std::int8_t> col(n);
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        ds.column(j, col);
        const double f = allele1_frequency(col);
        if (f > 0.0 && f < 1.0)
        {
            informative.push_back(j);
            freq.push_back(f);
        }
    }
    if (informative.empty())
    {
        throw Error(Errc::InsufficientData, "no polymorphic variants for IBD estimation");
    }

    // Expected IBS given IBD, averaged over variants.
    double e00 = 0, e01 = 0, e02 = 0, e11 = 0, e12 = 0;
    for (double p : freq)
    {
        const double q = 1.0 - p;
        e00 += 2 * p * p * q * q;
        e01 += 4 * p * p * p * q + 4 * p * q * q * q;
        e02 += q * q * q * q + p * p * p * p + 4 * p * p * q * q;
        e11 += 2 * p * p * q + 2 * p * q * q;
        e12 += p * p * p + q * q * q + p * p * q + p * q * q;
    }
    const double m = static_cast<double>(freq.size());
    e00 /= m;
    e01 /= m;
    e02 /= m;
    e11 /= m;
    e12 /= m;

    BitPlanes bp;
    bp.words = (informative.size() + 63) / 64;
    bp.g0.assign(n * bp.words, 0);
    bp.g1.assign(n * bp.words, 0);
    bp.g2.assign(n * bp.words, 0);
    for (std::size_t jj = 0; jj < informative.size(); ++jj)
    {
        ds.column(informative[jj], col);
        const std::uint64_t bit = std::uint64_t{1} << (jj % 64);
        const std::size_t w = jj / 64;
        for (std::size_t i = 0; i < n; ++i)
        {
            switch (col[i])
            {
                case 0: bp.g0[i * bp.words + w] |= bit; break;
                case 1: bp.g1[i * bp.words + w] |= bit; break;
                case 2: bp.g2[i * bp.words + w] |= bit; break;
                default: break;
            }
        }
    }

    Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(n, threads, [&](std::size_t a) {
        const auto* a0 = &bp.g0[a * bp.words];
        const auto* a1 = &bp.g1[a * bp.words];
        const auto* a2 = &bp.g2[a * bp.words];
        for (std::size_t b = a + 1; b < n; ++b)
        {
            const auto* b0 = &bp.g0[b * bp.words];
            const auto* b1 = &bp.g1[b * bp.words];
            const auto* b2 = &bp.g2[b * bp.words];
            long ibs0 = 0, ibs2 = 0, both = 0;
            for (std::size_t w = 0; w < bp.words; ++w)
            {
                ibs0 += std::popcount((a0[w] & b2[w]) | (a2[w] & b0[w]));
                ibs2 += std::popcount((a0[w] & b0[w]) | (a1[w] & b1[w]) | (a2[w] & b2[w]));
                both += std::popcount((a0[w] | a1[w] | a2[w]) & (b0[w] | b1[w] | b2[w]));
            }
            double value = kNaN;
            if (both == 0)
            {
                if (throw_on_no_overlap)
                {
                    throw Error(Errc::NoOverlap, "samples " + ds.sample(a).individual_id + " and "
                                                     + ds.sample(b).individual_id + " share no called variants");
                }
            }
            else
            {
                const long ibs1 = both - ibs0 - ibs2;
                const double nb = static_cast<double>(both);
                double z0 = static_cast<double>(ibs0) / (e00 * nb);
                double z1 = (static_cast<double>(ibs1) - z0 * e01 * nb) / (e11 * nb);
                double z2 = (static_cast<double>(ibs2) - z0 * e02 * nb - z1 * e12 * nb) / nb;
                // Bound to the simplex.
                if (z0 > 1) { z0 = 1; z1 = z2 = 0; }
                if (z1 > 1) { z1 = 1; z0 = z2 = 0; }
                if (z2 > 1) { z2 = 1; z0 = z1 = 0; }
                if (z0 < 0) { const double s = z1 + z2; z1 /= s; z2 /= s; z0 = 0; }
                if (z1 < 0) { const double s = z0 + z2; z0 /= s; z2 /= s; z1 = 0; }
                if (z2 < 0) { const double s = z0 + z1; z0 /= s; z1 /= s; z2 = 0; }
                value = std::clamp(z2 + 0.5 * z1, 0.0, 1.0);
            }
            pi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = value;
            pi(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = value;
        }
    });
    return pi;
}

Dataset autosomal_thinned(const Dataset& ds, std::size_t max_variants)
{
    std::vector<std::size_t> auto_idx;
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        if (is_autosome(ds.variant(j).chromosome))
        {
            auto_idx.push_back(j);
        }
    }
    return thin_variants(ds.subset_variants(auto_idx), max_variants);
}

}  // namespace

void QcThresholds::validate() const
{
    const bool ok = in_unit(sample_missing_max) && het_sd_window >= 0.0 && in_unit(sex_homozygosity_low)
                    && in_unit(sex_homozygosity_high) && sex_homozygosity_low <= sex_homozygosity_high
                    && in_unit(ibd_max) && is_pvalue(diff_missing_p) && in_unit(maf_min)
                    && in_unit(variant_call_rate_min) && is_pvalue(hwe_p_min) && pca_components >= 2
                    && ld_thin_max_variants >= 1;
    if (!ok)
    {
        throw Error(Errc::ConfigInvalid, "QC thresholds out of range");
    }
}

std::string reason_name(SampleReason r)
{
    switch (r)
    {
        case SampleReason::SexCheck: return "sex_check";
        case SampleReason::Missingness: return "missingness";
        case SampleReason::Heterozygosity: return "heterozygosity";
        case SampleReason::Relatedness: return "relatedness";
        case SampleReason::Ancestry: return "ancestry";
    }
    return "unknown";
}

std::string reason_name(VariantReason r)
{
    switch (r)
    {
        case VariantReason::DiffMissingness: return "diff_missingness";
        case VariantReason::Maf: return "maf";
        case VariantReason::CallRate: return "call_rate";
        case VariantReason::Hwe: return "hwe";
    }
    return "unknown";
}

std::vector<double> sample_missingness(const Dataset& ds)
{
    if (ds.n_variants() == 0)
    {
        throw Error(Errc::EmptyDataset, "sample missingness needs at least one variant");
    }
    const auto c = count_per_sample(ds, [](std::size_t) { return true; });
    std::vector<double> out(ds.n_samples());
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = static_cast<double>(c.missing[i]) / static_cast<double>(ds.n_variants());
    }
    return out;
}

std::vector<double> heterozygosity_rates(const Dataset& ds)
{
    const auto c = count_per_sample(ds, [&](std::size_t j) { return is_autosome(ds.variant(j).chromosome); });
    std::vector<double> out(ds.n_samples(), kNaN);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        const long called = c.hom_major[i] + c.het[i] + c.hom_minor[i];
        if (called > 0)
        {
            out[i] = static_cast<double>(c.het[i]) / static_cast<double>(called);
        }
    }
    return out;
}

std::vector<std::size_t> heterozygosity_outliers(const Dataset& ds, double window_sd)
{
    const auto rates = heterozygosity_rates(ds);
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < rates.size(); ++i)
    {
        if (!std::isnan(rates[i]))
        {
            valid.push_back(i);
        }
    }
    if (valid.size() < 2)
    {
        throw Error(Errc::InsufficientData, "heterozygosity check needs two samples with autosomal calls");
    }
    const auto [lo, hi] = std::minmax_element(valid.begin(), valid.end(),
                                              [&](auto a, auto b) { return rates[a] < rates[b]; });
    if (rates[*lo] == rates[*hi])
    {
        return {};
    }
    double mean = 0.0;
    for (auto i : valid)
    {
        mean += rates[i];
    }
    mean /= static_cast<double>(valid.size());
    double ss = 0.0;
    for (auto i : valid)
    {
        ss += (rates[i] - mean) * (rates[i] - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(valid.size()));
    std::vector<std::size_t> flagged;
    for (auto i : valid)
    {
        if (std::fabs(rates[i] - mean) > window_sd * sd)
        {
            flagged.push_back(i);
        }
    }
    return flagged;
}

std::vector<double> x_homozygosity(const Dataset& ds)
{
    std::vector<std::size_t> x_idx;
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        if (is_x_chromosome(ds.variant(j).chromosome))
        {
            x_idx.push_back(j);
        }
    }
    if (x_idx.empty())
    {
        throw Error(Errc::NoXChromosome, "sex check needs X-chromosome variants");
    }
    const std::size_t n = ds.n_samples();
    std::vector<double> observed(n, 0.0), expected(n, 0.0), called(n, 0.0);
    std::vector<std::int8_t> col(n);
    for (auto j : x_idx)
    {
        ds.column(j, col);
        const double p = allele1_frequency(col);
        if (std::isnan(p))
        {
            continue;
        }
        const double e_hom = 1.0 - 2.0 * p * (1.0 - p);
        for (std::size_t i = 0; i < n; ++i)
        {
            if (col[i] < 0)
            {
                continue;
            }
            called[i] += 1.0;
            expected[i] += e_hom;
            if (col[i] != 1)
            {
                observed[i] += 1.0;
            }
        }
    }
    std::vector<double> f(n, kNaN);
    for (std::size_t i = 0; i < n; ++i)
    {
        const double denom = called[i] - expected[i];
        if (called[i] > 0 && denom > 0)
        {
            f[i] = (observed[i] - expected[i]) / denom;
        }
    }
    return f;
}

std::vector<std::size_t> sex_check(const Dataset& ds, double low, double high)
{
    const auto f = x_homozygosity(ds);
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        if (std::isnan(f[i]))
        {
            continue;
        }
        const bool ambiguous = f[i] > low && f[i] < high;
        const Sex sex = ds.sample(i).reported_sex;
        const bool discordant = (sex == Sex::Male && f[i] <= low) || (sex == Sex::Female && f[i] >= high);
        if (ambiguous || discordant)
        {
            flagged.push_back(i);
        }
    }
    return flagged;
}

Dataset thin_variants(const Dataset& ds, std::size_t max_variants)
{
    if (max_variants == 0 || ds.n_variants() <= max_variants)
    {
        return ds;
    }
    const std::size_t step = (ds.n_variants() + max_variants - 1) / max_variants;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < ds.n_variants(); j += step)
    {
        keep.push_back(j);
    }
    return ds.subset_variants(keep);
}

Eigen::MatrixXd ibd_estimate(const Dataset& ds, unsigned threads)
{
    return ibd_matrix(ds, threads, true);
}

std::vector<std::size_t> ibd_filter(const Eigen::MatrixXd& pi_hat,
                                    std::span<const double> missingness,
                                    std::span<const std::string> individual_ids,
                                    double threshold)
{
    const auto n = static_cast<std::size_t>(pi_hat.rows());
    if (pi_hat.cols() != pi_hat.rows() || missingness.size() != n || individual_ids.size() != n)
    {
        throw Error(Errc::ShapeMismatch, "PI_HAT matrix, missingness and ids disagree in size");
    }
    struct Pair
    {
        double value;
        std::size_t a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < n; ++a)
    {
        for (std::size_t b = a + 1; b < n; ++b)
        {
            const double v = pi_hat(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            if (v > threshold)
            {
                pairs.push_back({v, a, b});
            }
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.value > y.value; });
    std::vector<bool> removed(n, false);
    for (const auto& p : pairs)
    {
        if (removed[p.a] || removed[p.b])
        {
            continue;
        }
        std::size_t drop = p.a;
        if (missingness[p.b] > missingness[p.a])
        {
            drop = p.b;
        }
        else if (missingness[p.b] == missingness[p.a] && individual_ids[p.b] > individual_ids[p.a])
        {
            drop = p.b;
        }
        removed[drop] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (removed[i])
        {
            out.push_back(i);
        }
    }
    return out;
}

PcaResult pca_ancestry(const Dataset& ds, std::size_t k)
{
    const std::size_t n = ds.n_samples();
    if (k < 2 || n < k)
    {
        throw Error(Errc::InsufficientData, "PCA needs k >= 2 and at least k samples");
    }
    std::vector<std::int8_t> col(n);
    std::vector<std::size_t> usable;
    std::vector<std::pair<double, double>> center_scale;
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        ds.column(j, col);
        const double p = allele1_frequency(col);
        if (p > 0.0 && p < 1.0)
        {
            usable.push_back(j);
            center_scale.emplace_back(2.0 * p, std::sqrt(2.0 * p * (1.0 - p)));
        }
    }
    if (usable.empty())
    {
        throw Error(Errc::DegenerateMatrix, "no variant has non-zero variance");
    }
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd z(ni, static_cast<Eigen::Index>(usable.size()));
    for (std::size_t jj = 0; jj < usable.size(); ++jj)
    {
        ds.column(usable[jj], col);
        const auto [mu, sd] = center_scale[jj];
        for (std::size_t i = 0; i < n; ++i)
        {
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) = col[i] < 0 ? 0.0 : (col[i] - mu) / sd;
        }
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ni, ni);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z, 1.0 / static_cast<double>(usable.size()));
    gram = gram.selfadjointView<Eigen::Lower>();

    PcaResult out;
    out.scores.resize(ni, static_cast<Eigen::Index>(k));
    out.eigenvalues.resize(static_cast<Eigen::Index>(k));
    Rng rng(0x5eed);
    for (std::size_t c = 0; c < k; ++c)
    {
        Eigen::VectorXd v(ni);
        for (Eigen::Index i = 0; i < ni; ++i)
        {
            v(i) = rng.normal();
        }
        auto deflate = [&](Eigen::VectorXd& w) {
            for (std::size_t d = 0; d < c; ++d)
            {
                const auto col_d = out.scores.col(static_cast<Eigen::Index>(d));
                w -= col_d.dot(w) * col_d;
            }
        };
        deflate(v);
        v.normalize();
        double lambda = 0.0;
        for (int it = 0; it < 1000; ++it)
        {
            Eigen::VectorXd w = gram * v;
            deflate(w);
            lambda = w.norm();
            if (lambda <= 0.0)
            {
                break;
            }
            w /= lambda;
            const double delta = (w - v).norm();
            v = w;
            if (delta < 1e-10)
            {
                break;
            }
        }
        if (c == 0 && !(lambda > 1e-12))
        {
            throw Error(Errc::DegenerateMatrix, "genotype covariance is zero");
        }
        // Rayleigh quotient for the reported eigenvalue.
        lambda = v.dot(gram * v);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0)
        {
            v = -v;
        }
        out.scores.col(static_cast<Eigen::Index>(c)) = v;
        out.eigenvalues(static_cast<Eigen::Index>(c)) = lambda;
    }
    // Power iteration can converge out of order when eigenvalues are close.
    std::vector<Eigen::Index> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return out.eigenvalues(a) > out.eigenvalues(b); });
    PcaResult sorted;
    sorted.scores.resize(ni, static_cast<Eigen::Index>(k));
    sorted.eigenvalues.resize(static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c)
    {
        sorted.scores.col(static_cast<Eigen::Index>(c)) = out.scores.col(order[c]);
        sorted.eigenvalues(static_cast<Eigen::Index>(c)) = out.eigenvalues(order[c]);
    }
    return sorted;
}

std::vector<std::size_t> pca_outlier_filter(const Eigen::MatrixXd& scores, double pc1_min, double pc2_min)
{
    if (scores.cols() < 2)
    {
        throw Error(Errc::ShapeMismatch, "PCA outlier filter needs two components");
    }
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
    {
        if (scores(i, 0) < pc1_min || scores(i, 1) < pc2_min)
        {
            out.push_back(static_cast<std::size_t>(i));
        }
    }
    return out;
}

std::vector<double> differential_missingness(const Dataset& ds)
{
    const auto y = ds.phenotype_codes();
    const bool has_case = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_control = std::find(y.begin(), y.end(), 0) != y.end();
    if (!has_case || !has_control)
    {
        throw Error(Errc::SingleClass, "differential missingness needs cases and controls");
    }
    std::vector<double> p(ds.n_variants(), 1.0);
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        const auto block = ds.packed_column(j);
        const auto cases = count_column(block, y, 1);
        const auto controls = count_column(block, y, 0);
        const double chi2 = chi2_2x2(static_cast<double>(cases.missing), static_cast<double>(cases.called()),
                                     static_cast<double>(controls.missing), static_cast<double>(controls.called()));
        p[j] = stats::chi2_1df_sf(chi2);
    }
    return p;
}

HweResult hwe_test(long n_hom_major, long n_het, long n_hom_minor)
{
    if (n_hom_major < 0 || n_het < 0 || n_hom_minor < 0 || n_hom_major + n_het + n_hom_minor < 1)
    {
        throw Error(Errc::EmptyCounts, "HWE test needs at least one genotype");
    }
    const double n = static_cast<double>(n_hom_major + n_het + n_hom_minor);
    const double p = (2.0 * static_cast<double>(n_hom_major) + static_cast<double>(n_het)) / (2.0 * n);
    const double q = 1.0 - p;
    const double observed[3] = {static_cast<double>(n_hom_major), static_cast<double>(n_het),
                                static_cast<double>(n_hom_minor)};
    const double expected[3] = {n * p * p, 2.0 * n * p * q, n * q * q};
    double chi2 = 0.0;
    for (int g = 0; g < 3; ++g)
    {
        if (expected[g] > 0.0)
        {
            const double d = observed[g] - expected[g];
            chi2 += d * d / expected[g];
        }
    }
    return {chi2, stats::chi2_1df_sf(chi2)};
}

QcReport variant_filters(const Dataset& ds, const QcThresholds& t)
{
    t.validate();
    QcReport report;
    report.samples_before = report.samples_after = ds.n_samples();
    report.variants_before = ds.n_variants();
    const auto y = ds.phenotype_codes();
    const bool has_case = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_control = std::find(y.begin(), y.end(), 0) != y.end();
    if (!(has_case && has_control))
    {
        report.notes.emplace_back("differential missingness skipped: phenotype has a single class");
    }
    if (!has_control)
    {
        report.notes.emplace_back("HWE computed on all samples: no controls present");
    }

    std::vector<int> reason(ds.n_variants(), -1);
    parallel_for(ds.n_variants(), t.threads, [&](std::size_t j) {
        const auto block = ds.packed_column(j);
        const auto all = count_column(block, y, -2);
        if (has_case && has_control)
        {
            const auto cases = count_column(block, y, 1);
            const auto controls = count_column(block, y, 0);
            const double chi2 = chi2_2x2(static_cast<double>(cases.missing), static_cast<double>(cases.called()),
                                         static_cast<double>(controls.missing),
                                         static_cast<double>(controls.called()));
            if (stats::chi2_1df_sf(chi2) < t.diff_missing_p)
            {
                reason[j] = static_cast<int>(VariantReason::DiffMissingness);
                return;
            }
        }
        const long called = all.called();
        double maf = 0.0;
        if (called > 0)
        {
            const double f = (2.0 * static_cast<double>(all.hom_minor) + static_cast<double>(all.het))
                             / (2.0 * static_cast<double>(called));
            maf = std::min(f, 1.0 - f);
        }
        if (maf < t.maf_min)
        {
            reason[j] = static_cast<int>(VariantReason::Maf);
            return;
        }
        const double call_rate = ds.n_samples() == 0
                                     ? 0.0
                                     : static_cast<double>(called) / static_cast<double>(ds.n_samples());
        if (call_rate < t.variant_call_rate_min)
        {
            reason[j] = static_cast<int>(VariantReason::CallRate);
            return;
        }
        const auto hw = has_control ? count_column(block, y, 0) : all;
        if (hw.called() > 0 && hwe_test(hw.hom_major, hw.het, hw.hom_minor).p < t.hwe_p_min)
        {
            reason[j] = static_cast<int>(VariantReason::Hwe);
        }
    });
    for (std::size_t j = 0; j < reason.size(); ++j)
    {
        if (reason[j] >= 0)
        {
            report.removed_variants.emplace_back(ds.variant(j).id, static_cast<VariantReason>(reason[j]));
        }
    }
    report.variants_after = report.variants_before - report.removed_variants.size();
    return report;
}

std::pair<Dataset, QcReport> run_variant_qc(const Dataset& ds, const QcThresholds& t)
{
    auto report = variant_filters(ds, t);
    std::set<std::string> drop;
    for (const auto& [id, r] : report.removed_variants)
    {
        drop.insert(id);
    }
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        if (!drop.contains(ds.variant(j).id))
        {
            keep.push_back(j);
        }
    }
    return {ds.subset_variants(keep), std::move(report)};
}

std::pair<Dataset, QcReport> run_individual_qc(const Dataset& ds, const QcThresholds& t)
{
    t.validate();
    QcReport report;
    report.samples_before = ds.n_samples();
    report.variants_before = report.variants_after = ds.n_variants();
    const std::size_t n = ds.n_samples();
    std::vector<int> reason(n, -1);
    auto flag = [&](const std::vector<std::size_t>& idx, SampleReason r) {
        for (auto i : idx)
        {
            if (reason[i] < 0)
            {
                reason[i] = static_cast<int>(r);
            }
        }
    };

    try
    {
        flag(sex_check(ds, t.sex_homozygosity_low, t.sex_homozygosity_high), SampleReason::SexCheck);
    }
    catch (const Error& e)
    {
        if (e.code() != Errc::NoXChromosome)
        {
            throw;
        }
        report.notes.emplace_back("sex check skipped: no X-chromosome variants");
    }

    const auto miss = sample_missingness(ds);
    std::vector<std::size_t> high_missing;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (miss[i] >= t.sample_missing_max)
        {
            high_missing.push_back(i);
        }
    }
    flag(high_missing, SampleReason::Missingness);

    flag(heterozygosity_outliers(ds, t.het_sd_window), SampleReason::Heterozygosity);

    const Dataset pruned = autosomal_thinned(ds, t.ld_thin_max_variants);
    if (n >= 2)
    {
        const auto pi = ibd_matrix(pruned, t.threads, false);
        if (pi.hasNaN())
        {
            report.notes.emplace_back("some sample pairs share no called variants; treated as unrelated");
        }
        std::vector<std::string> ids;
        ids.reserve(n);
        for (const auto& s : ds.samples())
        {
            ids.push_back(s.individual_id);
        }
        flag(ibd_filter(pi, miss, ids, t.ibd_max), SampleReason::Relatedness);
    }

    if (t.apply_pca_filter)
    {
        const auto pca = pca_ancestry(pruned, t.pca_components);
        flag(pca_outlier_filter(pca.scores, t.pc1_min, t.pc2_min), SampleReason::Ancestry);
    }
    else
    {
        report.notes.emplace_back("PCA ancestry filter disabled");
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
    {
        if (reason[i] >= 0)
        {
            report.removed_samples.emplace_back(ds.sample(i).individual_id, static_cast<SampleReason>(reason[i]));
        }
        else
        {
            keep.push_back(i);
        }
    }
    report.samples_after = keep.size();
    return {ds.subset_samples(keep), std::move(report)};
}

std::string qc_report_json(const QcReport& report)
{
    nlohmann::ordered_json j;
    j["samples_before"] = report.samples_before;
    j["samples_after"] = report.samples_after;
    j["variants_before"] = report.variants_before;
    j["variants_after"] = report.variants_after;
    j["removed_samples"] = nlohmann::ordered_json::array();
    for (const auto& [id, r] : report.removed_samples)
    {
        j["removed_samples"].push_back({{"id", id}, {"reason", reason_name(r)}});
    }
    j["removed_variants"] = nlohmann::ordered_json::array();
    for (const auto& [id, r] : report.removed_variants)
    {
        j["removed_variants"].push_back({{"id", id}, {"reason", reason_name(r)}});
    }
    j["notes"] = report.notes;
    return j.dump(2);
}

void write_qc_report(const QcReport& report, const std::string& json_path,
                     const std::string& samples_csv, const std::string& variants_csv)
{
    std::ofstream(json_path) << qc_report_json(report) << '\n';
    std::ofstream s(samples_csv);
    s << "id,reason\n";
    for (const auto& [id, r] : report.removed_samples)
    {
        s << id << ',' << reason_name(r) << '\n';
    }
    std::ofstream v(variants_csv);
    v << "id,reason\n";
    for (const auto& [id, r] : report.removed_variants)
    {
        v << id << ',' << reason_name(r) << '\n';
    }
    if (!s || !v)
    {
        throw Error(Errc::IoFailure, "failed writing QC removal lists");
    }
}

}  // namespace snpnet::qc
