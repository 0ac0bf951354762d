#include "snpnet/simdata.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "snpnet/error.h"
#include "snpnet/parallel.h"
#include "snpnet/rng.h"

namespace snpnet::sim
{

namespace
{

// Stream ids for derive_seed; variant columns use their index.
constexpr std::uint64_t kSexStream = 1ull << 40;
constexpr std::uint64_t kCausalStream = kSexStream + 1;
constexpr std::uint64_t kPhenotypeStream = kSexStream + 2;
constexpr std::uint64_t kDiffMissingStream = 1ull << 41;
constexpr std::uint64_t kSplitStream = 1ull << 42;

std::string format_id(const char* prefix, std::size_t k, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, k);
    return buf;
}

double pair_term(EpistasisModel m, int a, int b)
{
    switch (m)
    {
        case EpistasisModel::Xor: return ((a >= 1) != (b >= 1)) ? 1.0 : 0.0;
        case EpistasisModel::Multiplicative: return static_cast<double>(a * b);
        case EpistasisModel::Threshold: return (a >= 1 && b >= 1) ? 1.0 : 0.0;
    }
    return 0.0;
}

}  // namespace

std::string model_name(EpistasisModel m)
{
    switch (m)
    {
        case EpistasisModel::Xor: return "xor";
        case EpistasisModel::Multiplicative: return "multiplicative";
        case EpistasisModel::Threshold: return "threshold";
    }
    return "xor";
}

EpistasisModel parse_model(const std::string& s)
{
    if (s == "xor") return EpistasisModel::Xor;
    if (s == "multiplicative") return EpistasisModel::Multiplicative;
    if (s == "threshold") return EpistasisModel::Threshold;
    throw Error(Errc::SpecInvalid, "unknown epistasis model '" + s + "'");
}

void SimSpec::validate() const
{
    auto fail = [](const std::string& why) { throw Error(Errc::SpecInvalid, why); };
    if (n_samples == 0)
    {
        fail("n_samples must be positive");
    }
    if (!(maf_low >= 0.0 && maf_low <= maf_high && maf_high <= 0.5))
    {
        fail("maf range must satisfy 0 <= low <= high <= 0.5");
    }
    if (n_marginal + 2 * n_epistatic_pairs + n_diff_missing > n_variants)
    {
        fail("n_marginal + 2 * n_epistatic_pairs + n_diff_missing exceeds n_variants");
    }
    if (!(marginal_odds_ratio > 0.0) || !(epistatic_odds_ratio > 0.0))
    {
        fail("odds ratios must be positive");
    }
    if (!(base_prevalence > 0.0 && base_prevalence < 1.0))
    {
        fail("base_prevalence must lie in (0,1)");
    }
    if (!(missing_rate >= 0.0 && missing_rate < 1.0) || !(diff_missing_rate >= 0.0 && diff_missing_rate <= 1.0))
    {
        fail("missing rates must lie in [0,1)");
    }
}

Simulation generate(const SimSpec& spec, unsigned threads)
{
    spec.validate();
    const std::size_t n = spec.n_samples;
    const std::size_t m_auto = spec.n_variants;
    const std::size_t m = m_auto + spec.n_x_variants;

    std::vector<SampleRecord> samples(n);
    Rng sex_rng(derive_seed(spec.seed, kSexStream));
    for (std::size_t i = 0; i < n; ++i)
    {
        samples[i].family_id = format_id("S", i + 1, 5);
        samples[i].individual_id = samples[i].family_id;
        samples[i].reported_sex = sex_rng.bernoulli(0.5) ? Sex::Male : Sex::Female;
        samples[i].phenotype = Phenotype::Missing;
    }

    std::vector<VariantRecord> variants(m);
    const std::size_t per_chrom = std::max<std::size_t>(1, (m_auto + 21) / 22);
    for (std::size_t j = 0; j < m; ++j)
    {
        auto& v = variants[j];
        if (j < m_auto)
        {
            v.id = format_id("snp", j + 1, 6);
            v.chromosome = std::to_string(1 + j / per_chrom);
            v.position = static_cast<std::int64_t>(10000 + 1000 * (j % per_chrom));
        }
        else
        {
            v.id = format_id("xsnp", j - m_auto + 1, 5);
            v.chromosome = "X";
            v.position = static_cast<std::int64_t>(10000 + 1000 * (j - m_auto));
        }
        v.allele1 = "A";
        v.allele2 = "G";
    }

    // Causal and injected roles over a shuffled autosomal index list.
    std::vector<std::size_t> order(m_auto);
    std::iota(order.begin(), order.end(), 0);
    Rng causal_rng(derive_seed(spec.seed, kCausalStream));
    causal_rng.shuffle(order.begin(), order.end());
    std::vector<std::size_t> marginal(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.n_marginal));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < spec.n_epistatic_pairs; ++k)
    {
        pairs.emplace_back(order[spec.n_marginal + 2 * k], order[spec.n_marginal + 2 * k + 1]);
    }
    const std::size_t diff_start = spec.n_marginal + 2 * spec.n_epistatic_pairs;
    std::vector<std::size_t> diff(order.begin() + static_cast<std::ptrdiff_t>(diff_start),
                                  order.begin() + static_cast<std::ptrdiff_t>(diff_start + spec.n_diff_missing));
    std::sort(diff.begin(), diff.end());

    std::unordered_map<std::size_t, std::size_t> keep_slot;
    for (auto j : marginal)
    {
        keep_slot.emplace(j, keep_slot.size());
    }
    for (auto [a, b] : pairs)
    {
        keep_slot.emplace(a, keep_slot.size());
        keep_slot.emplace(b, keep_slot.size());
    }

    Dataset ds(samples, variants);
    GroundTruth truth;
    truth.maf.assign(m, 0.0);
    std::vector<std::vector<std::int8_t>> true_dosage(keep_slot.size());

    parallel_for(m, threads, [&](std::size_t j) {
        Rng rng(derive_seed(spec.seed, j));
        const double maf = rng.uniform(spec.maf_low, spec.maf_high);
        truth.maf[j] = maf;
        const bool x = j >= m_auto;
        std::vector<std::int8_t> col(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            if (x && samples[i].reported_sex == Sex::Male)
            {
                col[i] = rng.bernoulli(maf) ? 2 : 0;
            }
            else
            {
                col[i] = static_cast<std::int8_t>((rng.bernoulli(maf) ? 1 : 0) + (rng.bernoulli(maf) ? 1 : 0));
            }
        }
        if (auto it = keep_slot.find(j); it != keep_slot.end())
        {
            true_dosage[it->second] = col;
        }
        if (spec.missing_rate > 0.0)
        {
            for (std::size_t i = 0; i < n; ++i)
            {
                if (rng.bernoulli(spec.missing_rate))
                {
                    col[i] = kMissingDosage;
                }
            }
        }
        ds.set_column(j, col);
    });

    // Liability logit and phenotypes.
    const double base = std::log(spec.base_prevalence / (1.0 - spec.base_prevalence));
    const double b_marg = std::log(spec.marginal_odds_ratio);
    const double b_epi = std::log(spec.epistatic_odds_ratio);
    std::vector<double> logit(n, base);
    for (auto j : marginal)
    {
        const auto& d = true_dosage[keep_slot.at(j)];
        for (std::size_t i = 0; i < n; ++i)
        {
            logit[i] += b_marg * d[i];
        }
    }
    for (auto [a, b] : pairs)
    {
        const auto& da = true_dosage[keep_slot.at(a)];
        const auto& db = true_dosage[keep_slot.at(b)];
        for (std::size_t i = 0; i < n; ++i)
        {
            logit[i] += b_epi * pair_term(spec.epistasis_model, da[i], db[i]);
        }
    }
    Rng pheno_rng(derive_seed(spec.seed, kPhenotypeStream));
    for (std::size_t i = 0; i < n; ++i)
    {
        const double prob = 1.0 / (1.0 + std::exp(-logit[i]));
        ds.sample(i).phenotype = pheno_rng.bernoulli(prob) ? Phenotype::Case : Phenotype::Control;
    }

    for (auto j : diff)
    {
        Rng rng(derive_seed(spec.seed, kDiffMissingStream + j));
        for (std::size_t i = 0; i < n; ++i)
        {
            if (ds.sample(i).phenotype == Phenotype::Case && rng.bernoulli(spec.diff_missing_rate))
            {
                ds.set_call(i, j, GenotypeCall::Missing);
            }
        }
        truth.diff_missing.push_back(variants[j].id);
    }

    for (auto j : marginal)
    {
        truth.causal.push_back({variants[j].id, j, "marginal", b_marg, "", truth.maf[j]});
    }
    for (auto [a, b] : pairs)
    {
        truth.causal.push_back({variants[a].id, a, "epistatic_a", b_epi, variants[b].id, truth.maf[a]});
        truth.causal.push_back({variants[b].id, b, "epistatic_b", b_epi, variants[a].id, truth.maf[b]});
    }

    Simulation out;
    out.dataset = orient_minor_allele(ds);
    for (std::size_t j = 0; j < m; ++j)
    {
        if (out.dataset.variant(j).allele1 != ds.variant(j).allele1)
        {
            truth.flipped.push_back(variants[j].id);
        }
    }
    out.truth = std::move(truth);
    return out;
}

std::string manifest_json(const SimSpec& spec, const GroundTruth& truth)
{
    nlohmann::ordered_json j;
    nlohmann::ordered_json s;
    s["n_samples"] = spec.n_samples;
    s["n_variants"] = spec.n_variants;
    s["maf_range"] = {spec.maf_low, spec.maf_high};
    s["n_marginal"] = spec.n_marginal;
    s["marginal_odds_ratio"] = spec.marginal_odds_ratio;
    s["n_epistatic_pairs"] = spec.n_epistatic_pairs;
    s["epistasis_model"] = model_name(spec.epistasis_model);
    s["epistatic_odds_ratio"] = spec.epistatic_odds_ratio;
    s["base_prevalence"] = spec.base_prevalence;
    s["missing_rate"] = spec.missing_rate;
    s["n_x_variants"] = spec.n_x_variants;
    s["n_diff_missing"] = spec.n_diff_missing;
    s["diff_missing_rate"] = spec.diff_missing_rate;
    s["seed"] = spec.seed;
    j["spec"] = s;
    auto causal = nlohmann::ordered_json::array();
    for (const auto& c : truth.causal)
    {
        nlohmann::ordered_json e;
        e["variant_id"] = c.variant_id;
        e["role"] = c.role;
        e["model"] = c.role == "marginal" ? "additive" : model_name(spec.epistasis_model);
        e["log_odds"] = c.log_odds;
        e["partner"] = c.partner;
        e["maf"] = c.maf;
        causal.push_back(e);
    }
    j["causal"] = causal;
    j["diff_missing"] = truth.diff_missing;
    j["flipped"] = truth.flipped;
    return j.dump(2);
}

std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& weights)
{
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size(), 0);
    if (total <= 0.0)
    {
        return out;
    }
    std::vector<double> frac(weights.size());
    std::size_t used = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
    {
        const double q = static_cast<double>(n) * weights[k] / total;
        out[k] = static_cast<std::size_t>(std::floor(q));
        frac[k] = q - std::floor(q);
        used += out[k];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
    for (std::size_t r = 0; used < n; ++r, ++used)
    {
        ++out[order[r % order.size()]];
    }
    return out;
}

SplitIndices split(const std::vector<int>& strata, std::array<double, 3> fractions, std::uint64_t seed)
{
    double sum = 0.0;
    for (double f : fractions)
    {
        if (!(f >= 0.0))
        {
            throw Error(Errc::ConfigInvalid, "split fractions must be non-negative");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
    {
        throw Error(Errc::ConfigInvalid, "split fractions must sum to 1");
    }
    const std::vector<double> w(fractions.begin(), fractions.end());
    const std::size_t n = strata.size();
    const auto totals = apportion(n, w);
    for (std::size_t k = 0; k < 3; ++k)
    {
        if (fractions[k] > 0.0 && totals[k] == 0)
        {
            throw Error(Errc::TooFewSamples, std::to_string(n) + " samples cannot fill every split");
        }
    }

    std::vector<int> classes(strata.begin(), strata.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    // Per-class quotas: floors first, then remaining units to the largest
    // fractional parts subject to both class and split totals.
    const std::size_t nc = classes.size();
    std::vector<std::vector<std::size_t>> members(nc);
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto c = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), strata[i])
                                                - classes.begin());
        members[c].push_back(i);
    }
    std::vector<std::array<std::size_t, 3>> alloc(nc);
    std::vector<std::size_t> row_left(nc);
    std::array<std::size_t, 3> col_left = {totals[0], totals[1], totals[2]};
    struct Cell
    {
        double frac;
        std::size_t c, k;
    };
    std::vector<Cell> cells;
    for (std::size_t c = 0; c < nc; ++c)
    {
        std::size_t used = 0;
        for (std::size_t k = 0; k < 3; ++k)
        {
            const double q = static_cast<double>(members[c].size()) * fractions[k];
            alloc[c][k] = static_cast<std::size_t>(std::floor(q));
            used += alloc[c][k];
            col_left[k] -= alloc[c][k];
            cells.push_back({q - std::floor(q), c, k});
        }
        row_left[c] = members[c].size() - used;
    }
    // Round each class row up in exactly row_left cells with a fractional part
    // so that split totals are met; among such roundings keep the one with the
    // largest summed remainders (the first found on ties).
    std::vector<std::array<bool, 3>> best_up;
    double best_score = -1.0;
    std::vector<std::array<bool, 3>> up(nc, {false, false, false});
    std::function<void(std::size_t, double)> search = [&](std::size_t c, double score) {
        if (c == nc)
        {
            if (col_left[0] == 0 && col_left[1] == 0 && col_left[2] == 0 && score > best_score)
            {
                best_score = score;
                best_up = up;
            }
            return;
        }
        for (unsigned mask = 0; mask < 8; ++mask)
        {
            if (static_cast<std::size_t>(std::popcount(mask)) != row_left[c])
            {
                continue;
            }
            bool ok = true;
            double add = 0.0;
            for (std::size_t k = 0; k < 3 && ok; ++k)
            {
                if (mask & (1u << k))
                {
                    const double frac = cells[c * 3 + k].frac;
                    ok = frac > 0.0 && col_left[k] > 0;
                    add += frac;
                }
            }
            if (!ok)
            {
                continue;
            }
            for (std::size_t k = 0; k < 3; ++k)
            {
                up[c][k] = (mask & (1u << k)) != 0;
                col_left[k] -= up[c][k] ? 1 : 0;
            }
            search(c + 1, score + add);
            for (std::size_t k = 0; k < 3; ++k)
            {
                col_left[k] += up[c][k] ? 1 : 0;
                up[c][k] = false;
            }
        }
    };
    search(0, 0.0);
    if (best_score >= 0.0)
    {
        for (std::size_t c = 0; c < nc; ++c)
        {
            for (std::size_t k = 0; k < 3; ++k)
            {
                if (best_up[c][k])
                {
                    ++alloc[c][k];
                    --row_left[c];
                    --col_left[k];
                }
            }
        }
    }
    for (std::size_t c = 0; c < nc; ++c)
    {
        for (std::size_t k = 0; k < 3 && row_left[c] > 0; ++k)
        {
            const std::size_t take = std::min(row_left[c], col_left[k]);
            alloc[c][k] += take;
            row_left[c] -= take;
            col_left[k] -= take;
        }
    }

    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> dest = {&out.train, &out.valid, &out.test};
    for (std::size_t c = 0; c < nc; ++c)
    {
        auto idx = members[c];
        Rng rng(derive_seed(seed, kSplitStream + c));
        rng.shuffle(idx.begin(), idx.end());
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k)
        {
            dest[k]->insert(dest[k]->end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                            idx.begin() + static_cast<std::ptrdiff_t>(pos + alloc[c][k]));
            pos += alloc[c][k];
        }
    }
    for (auto* d : dest)
    {
        std::sort(d->begin(), d->end());
    }
    return out;
}

SplitIndices split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed)
{
    return split(ds.phenotype_codes(), fractions, seed);
}

}  // namespace snpnet::sim
