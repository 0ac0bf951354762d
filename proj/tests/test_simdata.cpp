#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "json.hpp"
#include "snpnet/assoc.h"
#include "snpnet/qc.h"
#include "snpnet/simdata.h"
#include "test_util.h"

using namespace snpnet;
using namespace snpnet::testing;

namespace
{

std::vector<int> phenotype_codes(const Dataset& ds)
{
    std::vector<int> y;
    for (std::size_t i = 0; i < ds.n_samples(); ++i)
    {
        y.push_back(ds.sample(i).phenotype == Phenotype::Case ? 1 : 0);
    }
    return y;
}

// Maximized log-likelihood of a logistic model with intercept by Newton steps.
double logistic_max_loglik(const Eigen::MatrixXd& features, const std::vector<int>& y)
{
    const Eigen::Index n = features.rows();
    Eigen::MatrixXd x(n, features.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(features.cols()) = features;
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        yv(i) = y[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    auto loglik = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = x * b;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            ll += yv(i) * eta(i) - std::log1p(std::exp(eta(i)));
        }
        return ll;
    };
    for (int it = 0; it < 50; ++it)
    {
        const Eigen::VectorXd mu = (1.0 + (-(x * beta).array()).exp()).inverse().matrix();
        const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).matrix();
        const Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
        const Eigen::VectorXd step = h.ldlt().solve(x.transpose() * (yv - mu));
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10)
        {
            break;
        }
    }
    return loglik(beta);
}

double ks_uniform(std::vector<double> p)
{
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        d = std::max({d, static_cast<double>(i + 1) / n - p[i], p[i] - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace

TEST(SimSpec, Validation)
{
    sim::SimSpec s;
    EXPECT_NO_THROW(s.validate());
    s.n_variants = 25;
    EXPECT_EQ(error_code([&] { s.validate(); }), Errc::SpecInvalid);
    s = {};
    s.base_prevalence = 1.0;
    EXPECT_EQ(error_code([&] { s.validate(); }), Errc::SpecInvalid);
    s = {};
    s.maf_low = 0.4;
    s.maf_high = 0.2;
    EXPECT_EQ(error_code([&] { s.validate(); }), Errc::SpecInvalid);
    EXPECT_EQ(error_code([&] { (void)sim::generate(s); }), Errc::SpecInvalid);
}

TEST(Generate, NullScanIsUniform)
{
    sim::SimSpec s;
    s.n_samples = 2000;
    s.n_variants = 5000;
    s.n_marginal = 0;
    s.n_epistatic_pairs = 0;
    s.seed = 11;
    const auto sim = sim::generate(s);
    const auto results = assoc::association_scan(sim.dataset);
    std::vector<double> p;
    for (const auto& r : results)
    {
        ASSERT_TRUE(r.evaluable());
        p.push_back(r.p);
    }
    EXPECT_LT(ks_uniform(p), 0.05);
}

TEST(Generate, XorPairsHaveWeakMarginalStrongJointSignal)
{
    sim::SimSpec s;
    s.n_samples = 2000;
    s.n_variants = 200;
    s.n_marginal = 0;
    s.n_epistatic_pairs = 10;
    s.epistatic_odds_ratio = 4.0;
    // Intercept chosen so that roughly half the cohort are cases.
    s.base_prevalence = 0.002;
    s.seed = 3;
    const auto sim = sim::generate(s);
    const auto& ds = sim.dataset;
    const auto y = phenotype_codes(ds);
    const auto scan = assoc::association_scan(ds);

    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < ds.n_variants(); ++j)
    {
        index[ds.variant(j).id] = j;
    }
    std::size_t members = 0, weak_marginal = 0, pairs = 0, joint_significant = 0;
    for (const auto& c : sim.truth.causal)
    {
        ASSERT_NE(c.role, "marginal");
        ++members;
        weak_marginal += scan[c.index].p > 5e-8;
        if (c.role != "epistatic_a")
        {
            continue;
        }
        ++pairs;
        const auto a = ds.column(c.index);
        const auto b = ds.column(index.at(c.partner));
        Eigen::MatrixXd cells(static_cast<Eigen::Index>(y.size()), 2);
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            const double ca = a[i] >= 1 ? 1.0 : 0.0;
            const double cb = b[i] >= 1 ? 1.0 : 0.0;
            cells(static_cast<Eigen::Index>(i), 0) = ca * (1.0 - cb);
            cells(static_cast<Eigen::Index>(i), 1) = (1.0 - ca) * cb;
        }
        const double lrt = 2.0 * (logistic_max_loglik(cells, y)
                                  - logistic_max_loglik(Eigen::MatrixXd(static_cast<Eigen::Index>(y.size()), 0), y));
        // Upper tail of chi-square with 2 degrees of freedom.
        joint_significant += std::exp(-lrt / 2.0) < 5e-8;
    }
    ASSERT_EQ(pairs, 10u);
    ASSERT_EQ(members, 20u);
    EXPECT_GE(weak_marginal, 16u);
    EXPECT_GE(joint_significant, 8u);
}

TEST(Generate, MissingRate)
{
    sim::SimSpec s;
    s.n_samples = 300;
    s.n_variants = 200;
    s.missing_rate = 0.0;
    const auto clean = sim::generate(s);
    std::size_t missing = 0;
    for (std::size_t j = 0; j < clean.dataset.n_variants(); ++j)
    {
        const auto col = clean.dataset.column(j);
        missing += static_cast<std::size_t>(std::count(col.begin(), col.end(), -1));
    }
    EXPECT_EQ(missing, 0u);

    s.missing_rate = 0.05;
    const auto holes = sim::generate(s);
    missing = 0;
    for (std::size_t j = 0; j < holes.dataset.n_variants(); ++j)
    {
        const auto col = holes.dataset.column(j);
        missing += static_cast<std::size_t>(std::count(col.begin(), col.end(), -1));
    }
    EXPECT_NEAR(static_cast<double>(missing) / (300.0 * 200.0), 0.05, 0.005);
}

TEST(Generate, NullColumnsFollowHweAndDrawnMaf)
{
    sim::SimSpec s;
    s.n_samples = 2000;
    s.n_variants = 2000;
    s.seed = 5;
    const auto sim = sim::generate(s);
    std::set<std::size_t> causal;
    for (const auto& c : sim.truth.causal)
    {
        causal.insert(c.index);
    }
    std::size_t nulls = 0, hwe_pass = 0;
    for (std::size_t j = 0; j < sim.dataset.n_variants(); ++j)
    {
        const auto col = sim.dataset.column(j);
        const double f = allele1_frequency(col);
        const double drawn = sim.truth.maf[j];
        EXPECT_NEAR(f, std::min(drawn, 1.0 - drawn), 0.03) << j;
        if (causal.count(j) == 0)
        {
            ++nulls;
            long counts[3] = {0, 0, 0};
            for (auto d : col)
            {
                ++counts[d];
            }
            hwe_pass += qc::hwe_test(counts[0], counts[1], counts[2]).p >= 1e-5;
        }
    }
    EXPECT_GE(static_cast<double>(hwe_pass), 0.99 * static_cast<double>(nulls));
}

TEST(Generate, ManifestListsCausalVariants)
{
    sim::SimSpec s;
    s.n_samples = 200;
    s.n_variants = 100;
    s.n_marginal = 3;
    s.n_epistatic_pairs = 2;
    s.epistasis_model = sim::EpistasisModel::Threshold;
    const auto sim = sim::generate(s);
    ASSERT_EQ(sim.truth.causal.size(), 7u);
    const auto j = nlohmann::json::parse(sim::manifest_json(s, sim.truth));
    EXPECT_EQ(j["causal"].size(), 7u);
    std::size_t marginal = 0;
    for (const auto& c : sim.truth.causal)
    {
        EXPECT_EQ(sim.dataset.variant(c.index).id, c.variant_id);
        if (c.role == "marginal")
        {
            ++marginal;
            EXPECT_NEAR(c.log_odds, std::log(1.5), 1e-12);
        }
        else
        {
            EXPECT_FALSE(c.partner.empty());
            EXPECT_NEAR(c.log_odds, std::log(3.0), 1e-12);
        }
    }
    EXPECT_EQ(marginal, 3u);
    for (auto m : {sim::EpistasisModel::Xor, sim::EpistasisModel::Multiplicative, sim::EpistasisModel::Threshold})
    {
        EXPECT_EQ(sim::parse_model(sim::model_name(m)), m);
    }
}

TEST(Generate, DeterministicAndThreadIndependent)
{
    sim::SimSpec s;
    s.n_samples = 500;
    s.n_variants = 300;
    s.missing_rate = 0.01;
    s.seed = 9;
    const auto a = sim::generate(s, 1);
    const auto b = sim::generate(s, 1);
    const auto c = sim::generate(s, 4);
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(a.dataset, c.dataset);
    EXPECT_EQ(sim::manifest_json(s, a.truth), sim::manifest_json(s, c.truth));
    s.seed = 10;
    EXPECT_FALSE(sim::generate(s).dataset == a.dataset);
}

TEST(Split, ThousandSamples)
{
    std::vector<int> strata(1000);
    for (std::size_t i = 0; i < strata.size(); ++i)
    {
        strata[i] = static_cast<int>(i % 2);
    }
    const auto sp = sim::split(strata, {0.8, 0.1, 0.1}, 1);
    EXPECT_EQ(sp.train.size(), 800u);
    EXPECT_EQ(sp.valid.size(), 100u);
    EXPECT_EQ(sp.test.size(), 100u);
    std::vector<std::size_t> all;
    for (const auto* part : {&sp.train, &sp.valid, &sp.test})
    {
        EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
        all.insert(all.end(), part->begin(), part->end());
        std::size_t ones = 0;
        for (auto i : *part)
        {
            ones += static_cast<std::size_t>(strata[i]);
        }
        EXPECT_LE(std::abs(static_cast<long>(2 * ones) - static_cast<long>(part->size())), 2);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        EXPECT_EQ(all[i], i);
    }
}

TEST(Split, StratifiedDisjointDeterministic)
{
    Rng rng(2);
    for (int trial = 0; trial < 300; ++trial)
    {
        const std::size_t n = 30 + rng.below(500);
        std::vector<int> strata(n);
        const double rate = rng.uniform(0.1, 0.9);
        // Every third trial adds a third stratum (missing phenotype).
        const double missing = trial % 3 == 0 ? 0.05 : 0.0;
        for (auto& s : strata)
        {
            s = rng.bernoulli(missing) ? -1 : (rng.bernoulli(rate) ? 1 : 0);
        }
        const std::array<double, 3> frac{0.8, 0.1, 0.1};
        const std::uint64_t seed = rng.next();
        const auto sp = sim::split(strata, frac, seed);
        const auto again = sim::split(strata, frac, seed);
        EXPECT_EQ(sp.train, again.train);
        EXPECT_EQ(sp.test, again.test);

        const auto totals = sim::apportion(n, {frac[0], frac[1], frac[2]});
        std::vector<int> seen(n, 0);
        const std::array<const std::vector<std::size_t>*, 3> parts{&sp.train, &sp.valid, &sp.test};
        for (std::size_t k = 0; k < 3; ++k)
        {
            EXPECT_EQ(parts[k]->size(), totals[k]);
            for (int cls : {-1, 0, 1})
            {
                const double in_class = static_cast<double>(std::count(strata.begin(), strata.end(), cls));
                double here = 0.0;
                for (auto i : *parts[k])
                {
                    here += strata[i] == cls ? 1.0 : 0.0;
                }
                EXPECT_LT(std::fabs(here - frac[k] * in_class), 1.0) << trial << " class " << cls;
            }
            for (auto i : *parts[k])
            {
                ++seen[i];
            }
        }
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
}

TEST(Split, Errors)
{
    const std::vector<int> strata{0, 1, 0, 1};
    EXPECT_EQ(error_code([&] { (void)sim::split(strata, {0.5, 0.5, 0.5}, 1); }), Errc::ConfigInvalid);
    EXPECT_EQ(error_code([&] { (void)sim::split(strata, {0.8, 0.1, 0.1}, 1); }), Errc::TooFewSamples);
}

TEST(Apportion, LargestRemainder)
{
    EXPECT_EQ(sim::apportion(1000, {0.8, 0.1, 0.1}), (std::vector<std::size_t>{800, 100, 100}));
    EXPECT_EQ(sim::apportion(10, {1.0, 1.0, 1.0}), (std::vector<std::size_t>{4, 3, 3}));
    EXPECT_EQ(sim::apportion(7, {0.5, 0.5}), (std::vector<std::size_t>{4, 3}));
}
