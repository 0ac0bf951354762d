#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "json.hpp"

#include "oracles.h"
#include "reported_metrics.h"
#include "snpnet/metrics.h"
#include "test_util.h"

using namespace snpnet;
using namespace snpnet::testing;
using metrics::ScoredLabels;

namespace
{

ScoredLabels random_scored(Rng& rng, std::size_t n, bool coarse)
{
    ScoredLabels sl;
    do
    {
        sl.scores.clear();
        sl.labels.clear();
        for (std::size_t i = 0; i < n; ++i)
        {
            // Coarse scores produce many ties.
            const double s = coarse ? static_cast<double>(rng.below(6)) / 5.0 : rng.uniform(0.0, 1.0);
            sl.scores.push_back(s);
            sl.labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
        }
    } while (sl.positives() == 0 || sl.negatives() == 0);
    return sl;
}

double f1_bruteforce(const ScoredLabels& sl, double t)
{
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        const bool pred = sl.scores[i] >= t;
        tp += pred && sl.labels[i] == 1;
        fp += pred && sl.labels[i] == 0;
        fn += !pred && sl.labels[i] == 1;
    }
    return 2 * tp / (2 * tp + fp + fn);
}

}  // namespace

TEST(AucRank, Examples)
{
    EXPECT_EQ(metrics::auc_rank({{0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}}), 1.0);
    EXPECT_EQ(metrics::auc_rank({{0.8, 0.4, 0.6, 0.2}, {1, 1, 0, 0}}), 0.75);
    EXPECT_EQ(metrics::auc_rank({{0.3, 0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0, 0}}), 0.5);
    EXPECT_EQ(error_code([] { (void)metrics::auc_rank({{0.1, 0.2}, {1, 1}}); }), Errc::SingleClass);
    EXPECT_EQ(error_code([] { (void)metrics::auc_rank({{0.1, 0.2}, {1}}); }), Errc::ShapeMismatch);
}

TEST(AucRank, MatchesPairwiseBruteForce)
{
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial)
    {
        const auto sl = random_scored(rng, 2 + rng.below(199), trial % 2 == 0);
        EXPECT_EQ(metrics::auc_rank(sl), auc_brute_force(sl.scores, sl.labels)) << trial;
    }
}

TEST(AucRank, MonotoneTransformAndLabelSwap)
{
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial)
    {
        auto sl = random_scored(rng, 5 + rng.below(50), false);
        const double a = metrics::auc_rank(sl);
        ScoredLabels t = sl;
        for (auto& s : t.scores)
        {
            s = std::exp(3.0 * s) - 7.0;
        }
        EXPECT_EQ(metrics::auc_rank(t), a);
        for (auto& y : t.labels)
        {
            y = 1 - y;
        }
        EXPECT_NEAR(metrics::auc_rank(t), 1.0 - a, 1e-12);
    }
}

TEST(Gini, Examples)
{
    EXPECT_NEAR(metrics::gini(0.9998), 0.9996, 1e-12);
    EXPECT_EQ(metrics::gini(0.5), 0.0);
    EXPECT_NEAR(metrics::gini(0.9825), 0.9651, 1e-4);
}

TEST(Gini, ReproducesReportedPairs)
{
    for (const auto& r : kReportedPairs)
    {
        EXPECT_NEAR(metrics::gini(r.auc), r.gini, 1e-3) << r.row;
    }
}

TEST(Logloss, Examples)
{
    EXPECT_LE(metrics::logloss({{1.0, 0.0}, {1, 0}}), -std::log(1.0 - 1e-15) + 1e-18);
    EXPECT_NEAR(metrics::logloss({{0.5}, {1}}), std::log(2.0), 1e-15);
    EXPECT_NEAR(metrics::logloss({{0.0}, {1}}), 34.54, 5e-3);
    EXPECT_NEAR(metrics::logloss({{0.0}, {1}}), -std::log(1e-15), 1e-9);
}

TEST(Mse, Examples)
{
    EXPECT_EQ(metrics::mse({{1.0, 0.0}, {1, 0}}), 0.0);
    EXPECT_EQ(metrics::mse({{0.5, 0.5}, {1, 0}}), 0.25);
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial)
    {
        const auto sl = random_scored(rng, 2 + rng.below(30), false);
        const double m = metrics::mse(sl);
        EXPECT_GE(m, 0.0);
        EXPECT_LE(m, 1.0);
    }
}

TEST(Confusion, Examples)
{
    const ScoredLabels sl{{0.9, 0.2, 0.6, 0.4}, {1, 0, 0, 1}};
    EXPECT_EQ(metrics::confusion_at(sl, 0.0).sensitivity, 1.0);
    EXPECT_EQ(metrics::confusion_at(sl, std::nextafter(1.0, 2.0)).specificity, 1.0);
    const auto c = metrics::confusion_at({{0.9, 0.2}, {1, 0}}, 0.5);
    EXPECT_EQ(c.sensitivity, 1.0);
    EXPECT_EQ(c.specificity, 1.0);
    // Boundary is inclusive.
    EXPECT_EQ(metrics::confusion_at({{0.5, 0.1}, {1, 0}}, 0.5).sensitivity, 1.0);
    const auto only_cases = metrics::confusion_at({{0.9, 0.2}, {1, 1}}, 0.5);
    EXPECT_EQ(only_cases.sensitivity, 0.5);
    EXPECT_FALSE(only_cases.specificity.has_value());
    EXPECT_EQ(metrics::misclassification(sl, 0.5), 0.5);
}

TEST(OptimalF1, Examples)
{
    const auto a = metrics::optimal_f1_threshold({{0.9, 0.6, 0.4, 0.1}, {1, 1, 0, 0}});
    EXPECT_DOUBLE_EQ(a.threshold, 0.5);
    EXPECT_EQ(a.f1, 1.0);
    // Only the gap midpoint separates perfectly; nothing smaller ties it.
    const auto b = metrics::optimal_f1_threshold({{0.95, 0.7, 0.3, 0.2}, {1, 1, 0, 0}});
    EXPECT_DOUBLE_EQ(b.threshold, 0.5);
    EXPECT_EQ(b.f1, 1.0);
    // All positives: threshold 0 already gives F1 = 1.
    EXPECT_EQ(metrics::optimal_f1_threshold({{0.2, 0.7}, {1, 1}}).threshold, 0.0);
    EXPECT_EQ(error_code([] { (void)metrics::optimal_f1_threshold({{0.2, 0.7}, {0, 0}}); }), Errc::NoPositives);
}

TEST(OptimalF1, GridOracleNeverBeatsIt)
{
    Rng rng(4);
    for (int trial = 0; trial < 500; ++trial)
    {
        const auto sl = random_scored(rng, 2 + rng.below(40), trial % 3 == 0);
        const auto best = metrics::optimal_f1_threshold(sl);
        EXPECT_NEAR(metrics::f1_at(sl, best.threshold), best.f1, 1e-15);
        EXPECT_NEAR(f1_bruteforce(sl, best.threshold), best.f1, 1e-12);
        double grid_best = 0.0;
        for (int k = 0; k <= 10000; ++k)
        {
            grid_best = std::max(grid_best, f1_bruteforce(sl, k * 1e-4));
        }
        EXPECT_LE(grid_best, best.f1 + 1e-12) << trial;
    }
}

TEST(RocPoints, Examples)
{
    const auto perfect = metrics::roc_points({{0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}});
    bool through_corner = false;
    for (const auto& p : perfect)
    {
        through_corner = through_corner || (p.fpr == 0.0 && p.tpr == 1.0);
    }
    EXPECT_TRUE(through_corner);

    const auto minimal = metrics::roc_points({{0.7, 0.2}, {1, 0}});
    ASSERT_EQ(minimal.size(), 3u);
    EXPECT_EQ(minimal.front().fpr, 0.0);
    EXPECT_EQ(minimal.front().tpr, 0.0);
    EXPECT_EQ(minimal.back().fpr, 1.0);
    EXPECT_EQ(minimal.back().tpr, 1.0);
    EXPECT_EQ(error_code([] { (void)metrics::roc_points({{0.7, 0.2}, {0, 0}}); }), Errc::SingleClass);
}

TEST(RocPoints, TrapezoidEqualsAucAndMonotone)
{
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial)
    {
        const auto sl = random_scored(rng, 2 + rng.below(199), trial % 2 == 1);
        const auto roc = metrics::roc_points(sl);
        EXPECT_NEAR(metrics::trapezoid_area(roc), metrics::auc_rank(sl), 1e-9) << trial;
        for (std::size_t k = 1; k < roc.size(); ++k)
        {
            EXPECT_GE(roc[k].fpr, roc[k - 1].fpr);
            EXPECT_GE(roc[k].tpr, roc[k - 1].tpr);
        }
    }
}

TEST(Evaluate, ReportIsConsistent)
{
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial)
    {
        const auto sl = random_scored(rng, 4 + rng.below(60), trial % 2 == 0);
        const auto r = metrics::evaluate(sl, 0.4);
        EXPECT_NEAR(r.gini, 2.0 * r.auc - 1.0, 1e-12);
        EXPECT_EQ(r.auc, metrics::auc_rank(sl));
        EXPECT_EQ(r.logloss, metrics::logloss(sl));
        EXPECT_EQ(r.mse, metrics::mse(sl));
        EXPECT_EQ(r.threshold, 0.4);
        EXPECT_EQ(r.sensitivity, metrics::confusion_at(sl, 0.4).sensitivity);
    }
}

TEST(Evaluate, JsonHasEveryMetric)
{
    const auto r = metrics::evaluate({{0.9, 0.2, 0.6, 0.4}, {1, 0, 0, 1}}, 0.5);
    const auto j = nlohmann::json::parse(metrics::eval_report_json(r));
    for (const char* key : {"sensitivity", "specificity", "gini", "logloss", "auc", "mse", "threshold"})
    {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 0.75);
}

TEST(RocCsv, WritesOneRowPerPoint)
{
    TempDir dir;
    const auto roc = metrics::roc_points({{0.9, 0.2, 0.6, 0.4}, {1, 0, 0, 1}});
    metrics::write_roc_csv(dir / "roc.csv", roc);
    std::ifstream in(dir / "roc.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "fpr,tpr");
    while (std::getline(in, line))
    {
        ++rows;
    }
    EXPECT_EQ(rows, roc.size());
}
