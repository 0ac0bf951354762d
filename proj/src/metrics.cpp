#include "snpnet/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "snpnet/error.h"

namespace snpnet::metrics
{

std::size_t ScoredLabels::positives() const
{
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredLabels::negatives() const
{
    return labels.size() - positives();
}

void ScoredLabels::check() const
{
    if (scores.size() != labels.size())
    {
        throw Error(Errc::ShapeMismatch, "scores and labels differ in length");
    }
}

double auc_rank(const ScoredLabels& sl)
{
    sl.check();
    const std::size_t n1 = sl.positives();
    const std::size_t n2 = sl.negatives();
    if (n1 == 0 || n2 == 0)
    {
        throw Error(Errc::SingleClass, "AUC needs both classes");
    }
    const std::size_t n = sl.scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sl.scores[a] < sl.scores[b]; });

    // Ranks are 1-based; tied blocks share the average rank. Work with doubled
    // ranks so every quantity stays an integer.
    long long doubled_rank_sum = 0;
    std::size_t i = 0;
    while (i < n)
    {
        std::size_t j = i + 1;
        while (j < n && sl.scores[order[j]] == sl.scores[order[i]])
        {
            ++j;
        }
        const auto doubled_avg = static_cast<long long>(i + 1 + j);  // 2 * (i+1 + j) / 2
        for (std::size_t k = i; k < j; ++k)
        {
            if (sl.labels[order[k]] == 1)
            {
                doubled_rank_sum += doubled_avg;
            }
        }
        i = j;
    }
    const auto a = static_cast<long long>(n1);
    const long long doubled_u = doubled_rank_sum - a * (a + 1);
    return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(n1) * static_cast<double>(n2));
}

double gini(double auc)
{
    return 2.0 * auc - 1.0;
}

double logloss(const ScoredLabels& sl, double clamp)
{
    sl.check();
    if (sl.scores.empty())
    {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        const double p = std::clamp(sl.scores[i], clamp, 1.0 - clamp);
        total += sl.labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return -total / static_cast<double>(sl.scores.size());
}

double mse(const ScoredLabels& sl)
{
    sl.check();
    if (sl.scores.empty())
    {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        const double d = static_cast<double>(sl.labels[i]) - sl.scores[i];
        total += d * d;
    }
    return total / static_cast<double>(sl.scores.size());
}

Confusion confusion_at(const ScoredLabels& sl, double threshold)
{
    sl.check();
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        const bool predicted = sl.scores[i] >= threshold;
        if (sl.labels[i] == 1)
        {
            predicted ? ++tp : ++fn;
        }
        else
        {
            predicted ? ++fp : ++tn;
        }
    }
    Confusion c;
    if (tp + fn > 0)
    {
        c.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (tn + fp > 0)
    {
        c.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    }
    return c;
}

double misclassification(const ScoredLabels& sl, double threshold)
{
    sl.check();
    if (sl.scores.empty())
    {
        return 0.0;
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        wrong += (sl.scores[i] >= threshold) != (sl.labels[i] == 1) ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(sl.scores.size());
}

double f1_at(const ScoredLabels& sl, double threshold)
{
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < sl.scores.size(); ++i)
    {
        const bool predicted = sl.scores[i] >= threshold;
        if (sl.labels[i] == 1)
        {
            predicted ? ++tp : ++fn;
        }
        else if (predicted)
        {
            ++fp;
        }
    }
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

F1Choice optimal_f1_threshold(const ScoredLabels& sl)
{
    sl.check();
    const std::size_t n_pos = sl.positives();
    if (n_pos == 0)
    {
        throw Error(Errc::NoPositives, "F1 needs at least one case");
    }
    std::vector<double> distinct = sl.scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> candidates{0.0};
    for (std::size_t k = 0; k + 1 < distinct.size(); ++k)
    {
        candidates.push_back(0.5 * (distinct[k] + distinct[k + 1]));
    }
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());

    // Sweep thresholds upward; counts of predicted positives only shrink.
    std::vector<std::size_t> order(sl.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sl.scores[a] < sl.scores[b]; });
    std::size_t tp = n_pos, fp = sl.negatives(), cursor = 0;
    F1Choice best{candidates.front(), -1.0};
    for (double t : candidates)
    {
        while (cursor < order.size() && sl.scores[order[cursor]] < t)
        {
            (sl.labels[order[cursor]] == 1 ? tp : fp) -= 1;
            ++cursor;
        }
        const std::size_t fn = n_pos - tp;
        const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        if (f1 > best.f1)
        {
            best = {t, f1};
        }
    }
    return best;
}

std::vector<RocPoint> roc_points(const ScoredLabels& sl)
{
    sl.check();
    const std::size_t n_pos = sl.positives();
    const std::size_t n_neg = sl.negatives();
    if (n_pos == 0 || n_neg == 0)
    {
        throw Error(Errc::SingleClass, "ROC needs both classes");
    }
    std::vector<std::size_t> order(sl.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sl.scores[a] > sl.scores[b]; });
    std::vector<RocPoint> roc{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size())
    {
        const double s = sl.scores[order[i]];
        while (i < order.size() && sl.scores[order[i]] == s)
        {
            (sl.labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        roc.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return roc;
}

double trapezoid_area(std::span<const RocPoint> roc)
{
    double area = 0.0;
    for (std::size_t k = 1; k < roc.size(); ++k)
    {
        area += (roc[k].fpr - roc[k - 1].fpr) * (roc[k].tpr + roc[k - 1].tpr) * 0.5;
    }
    return area;
}

EvalReport evaluate(const ScoredLabels& sl, double threshold)
{
    EvalReport r;
    r.threshold = threshold;
    const auto c = confusion_at(sl, threshold);
    r.sensitivity = c.sensitivity;
    r.specificity = c.specificity;
    r.auc = auc_rank(sl);
    r.gini = gini(r.auc);
    r.logloss = logloss(sl);
    r.mse = mse(sl);
    r.roc_points = roc_points(sl);
    return r;
}

std::string eval_report_json(const EvalReport& r, int indent)
{
    nlohmann::ordered_json j;
    j["threshold"] = r.threshold;
    j["sensitivity"] = r.sensitivity ? nlohmann::ordered_json(*r.sensitivity) : nlohmann::ordered_json(nullptr);
    j["specificity"] = r.specificity ? nlohmann::ordered_json(*r.specificity) : nlohmann::ordered_json(nullptr);
    j["gini"] = r.gini;
    j["logloss"] = r.logloss;
    j["auc"] = r.auc;
    j["mse"] = r.mse;
    j["roc_point_count"] = r.roc_points.size();
    return j.dump(indent);
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc)
{
    std::ofstream out(path);
    out.precision(17);
    out << "fpr,tpr\n";
    for (const auto& p : roc)
    {
        out << p.fpr << ',' << p.tpr << '\n';
    }
    if (!out)
    {
        throw Error(Errc::IoFailure, "failed writing " + path.string());
    }
}

}  // namespace snpnet::metrics
