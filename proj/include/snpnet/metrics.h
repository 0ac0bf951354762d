#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace snpnet::metrics
{

/// Case probabilities with 0/1 labels (1 = case = positive class).
struct ScoredLabels
{
    std::vector<double> scores;
    std::vector<int> labels;

    [[nodiscard]] std::size_t positives() const;
    [[nodiscard]] std::size_t negatives() const;
    /// Throws ShapeMismatch on unequal lengths.
    void check() const;
};

struct RocPoint
{
    double fpr = 0.0;
    double tpr = 0.0;
};

struct EvalReport
{
    double threshold = 0.5;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    double gini = 0.0;
    double logloss = 0.0;
    double auc = 0.5;
    double mse = 0.0;
    std::vector<RocPoint> roc_points;
};

/// Rank-sum AUC with average ranks for ties; throws SingleClass.
double auc_rank(const ScoredLabels& sl);

/// 2 * auc - 1
double gini(double auc);

double logloss(const ScoredLabels& sl, double clamp = 1e-15);

double mse(const ScoredLabels& sl);

struct Confusion
{
    std::optional<double> sensitivity;  // empty without cases
    std::optional<double> specificity;  // empty without controls
};

/// Score >= threshold predicts a case.
Confusion confusion_at(const ScoredLabels& sl, double threshold);

/// Fraction misclassified at the given threshold.
double misclassification(const ScoredLabels& sl, double threshold = 0.5);

struct F1Choice
{
    double threshold = 0.0;
    double f1 = 0.0;
};

double f1_at(const ScoredLabels& sl, double threshold);

/// Candidates are {0, 1} and midpoints between consecutive distinct scores;
/// ties resolve to the smallest threshold. Throws NoPositives.
F1Choice optimal_f1_threshold(const ScoredLabels& sl);

/// (0,0) then one point per distinct score (descending) ending at (1,1).
std::vector<RocPoint> roc_points(const ScoredLabels& sl);

double trapezoid_area(std::span<const RocPoint> roc);

EvalReport evaluate(const ScoredLabels& sl, double threshold);

std::string eval_report_json(const EvalReport& r, int indent = 2);
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc);

}  // namespace snpnet::metrics
