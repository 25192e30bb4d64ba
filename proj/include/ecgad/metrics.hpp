#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecgad/rng.hpp"

namespace ecgad {

// One evaluation row; `defined` is false for degenerate strata (single
// class), which are reported rather than silently dropped.
struct MetricReport {
    std::string stratum_key;  // empty for the overall report
    bool defined = true;
    double auroc = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double pre_at_90 = 0.0;
    std::optional<double> dice;
    int n_pos = 0;
    int n_neg = 0;
    double operating_threshold = 0.0;
    std::optional<double> auroc_ci_lo, auroc_ci_hi;
};

// Mann-Whitney AUROC: P(score_pos > score_neg) + 0.5 P(tie). Throws
// DataError when a class is absent.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct OperatingPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

// Threshold maximizing Youden's J (prediction rule: score >= threshold);
// J-ties break toward higher specificity.
OperatingPoint operating_point(const std::vector<double>& scores, const std::vector<int>& labels);

struct PrecisionAtRecall {
    double threshold = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double recall = 0.0;
};

// Largest threshold achieving recall >= target (default 0.90); needs at
// least 10 positives.
PrecisionAtRecall pre_at_recall(const std::vector<double>& scores, const std::vector<int>& labels,
                                double target_recall = 0.90);

// 2|A ^ B| / (|A| + |B|); both-empty defined as 1.
double dice(const std::vector<uint8_t>& pred_mask, const std::vector<uint8_t>& true_mask);

// Paired McNemar test on discordant counts: exact two-sided binomial when
// b + c < 25, else chi-square with continuity correction.
double mcnemar(const std::vector<uint8_t>& correct_a, const std::vector<uint8_t>& correct_b);

// Percentile bootstrap over (score,label) pairs; returns {lo, hi}.
std::pair<double, double> bootstrap_auroc_ci(const std::vector<double>& scores,
                                             const std::vector<int>& labels, int n_replicates,
                                             uint64_t seed, double coverage = 0.95);

// Fills auroc/sens/spec/pre@90/f1 from score-label vectors; marks the report
// undefined when only one class is present.
MetricReport score_report(const std::vector<double>& scores, const std::vector<int>& labels);

enum class StratifyKey { Sex, AgeDecade };

std::string stratum_of(double sex, double age, StratifyKey key);

// Groups items by stratum and applies `report_fn` per group.
struct StratifiedItem {
    double sex = std::numeric_limits<double>::quiet_NaN();
    double age = std::numeric_limits<double>::quiet_NaN();
    double score = 0.0;
    int label = 0;
};

std::vector<MetricReport> stratify(
    const std::vector<StratifiedItem>& items, StratifyKey key,
    const std::function<MetricReport(const std::vector<double>&, const std::vector<int>&)>&
        report_fn = score_report);

}  // namespace ecgad
