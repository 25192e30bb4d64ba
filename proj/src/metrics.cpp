#include "ecgad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgad/errors.hpp"

namespace ecgad {

namespace {

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                  const char* op) {
    require(scores.size() == labels.size(), std::string(op) + ": scores/labels length mismatch");
    require(!scores.empty(), std::string(op) + ": empty input");
}

int count_pos(const std::vector<int>& labels) {
    return static_cast<int>(std::count(labels.begin(), labels.end(), 1));
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary(scores, labels, "auroc");
    const int n = static_cast<int>(scores.size());
    const int np = count_pos(labels);
    const int nn = n - np;
    if (np == 0 || nn == 0) throw DataError("auroc: undefined, only one class present");

    // Midrank formulation of the Mann-Whitney statistic.
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * (i + j) + 1.0;
        for (int k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (int k = 0; k < n; ++k)
        if (labels[k] == 1) rank_sum += rank[k];
    return (rank_sum - 0.5 * np * (np + 1.0)) / (static_cast<double>(np) * nn);
}

OperatingPoint operating_point(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_binary(scores, labels, "operating_point");
    const int np = count_pos(labels);
    const int nn = static_cast<int>(labels.size()) - np;
    if (np == 0 || nn == 0) throw DataError("operating_point: undefined, only one class present");

    // Sweep thresholds downward through the sorted unique scores; start
    // above the max (predict nothing positive).
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    double best_j = -2.0;
    OperatingPoint best{scores[idx[0]] + 1.0, 0.0, 1.0};
    int tp = 0, fp = 0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const double sens = static_cast<double>(tp) / np;
        const double spec = static_cast<double>(nn - fp) / nn;
        const double youden = sens + spec - 1.0;
        // strictly-better J wins; ties prefer higher specificity
        if (youden > best_j + 1e-15 ||
            (std::abs(youden - best_j) <= 1e-15 && spec > best.specificity)) {
            best_j = youden;
            best = {scores[idx[i]], sens, spec};
        }
        i = j;
    }
    return best;
}

PrecisionAtRecall pre_at_recall(const std::vector<double>& scores, const std::vector<int>& labels,
                                double target_recall) {
    check_binary(scores, labels, "pre_at_recall");
    const int np = count_pos(labels);
    if (np < 10) throw DataError("pre_at_recall: needs at least 10 positives");

    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    int tp = 0, fp = 0;
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            if (labels[idx[j]] == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const double recall = static_cast<double>(tp) / np;
        if (recall >= target_recall) {
            PrecisionAtRecall out;
            out.threshold = scores[idx[i]];
            out.recall = recall;
            out.precision = static_cast<double>(tp) / (tp + fp);
            out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
            return out;
        }
        i = j;
    }
    throw DataError("pre_at_recall: target recall unreachable");
}

double dice(const std::vector<uint8_t>& pred_mask, const std::vector<uint8_t>& true_mask) {
    require(pred_mask.size() == true_mask.size(), "dice: mask length mismatch");
    size_t inter = 0, a = 0, b = 0;
    for (size_t i = 0; i < pred_mask.size(); ++i) {
        const bool pa = pred_mask[i] != 0, pb = true_mask[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        a += pa ? 1 : 0;
        b += pb ? 1 : 0;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

double mcnemar(const std::vector<uint8_t>& correct_a, const std::vector<uint8_t>& correct_b) {
    require(correct_a.size() == correct_b.size(), "mcnemar: paired vectors must match in length");
    long long b = 0, c = 0;
    for (size_t i = 0; i < correct_a.size(); ++i) {
        const bool ca = correct_a[i] != 0, cb = correct_b[i] != 0;
        if (ca && !cb) ++b;
        if (!ca && cb) ++c;
    }
    const long long n = b + c;
    if (n == 0) return 1.0;
    if (n < 25) {
        // exact two-sided binomial sign test
        const long long k = std::min(b, c);
        double cum = 0.0;
        double logc = 0.0;  // log C(n, 0)
        for (long long i = 0; i <= k; ++i) {
            cum += std::exp(logc - static_cast<double>(n) * std::log(2.0));
            logc += std::log(static_cast<double>(n - i)) - std::log(static_cast<double>(i + 1));
        }
        return std::min(1.0, 2.0 * cum);
    }
    const double chi2 = (std::abs(static_cast<double>(b - c)) - 1.0) *
                        (std::abs(static_cast<double>(b - c)) - 1.0) / static_cast<double>(n);
    // survival of chi-square with 1 dof
    return std::erfc(std::sqrt(chi2 / 2.0));
}

std::pair<double, double> bootstrap_auroc_ci(const std::vector<double>& scores,
                                             const std::vector<int>& labels, int n_replicates,
                                             uint64_t seed, double coverage) {
    check_binary(scores, labels, "bootstrap_auroc_ci");
    require(n_replicates >= 2, "bootstrap_auroc_ci: too few replicates");
    const int n = static_cast<int>(scores.size());
    std::vector<double> stats;
    stats.reserve(n_replicates);
    for (int r = 0; r < n_replicates; ++r) {
        Rng rng = Rng::derive(seed, {0xb00cULL, static_cast<uint64_t>(r)});
        std::vector<double> s(n);
        std::vector<int> l(n);
        for (int i = 0; i < n; ++i) {
            const int j = rng.uniform_int(0, n - 1);
            s[i] = scores[j];
            l[i] = labels[j];
        }
        try {
            stats.push_back(auroc(s, l));
        } catch (const DataError&) {
            // single-class resample; skip
        }
    }
    if (stats.size() < 2) throw DataError("bootstrap_auroc_ci: degenerate resamples");
    std::sort(stats.begin(), stats.end());
    const double alpha = (1.0 - coverage) / 2.0;
    const auto pick = [&](double q) {
        const double pos = q * (stats.size() - 1);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(stats.size() - 1, lo + 1);
        const double frac = pos - lo;
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    return {pick(alpha), pick(1.0 - alpha)};
}

MetricReport score_report(const std::vector<double>& scores, const std::vector<int>& labels) {
    MetricReport r;
    r.n_pos = count_pos(labels);
    r.n_neg = static_cast<int>(labels.size()) - r.n_pos;
    if (r.n_pos == 0 || r.n_neg == 0) {
        r.defined = false;
        return r;
    }
    r.auroc = auroc(scores, labels);
    OperatingPoint op = operating_point(scores, labels);
    r.operating_threshold = op.threshold;
    r.sensitivity = op.sensitivity;
    r.specificity = op.specificity;
    if (r.n_pos >= 10) {
        PrecisionAtRecall par = pre_at_recall(scores, labels);
        r.pre_at_90 = par.precision;
        r.f1 = par.f1;
    }
    return r;
}

std::string stratum_of(double sex, double age, StratifyKey key) {
    if (key == StratifyKey::Sex) {
        if (std::isnan(sex)) return "sex=unknown";
        return sex >= 0.5 ? "sex=female" : "sex=male";
    }
    if (std::isnan(age)) return "age=unknown";
    const int decade = std::max(0, static_cast<int>(age / 10.0)) * 10;
    return "age=[" + std::to_string(decade) + "," + std::to_string(decade + 10) + ")";
}

std::vector<MetricReport> stratify(
    const std::vector<StratifiedItem>& items, StratifyKey key,
    const std::function<MetricReport(const std::vector<double>&, const std::vector<int>&)>&
        report_fn) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
    for (const auto& it : items) {
        auto& g = groups[stratum_of(it.sex, it.age, key)];
        g.first.push_back(it.score);
        g.second.push_back(it.label);
    }
    std::vector<MetricReport> out;
    for (auto& [name, g] : groups) {
        MetricReport r = report_fn(g.first, g.second);
        r.stratum_key = name;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ecgad
