#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ecgad/errors.hpp"
#include "ecgad/metrics.hpp"
#include "ecgad/rng.hpp"

using namespace ecgad;

namespace {

// O(n^2) pairwise AUROC oracle.
double auroc_brute(const std::vector<double>& s, const std::vector<int>& l) {
    double num = 0.0;
    long long pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (l[i] != 1) continue;
        for (size_t j = 0; j < s.size(); ++j) {
            if (l[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                num += 1.0;
            else if (s[i] == s[j])
                num += 0.5;
        }
    }
    return num / pairs;
}

}  // namespace

TEST_CASE("auroc: separable scores reach exactly 1") {
    CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
}

TEST_CASE("auroc: all-tied scores give 0.5") {
    CHECK(auroc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
}

TEST_CASE("auroc: single class is an error") {
    CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), DataError);
}

TEST_CASE("auroc matches the brute-force oracle on 200 random instances") {
    for (int trial = 0; trial < 200; ++trial) {
        Rng rng(trial);
        const int n = 50;
        std::vector<double> s(n);
        std::vector<int> l(n);
        bool has_both = false;
        do {
            int pos = 0;
            for (int i = 0; i < n; ++i) {
                // quantized scores force plenty of ties
                s[i] = std::round(rng.uniform() * 20.0) / 20.0;
                l[i] = rng.uniform() < 0.4 ? 1 : 0;
                pos += l[i];
            }
            has_both = pos > 0 && pos < n;
        } while (!has_both);
        CHECK(std::abs(auroc(s, l) - auroc_brute(s, l)) < 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly monotone score transforms") {
    Rng rng(7);
    std::vector<double> s(80);
    std::vector<int> l(80);
    for (int i = 0; i < 80; ++i) {
        s[i] = rng.normal();
        l[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    l[0] = 1;
    l[1] = 0;
    std::vector<double> t(80);
    for (int i = 0; i < 80; ++i) t[i] = std::exp(2.0 * s[i]) + 3.0;
    CHECK(auroc(s, l) == doctest::Approx(auroc(t, l)).epsilon(1e-12));
}

TEST_CASE("operating point: separable data reaches sens = spec = 1") {
    OperatingPoint op = operating_point({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    CHECK(op.sensitivity == 1.0);
    CHECK(op.specificity == 1.0);
}

TEST_CASE("operating point: constant scores have J = 0") {
    OperatingPoint op = operating_point({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    CHECK(op.sensitivity + op.specificity - 1.0 == doctest::Approx(0.0));
}

TEST_CASE("operating point matches an exhaustive sweep oracle") {
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(300 + trial);
        const int n = 40;
        std::vector<double> s(n);
        std::vector<int> l(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 10.0) / 10.0;
            l[i] = rng.uniform() < 0.5 ? 1 : 0;
            pos += l[i];
        }
        if (pos == 0 || pos == n) continue;
        OperatingPoint op = operating_point(s, l);

        double best_j = -2.0;
        for (double thr : s) {
            int tp = 0, fp = 0;
            for (int i = 0; i < n; ++i) {
                if (s[i] >= thr && l[i] == 1) ++tp;
                if (s[i] >= thr && l[i] == 0) ++fp;
            }
            const double sens = static_cast<double>(tp) / pos;
            const double spec = static_cast<double>(n - pos - fp) / (n - pos);
            best_j = std::max(best_j, sens + spec - 1.0);
        }
        CHECK(op.sensitivity + op.specificity - 1.0 == doctest::Approx(best_j).epsilon(1e-12));
    }
}

TEST_CASE("pre_at_recall: perfect ranking gives precision 1 and f1 >= 0.947") {
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 10; ++i) {
        s.push_back(1.0 - 0.01 * i);
        l.push_back(1);
    }
    for (int i = 0; i < 10; ++i) {
        s.push_back(0.5 - 0.01 * i);
        l.push_back(0);
    }
    PrecisionAtRecall par = pre_at_recall(s, l);
    CHECK(par.precision == 1.0);
    CHECK(par.f1 >= 2.0 * 1.0 * 0.9 / 1.9 - 1e-12);
}

TEST_CASE("pre_at_recall: all-positive predictions give precision = prevalence") {
    // constant scores: the only threshold includes everything
    std::vector<double> s(20, 0.7);
    std::vector<int> l(20, 0);
    for (int i = 0; i < 10; ++i) l[i] = 1;
    PrecisionAtRecall par = pre_at_recall(s, l);
    CHECK(par.precision == doctest::Approx(0.5));
    CHECK(par.recall == 1.0);
}

TEST_CASE("pre_at_recall needs 10 positives") {
    std::vector<double> s(12, 0.5);
    std::vector<int> l(12, 0);
    for (int i = 0; i < 9; ++i) l[i] = 1;
    CHECK_THROWS_AS(pre_at_recall(s, l), DataError);
}

TEST_CASE("pre_at_recall matches a sweep oracle on random data") {
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(600 + trial);
        const int n = 60;
        std::vector<double> s(n);
        std::vector<int> l(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform() * 15.0) / 15.0;
            l[i] = rng.uniform() < 0.4 ? 1 : 0;
            pos += l[i];
        }
        if (pos < 10) continue;

        PrecisionAtRecall par = pre_at_recall(s, l);
        // oracle: largest threshold (test all candidates descending) with recall >= 0.9
        std::vector<double> cand = s;
        std::sort(cand.begin(), cand.end(), std::greater<>());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        bool found = false;
        for (double thr : cand) {
            int tp = 0, fp = 0;
            for (int i = 0; i < n; ++i) {
                if (s[i] >= thr && l[i] == 1) ++tp;
                if (s[i] >= thr && l[i] == 0) ++fp;
            }
            const double recall = static_cast<double>(tp) / pos;
            if (recall >= 0.9) {
                CHECK(par.threshold == doctest::Approx(thr));
                CHECK(par.precision == doctest::Approx(static_cast<double>(tp) / (tp + fp)));
                found = true;
                break;
            }
        }
        CHECK(found);
        CHECK(par.precision <= 1.0);
        // the prediction set's own positive fraction IS the precision
        CHECK(par.precision >= 0.0);
    }
}

TEST_CASE("dice hand cases") {
    CHECK(dice({1, 1, 0}, {1, 1, 0}) == 1.0);
    CHECK(dice({1, 0, 0}, {0, 1, 1}) == 0.0);
    CHECK(dice({1, 1, 0}, {0, 1, 1}) == doctest::Approx(0.5));
    CHECK(dice({0, 0}, {0, 0}) == 1.0);
    CHECK_THROWS_AS(dice({1}, {1, 0}), ContractError);
}

TEST_CASE("dice is symmetric") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<uint8_t> a(30), b(30);
        for (int i = 0; i < 30; ++i) {
            a[i] = rng.uniform() < 0.3;
            b[i] = rng.uniform() < 0.3;
        }
        CHECK(dice(a, b) == dice(b, a));
    }
}

TEST_CASE("mcnemar: identical predictions give p = 1") {
    CHECK(mcnemar({1, 0, 1, 1}, {1, 0, 1, 1}) == 1.0);
}

TEST_CASE("mcnemar: b=10, c=0 exact binomial") {
    std::vector<uint8_t> a, b;
    for (int i = 0; i < 10; ++i) {
        a.push_back(1);
        b.push_back(0);
    }
    // pad with concordant pairs; only discordants matter
    for (int i = 0; i < 5; ++i) {
        a.push_back(1);
        b.push_back(1);
    }
    CHECK(mcnemar(a, b) == doctest::Approx(2.0 * std::pow(0.5, 10)).epsilon(1e-12));
}

TEST_CASE("mcnemar: balanced discordants give p near 1") {
    std::vector<uint8_t> a, b;
    for (int i = 0; i < 4; ++i) {
        a.push_back(1);
        b.push_back(0);
    }
    for (int i = 0; i < 4; ++i) {
        a.push_back(0);
        b.push_back(1);
    }
    CHECK(mcnemar(a, b) >= 0.99);
}

TEST_CASE("mcnemar large-sample chi-square branch") {
    std::vector<uint8_t> a, b;
    for (int i = 0; i < 30; ++i) {
        a.push_back(1);
        b.push_back(0);
    }
    for (int i = 0; i < 10; ++i) {
        a.push_back(0);
        b.push_back(1);
    }
    // chi2 = (|30-10|-1)^2/40 = 361/40 = 9.025 -> p ~ 0.00266
    const double p = mcnemar(a, b);
    CHECK(p == doctest::Approx(std::erfc(std::sqrt(9.025 / 2.0))).epsilon(1e-12));
    CHECK(p < 0.005);
}

TEST_CASE("stratify: identical strata produce identical reports") {
    std::vector<StratifiedItem> items;
    for (int i = 0; i < 20; ++i) {
        StratifiedItem it;
        it.sex = i < 10 ? 0.0 : 1.0;
        it.age = 40.0;
        it.score = (i % 10) / 10.0;
        it.label = (i % 10) < 5 ? 0 : 1;
        items.push_back(it);
    }
    auto reports = stratify(items, StratifyKey::Sex);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].auroc == reports[1].auroc);
    CHECK(reports[0].n_pos == reports[1].n_pos);
}

TEST_CASE("age 59 lands in the [50,60) decade") {
    CHECK(stratum_of(0.0, 59.0, StratifyKey::AgeDecade) == "age=[50,60)");
    CHECK(stratum_of(0.0, 60.0, StratifyKey::AgeDecade) == "age=[60,70)");
}

TEST_CASE("missing sex maps to the unknown stratum") {
    CHECK(stratum_of(std::numeric_limits<double>::quiet_NaN(), 30.0, StratifyKey::Sex) ==
          "sex=unknown");
}

TEST_CASE("stratify covers every record exactly once") {
    Rng rng(9);
    std::vector<StratifiedItem> items;
    for (int i = 0; i < 57; ++i) {
        StratifiedItem it;
        it.sex = rng.uniform() < 0.5 ? 0.0 : 1.0;
        it.age = rng.uniform(5.0, 95.0);
        it.score = rng.uniform();
        it.label = rng.uniform() < 0.5;
        items.push_back(it);
    }
    auto reports = stratify(items, StratifyKey::AgeDecade);
    int total = 0;
    for (const auto& r : reports) total += r.n_pos + r.n_neg;
    CHECK(total == 57);
}

TEST_CASE("single-class strata are flagged undefined, not dropped") {
    std::vector<StratifiedItem> items;
    for (int i = 0; i < 6; ++i) {
        StratifiedItem it;
        it.sex = i < 3 ? 0.0 : 1.0;
        it.score = 0.5;
        it.label = i < 3 ? 1 : (i % 2);  // male stratum all positive
        items.push_back(it);
    }
    auto reports = stratify(items, StratifyKey::Sex);
    REQUIRE(reports.size() == 2);
    bool saw_undefined = false;
    for (const auto& r : reports) saw_undefined = saw_undefined || !r.defined;
    CHECK(saw_undefined);
}

TEST_CASE("bootstrap CI brackets the point estimate") {
    Rng rng(10);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 120; ++i) {
        const int label = rng.uniform() < 0.5 ? 1 : 0;
        s.push_back(label == 1 ? rng.normal(1.0, 1.0) : rng.normal(0.0, 1.0));
        l.push_back(label);
    }
    const double point = auroc(s, l);
    auto [lo, hi] = bootstrap_auroc_ci(s, l, 1000, 17);
    CHECK(lo <= point);
    CHECK(hi >= point);
    CHECK(hi - lo < 0.3);
    // deterministic repeat
    auto [lo2, hi2] = bootstrap_auroc_ci(s, l, 1000, 17);
    CHECK(lo == lo2);
    CHECK(hi == hi2);
}
