#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "ecgad/errors.hpp"
#include "ecgad/masking.hpp"

using namespace ecgad;

namespace {

GlobalSignal make_signal(int n) {
    GlobalSignal g;
    g.values = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
    g.fs = 500.0;
    return g;
}

}  // namespace

TEST_CASE("mask_global: ratio 0.3 on D=5000 with patch 50 masks 1500 samples") {
    GlobalSignal g = make_signal(5000);
    Rng rng(1);
    auto [masked, desc] = mask_global(g, 0.3, 50, rng);
    CHECK(desc.masked_indices.size() == 1500);
    for (int idx : desc.masked_indices) CHECK(masked.values[idx] == kMaskFill);
    // patches are disjoint: indices strictly increasing without repeats
    for (size_t i = 1; i < desc.masked_indices.size(); ++i)
        CHECK(desc.masked_indices[i] > desc.masked_indices[i - 1]);
}

TEST_CASE("mask_global: tiny ratio still yields one whole patch") {
    GlobalSignal g = make_signal(5000);
    Rng rng(2);
    auto [masked, desc] = mask_global(g, 0.002, 10, rng);
    CHECK(desc.masked_indices.size() == 10);
}

TEST_CASE("mask_global: ratio smaller than one patch is a config error") {
    GlobalSignal g = make_signal(100);
    Rng rng(3);
    CHECK_THROWS_AS(mask_global(g, 0.01, 50, rng), ConfigError);
}

TEST_CASE("mask_global is deterministic per rng seed") {
    GlobalSignal g = make_signal(2000);
    Rng a(9), b(9), c(10);
    auto [ma, da] = mask_global(g, 0.3, 20, a);
    auto [mb, db] = mask_global(g, 0.3, 20, b);
    auto [mc, dc] = mask_global(g, 0.3, 20, c);
    CHECK(da.masked_indices == db.masked_indices);
    CHECK(da.masked_indices != dc.masked_indices);
}

TEST_CASE("mask_global patches are pairwise disjoint over many draws") {
    GlobalSignal g = make_signal(1000);
    for (int trial = 0; trial < 200; ++trial) {
        Rng rng(trial);
        auto [masked, desc] = mask_global(g, 0.4, 7, rng);
        std::set<int> unique(desc.masked_indices.begin(), desc.masked_indices.end());
        CHECK(unique.size() == desc.masked_indices.size());
        CHECK(*unique.begin() >= 0);
        CHECK(*unique.rbegin() < 1000);
    }
}

TEST_CASE("mask_local: ratio 0.5 on d=500 masks one span of 250") {
    LocalBeat beat;
    beat.values = Eigen::VectorXd::Ones(500);
    Rng rng(4);
    auto [masked, desc] = mask_local(beat, 0.5, rng);
    CHECK(desc.masked_indices.size() == 250);
    for (size_t i = 1; i < desc.masked_indices.size(); ++i)
        CHECK(desc.masked_indices[i] == desc.masked_indices[i - 1] + 1);  // contiguous
}

TEST_CASE("mask_local span never exceeds beat bounds over 10000 draws") {
    LocalBeat beat;
    beat.values = Eigen::VectorXd::Ones(173);
    for (int trial = 0; trial < 10000; ++trial) {
        Rng rng(trial);
        auto [masked, desc] = mask_local(beat, 0.37, rng);
        CHECK(desc.masked_indices.front() >= 0);
        CHECK(desc.masked_indices.back() < 173);
    }
}

TEST_CASE("mask_local partitions the beat") {
    LocalBeat beat;
    beat.values = Eigen::VectorXd::Constant(500, 2.0);
    Rng rng(5);
    auto [masked, desc] = mask_local(beat, 0.5, rng);
    std::set<int> masked_set(desc.masked_indices.begin(), desc.masked_indices.end());
    int masked_count = 0, clean_count = 0;
    for (int i = 0; i < 500; ++i) {
        if (masked_set.count(i)) {
            CHECK(masked.values[i] == kMaskFill);
            ++masked_count;
        } else {
            CHECK(masked.values[i] == 2.0);
            ++clean_count;
        }
    }
    CHECK(masked_count + clean_count == 500);
}

TEST_CASE("restoring clean values at masked indices reproduces the original") {
    GlobalSignal g = make_signal(3000);
    Rng rng(6);
    auto [masked, desc] = mask_global(g, 0.25, 30, rng);
    GlobalSignal restored = masked;
    for (int idx : desc.masked_indices) restored.values[idx] = g.values[idx];
    CHECK(restored.values == g.values);
}

TEST_CASE("select_training_beat: single beat returns that beat") {
    LocalBeat b;
    b.values = Eigen::VectorXd::Constant(10, 5.0);
    b.origin_index = 42;
    std::vector<LocalBeat> beats{b};
    Rng rng(7);
    CHECK(select_training_beat(beats, rng).origin_index == 42);
}

TEST_CASE("select_training_beat is uniform") {
    std::vector<LocalBeat> beats(10);
    for (int i = 0; i < 10; ++i) {
        beats[i].values = Eigen::VectorXd::Zero(4);
        beats[i].origin_index = i;
    }
    std::vector<int> counts(10, 0);
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) ++counts[select_training_beat(beats, rng).origin_index];
    for (int c : counts) {
        CHECK(c > 850);
        CHECK(c < 1150);
    }
}

TEST_CASE("select_training_beat is reproducible for a fixed seed") {
    std::vector<LocalBeat> beats(5);
    for (int i = 0; i < 5; ++i) {
        beats[i].values = Eigen::VectorXd::Zero(4);
        beats[i].origin_index = i;
    }
    Rng a(11), b(11);
    for (int i = 0; i < 100; ++i)
        CHECK(select_training_beat(beats, a).origin_index ==
              select_training_beat(beats, b).origin_index);
}

TEST_CASE("empty beat list is a contract error for selection") {
    std::vector<LocalBeat> beats;
    Rng rng(12);
    CHECK_THROWS_AS(select_training_beat(beats, rng), ContractError);
}
