#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ecgad/model.hpp"
#include "ecgad/signal.hpp"

namespace ecgad {

// Per-signal-point anomaly scores. values = global_part + local_part
// elementwise, anomaly_score = mean(values), all entries >= 0.
struct ScoreMap {
    Eigen::VectorXd values;
    Eigen::VectorXd global_part;
    Eigen::VectorXd local_part;
    double anomaly_score = 0.0;
    int beat_count = 0;
    bool unsegmentable = false;  // no R-peaks found; local part is all zero
};

// Global branch score: (x - x_hat)^2 / sigma + (x - x_hat_t)^2. Pass an
// empty trend reconstruction to drop the trend term (no-TAR configurations).
Eigen::VectorXd score_global(const Eigen::VectorXd& x, const Eigen::VectorXd& xhat,
                             const Eigen::VectorXd& sigma_g, const Eigen::VectorXd& xhat_t);

// One heartbeat's contribution to the local score map.
struct BeatScore {
    Eigen::VectorXd x, xhat, sigma;  // length d
    int origin = 0;                  // window start within [0, D-d]
};

// Sum over beats of the indicator-placed sigma-normalized squared error;
// overlapping windows add.
Eigen::VectorXd score_local(const std::vector<BeatScore>& beats, int global_len);

struct ScoringConfig {
    int trend_avg_window = 25;
    int trend_diff_window = 1;
    RPeakConfig rpeak;
};

// Test-time pipeline over a preprocessed record: segments beats, runs the
// model unmasked (the first beat partners the fusion pass whose global
// outputs are reused), and accumulates the local map over every beat.
ScoreMap assemble(const EcgRecord& record, const RestorationModel& model,
                  const ScoringConfig& cfg = {});

std::vector<uint8_t> binarize(const ScoreMap& map, double threshold);

// Default localization threshold: mean + 2 std over the pooled score values
// of normal validation records.
double localization_threshold(const std::vector<ScoreMap>& normal_maps, double n_std = 2.0);

}  // namespace ecgad
