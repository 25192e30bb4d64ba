#include "ecgad/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "ecgad/errors.hpp"

namespace ecgad {

Eigen::VectorXd score_global(const Eigen::VectorXd& x, const Eigen::VectorXd& xhat,
                             const Eigen::VectorXd& sigma_g, const Eigen::VectorXd& xhat_t) {
    require(x.size() == xhat.size() && x.size() == sigma_g.size(), "score_global: length mismatch");
    require((sigma_g.array() > 0.0).all(), "score_global: sigma must be strictly positive");
    Eigen::VectorXd s = ((x - xhat).array().square() / sigma_g.array()).matrix();
    if (xhat_t.size() > 0) {
        require(xhat_t.size() == x.size(), "score_global: trend length mismatch");
        s.array() += (x - xhat_t).array().square();
    }
    return s;
}

namespace {

bool beat_before(const BeatScore& a, const BeatScore& b) {
    if (a.origin != b.origin) return a.origin < b.origin;
    if (a.x.size() != b.x.size()) return a.x.size() < b.x.size();
    for (int i = 0; i < a.x.size(); ++i) {
        if (a.x[i] != b.x[i]) return a.x[i] < b.x[i];
        if (a.xhat[i] != b.xhat[i]) return a.xhat[i] < b.xhat[i];
        if (a.sigma[i] != b.sigma[i]) return a.sigma[i] < b.sigma[i];
    }
    return false;
}

}  // namespace

Eigen::VectorXd score_local(const std::vector<BeatScore>& beats, int global_len) {
    require(global_len >= 1, "score_local: bad global length");
    // Accumulation order is canonicalized: float addition is not associative,
    // so summing in caller order would let beat permutations perturb the map.
    std::vector<const BeatScore*> order;
    order.reserve(beats.size());
    for (const BeatScore& b : beats) order.push_back(&b);
    std::sort(order.begin(), order.end(),
              [](const BeatScore* a, const BeatScore* b) { return beat_before(*a, *b); });

    Eigen::VectorXd s = Eigen::VectorXd::Zero(global_len);
    for (const BeatScore* bp : order) {
        const BeatScore& b = *bp;
        const int d = static_cast<int>(b.x.size());
        require(b.xhat.size() == d && b.sigma.size() == d, "score_local: beat length mismatch");
        require((b.sigma.array() > 0.0).all(), "score_local: sigma must be strictly positive");
        require(b.origin >= 0 && b.origin + d <= global_len, "score_local: origin out of range");
        for (int i = 0; i < d; ++i) {
            const double e = b.x[i] - b.xhat[i];
            s[b.origin + i] += e * e / b.sigma[i];
        }
    }
    return s;
}

namespace {

// Re-bases a clipped beat so that every valid sample keeps its true signal
// position while the carrier window [origin, origin+d) stays inside the
// frame. Padded entries are given zero error and unit sigma, contributing
// exactly nothing.
BeatScore rebase_beat(const LocalBeat& beat, const Eigen::VectorXd& xhat,
                      const Eigen::VectorXd& sigma, int global_len) {
    const int d = beat.length();
    BeatScore out;
    out.origin = std::clamp(beat.window_start, 0, std::max(0, global_len - d));
    out.x = Eigen::VectorXd::Zero(d);
    out.xhat = Eigen::VectorXd::Zero(d);
    out.sigma = Eigen::VectorXd::Ones(d);
    const int valid_lo = std::max(0, beat.window_start);
    const int valid_hi = std::min(global_len, beat.window_start + d);
    for (int p = valid_lo; p < valid_hi; ++p) {
        const int j = p - out.origin;       // entry in the carrier window
        const int k = p - beat.window_start;  // entry in the model's beat frame
        out.x[j] = beat.values[k];
        out.xhat[j] = xhat[k];
        out.sigma[j] = sigma[k];
    }
    return out;
}

}  // namespace

ScoreMap assemble(const EcgRecord& record, const RestorationModel& model,
                  const ScoringConfig& cfg) {
    record.validate();
    const ModelConfig& mc = model.config();
    if (record.samples() != mc.global_len)
        throw DataError("assemble: record length " + std::to_string(record.samples()) +
                        " != model global_len " + std::to_string(mc.global_len));

    GlobalSignal global{record.channels.row(0).transpose(), record.fs};
    Eigen::VectorXd trend;
    if (mc.use_trend)
        trend = extract_trend(global, cfg.trend_avg_window, cfg.trend_diff_window).values;

    std::vector<LocalBeat> beats;
    if (mc.use_local) {
        std::vector<int> peaks = detect_r_peaks(global, cfg.rpeak);
        beats = segment_beats(global, peaks, mc.local_len);
    }

    ad::NoGradGuard ng;
    ScoreMap map;
    map.beat_count = static_cast<int>(beats.size());
    map.unsegmentable = mc.use_local && beats.empty();

    // First pass: global outputs (and sigma_g, x_hat_t) are produced once,
    // with the first beat as the fusion partner when one exists.
    Eigen::VectorXd first_local;
    if (!beats.empty()) first_local = beats[0].values;
    RestorationOutput out = model.forward(global.values, first_local, trend, false);
    Eigen::VectorXd xhat_g = out.global_recon.value().matrix();
    Eigen::VectorXd sigma_g = out.sigma_g.value().matrix();
    Eigen::VectorXd xhat_t;
    if (mc.use_trend) xhat_t = out.trend_recon.value().matrix();

    map.global_part = score_global(global.values, xhat_g, sigma_g, xhat_t);

    std::vector<BeatScore> beat_scores;
    if (!beats.empty()) {
        beat_scores.push_back(rebase_beat(beats[0], out.local_recon.value().matrix(),
                                          out.sigma_l.value().matrix(), mc.global_len));
        for (size_t m = 1; m < beats.size(); ++m) {
            ad::Tensor l_tokens = model.encode_local(beats[m].values);
            ad::Tensor fused = model.fuse(out.global_tokens, l_tokens);
            auto dec = model.decode(fused, true);
            beat_scores.push_back(rebase_beat(beats[m], dec.xhat_l.value().matrix(),
                                              dec.sigma_l.value().matrix(), mc.global_len));
        }
    }
    map.local_part = score_local(beat_scores, mc.global_len);
    map.values = map.global_part + map.local_part;
    map.anomaly_score = map.values.mean();
    return map;
}

std::vector<uint8_t> binarize(const ScoreMap& map, double threshold) {
    require(std::isfinite(threshold), "binarize: threshold must be finite");
    std::vector<uint8_t> out(map.values.size());
    for (Eigen::Index i = 0; i < map.values.size(); ++i)
        out[i] = map.values[i] >= threshold ? 1 : 0;
    return out;
}

double localization_threshold(const std::vector<ScoreMap>& normal_maps, double n_std) {
    require(!normal_maps.empty(), "localization_threshold: no validation maps");
    double sum = 0.0, count = 0.0;
    for (const auto& m : normal_maps) {
        sum += m.values.sum();
        count += static_cast<double>(m.values.size());
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& m : normal_maps) ss += (m.values.array() - mean).square().sum();
    return mean + n_std * std::sqrt(ss / count);
}

}  // namespace ecgad
