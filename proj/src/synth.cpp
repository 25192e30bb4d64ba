#include "ecgad/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ecgad/errors.hpp"

namespace ecgad {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Wave {
    double amp;     // mV
    double center;  // seconds relative to R
    double sigma;   // seconds
};

double gauss(double t, const Wave& w) {
    const double z = (t - w.center) / w.sigma;
    return w.amp * std::exp(-0.5 * z * z);
}

// Per-beat realized parameters after anomaly injection.
struct BeatParams {
    double r_time = 0.0;
    double pr_ms = 160.0;
    double qrs_scale = 1.0;
    double st_shift = 0.0;  // mV
    bool dropped = false;
};

void mark_span(std::vector<uint8_t>& mask, double t_begin, double t_end, double fs) {
    const int n = static_cast<int>(mask.size());
    int lo = std::max(0, static_cast<int>(std::floor(t_begin * fs)));
    int hi = std::min(n, static_cast<int>(std::ceil(t_end * fs)));
    for (int i = lo; i < hi; ++i) mask[i] = 1;
}

}  // namespace

const char* anomaly_kind_name(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::PrProlong: return "pr_prolong";
        case AnomalyKind::QrsWiden: return "qrs_widen";
        case AnomalyKind::StShift: return "st_shift";
        case AnomalyKind::DroppedBeat: return "dropped_beat";
        case AnomalyKind::NoiseBurst: return "noise_burst";
    }
    throw ContractError("unknown anomaly kind");
}

AnomalyKind anomaly_kind_from_name(const std::string& name) {
    if (name == "pr_prolong") return AnomalyKind::PrProlong;
    if (name == "qrs_widen") return AnomalyKind::QrsWiden;
    if (name == "st_shift") return AnomalyKind::StShift;
    if (name == "dropped_beat") return AnomalyKind::DroppedBeat;
    if (name == "noise_burst") return AnomalyKind::NoiseBurst;
    throw ConfigError("unknown anomaly kind: " + name);
}

std::string anomaly_label(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::PrProlong: return "first_degree_av_block";
        case AnomalyKind::QrsWiden: return "wide_qrs";
        case AnomalyKind::StShift: return "st_elevation";
        case AnomalyKind::DroppedBeat: return "sinus_pause";
        case AnomalyKind::NoiseBurst: return "artifact_noise";
    }
    throw ContractError("unknown anomaly kind");
}

void SynthesisSpec::validate() const {
    if (fs <= 0.0 || duration_s <= 0.0) throw ConfigError("synthesis: fs and duration must be positive");
    if (hr_bpm < 20.0 || hr_bpm > 250.0) throw ConfigError("synthesis: heart rate out of range");
    const double rr_ms = 60000.0 / hr_bpm;
    double max_pr = pr_ms;
    for (const auto& a : anomalies)
        if (a.kind == AnomalyKind::PrProlong) max_pr = std::max(max_pr, pr_ms * (1.0 + a.magnitude));
    if (max_pr >= 0.6 * rr_ms)
        throw ConfigError("synthesis: PR interval infeasible for the RR interval");
    if (qt_ms >= 0.95 * rr_ms) throw ConfigError("synthesis: QT interval infeasible for the RR interval");
    for (const auto& a : anomalies) {
        if (a.beat_from < 0 || a.beat_to < a.beat_from)
            throw ConfigError("synthesis: bad anomaly beat span");
        if (a.magnitude < 0.0) throw ConfigError("synthesis: anomaly magnitude must be >= 0");
    }
}

SynthesisSpec SynthesisSpec::from_config(const Config& cfg) {
    SynthesisSpec s;
    s.fs = cfg.get_double("fs", s.fs);
    s.duration_s = cfg.get_double("duration_s", s.duration_s);
    s.hr_bpm = cfg.get_double("hr_bpm", s.hr_bpm);
    s.rr_jitter = cfg.get_double("rr_jitter", s.rr_jitter);
    s.amp_p = cfg.get_double("amp_p", s.amp_p);
    s.amp_q = cfg.get_double("amp_q", s.amp_q);
    s.amp_r = cfg.get_double("amp_r", s.amp_r);
    s.amp_s = cfg.get_double("amp_s", s.amp_s);
    s.amp_t = cfg.get_double("amp_t", s.amp_t);
    s.pr_ms = cfg.get_double("pr_ms", s.pr_ms);
    s.qt_ms = cfg.get_double("qt_ms", s.qt_ms);
    s.qrs_ms = cfg.get_double("qrs_ms", s.qrs_ms);
    s.noise_std = cfg.get_double("noise_std", s.noise_std);
    s.wander_amp = cfg.get_double("wander_amp", s.wander_amp);
    s.wander_hz = cfg.get_double("wander_hz", s.wander_hz);
    s.sex = cfg.get_double("sex", s.sex);
    s.age = cfg.get_double("age", s.age);
    for (int i = 0;; ++i) {
        const std::string p = "anomaly." + std::to_string(i) + ".";
        if (!cfg.has(p + "kind")) break;
        AnomalyInjection a;
        a.kind = anomaly_kind_from_name(cfg.require_str(p + "kind"));
        a.beat_from = cfg.get_int(p + "beat_from", 0);
        a.beat_to = cfg.get_int(p + "beat_to", a.beat_from);
        a.magnitude = cfg.get_double(p + "magnitude", 0.2);
        s.anomalies.push_back(a);
    }
    s.validate();
    return s;
}

Config SynthesisSpec::to_config() const {
    Config cfg;
    cfg.set_double("fs", fs);
    cfg.set_double("duration_s", duration_s);
    cfg.set_double("hr_bpm", hr_bpm);
    cfg.set_double("rr_jitter", rr_jitter);
    cfg.set_double("amp_p", amp_p);
    cfg.set_double("amp_q", amp_q);
    cfg.set_double("amp_r", amp_r);
    cfg.set_double("amp_s", amp_s);
    cfg.set_double("amp_t", amp_t);
    cfg.set_double("pr_ms", pr_ms);
    cfg.set_double("qt_ms", qt_ms);
    cfg.set_double("qrs_ms", qrs_ms);
    cfg.set_double("noise_std", noise_std);
    cfg.set_double("wander_amp", wander_amp);
    cfg.set_double("wander_hz", wander_hz);
    cfg.set_double("sex", sex);
    cfg.set_double("age", age);
    for (size_t i = 0; i < anomalies.size(); ++i) {
        const std::string p = "anomaly." + std::to_string(i) + ".";
        cfg.set(p + "kind", anomaly_kind_name(anomalies[i].kind));
        cfg.set_int(p + "beat_from", anomalies[i].beat_from);
        cfg.set_int(p + "beat_to", anomalies[i].beat_to);
        cfg.set_double(p + "magnitude", anomalies[i].magnitude);
    }
    return cfg;
}

EcgRecord synthesize_ecg(const SynthesisSpec& spec, uint64_t seed, std::vector<int>* true_r_peaks) {
    spec.validate();
    Rng rng = Rng::derive(seed, {0x5ec9});
    const int n = spec.n_samples();
    const double base_rr = 60.0 / spec.hr_bpm;

    // Beat train: jittered RR intervals covering the record plus margins.
    std::vector<BeatParams> beats;
    double t = base_rr * rng.uniform(0.4, 0.6);
    while (t < spec.duration_s + base_rr) {
        BeatParams b;
        b.r_time = t;
        b.pr_ms = spec.pr_ms;
        beats.push_back(b);
        double z = std::clamp(rng.normal(), -2.5, 2.5);
        t += base_rr * (1.0 + spec.rr_jitter * z);
    }

    std::vector<uint8_t> mask(static_cast<size_t>(n), 0);
    const double qrs_base = spec.qrs_ms / 90.0;
    const double p_sigma = 0.024;
    const double t_center = 0.75 * spec.qt_ms / 1000.0;
    const double t_sigma = 0.13 * spec.qt_ms / 1000.0;

    // Apply injections to the addressed beats and record their spans.
    struct NoiseSpan {
        double t0, t1, amp;
    };
    std::vector<NoiseSpan> noise_spans;
    for (const auto& a : spec.anomalies) {
        for (int bi = a.beat_from; bi <= a.beat_to && bi < static_cast<int>(beats.size()); ++bi) {
            BeatParams& b = beats[bi];
            switch (a.kind) {
                case AnomalyKind::PrProlong: {
                    const double pr_new = spec.pr_ms * (1.0 + a.magnitude);
                    b.pr_ms = pr_new;
                    mark_span(mask, b.r_time - pr_new / 1000.0 - 3.0 * p_sigma,
                              b.r_time - spec.pr_ms / 1000.0 + 3.0 * p_sigma, spec.fs);
                    break;
                }
                case AnomalyKind::QrsWiden: {
                    b.qrs_scale = 1.0 + a.magnitude;
                    const double w = 0.065 * qrs_base * b.qrs_scale;
                    mark_span(mask, b.r_time - w, b.r_time + w, spec.fs);
                    break;
                }
                case AnomalyKind::StShift: {
                    b.st_shift = a.magnitude;
                    mark_span(mask, b.r_time + 0.045 * qrs_base, b.r_time + t_center - t_sigma,
                              spec.fs);
                    break;
                }
                case AnomalyKind::DroppedBeat: {
                    b.dropped = true;
                    mark_span(mask, b.r_time - 0.35 * base_rr, b.r_time + 0.55 * base_rr, spec.fs);
                    break;
                }
                case AnomalyKind::NoiseBurst: {
                    // span covers the addressed beats once, not per beat
                    break;
                }
            }
        }
        if (a.kind == AnomalyKind::NoiseBurst) {
            const int lo = std::min(a.beat_from, static_cast<int>(beats.size()) - 1);
            const int hi = std::min(a.beat_to, static_cast<int>(beats.size()) - 1);
            if (lo >= 0 && hi >= lo) {
                NoiseSpan span{beats[lo].r_time - 0.15, beats[hi].r_time + 0.25, a.magnitude};
                noise_spans.push_back(span);
                mark_span(mask, span.t0, span.t1, spec.fs);
            }
        }
    }

    // Render the waveform.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const double wander_phase = rng.uniform(0.0, 2.0 * kPi);
    for (const BeatParams& b : beats) {
        if (b.dropped) continue;
        const double qs = qrs_base * b.qrs_scale;
        const Wave waves[5] = {
            {spec.amp_p, -b.pr_ms / 1000.0, p_sigma},
            {spec.amp_q, -0.028 * qs, 0.010 * qs},
            {spec.amp_r, 0.0, 0.012 * qs},
            {spec.amp_s, 0.028 * qs, 0.011 * qs},
            {spec.amp_t, t_center, t_sigma},
        };
        const double t_lo = b.r_time - b.pr_ms / 1000.0 - 5.0 * p_sigma;
        const double t_hi = b.r_time + t_center + 4.0 * t_sigma;
        int i_lo = std::max(0, static_cast<int>(std::floor(t_lo * spec.fs)));
        int i_hi = std::min(n, static_cast<int>(std::ceil(t_hi * spec.fs)));
        for (int i = i_lo; i < i_hi; ++i) {
            const double ti = i / spec.fs - b.r_time;
            double v = 0.0;
            for (const Wave& w : waves) v += gauss(ti, w);
            // ST plateau between the S wave and the T onset, cosine-tapered.
            if (b.st_shift != 0.0) {
                const double st_a = 0.045 * qs, st_b = t_center - t_sigma;
                if (ti > st_a && ti < st_b) {
                    const double edge = 0.012;
                    double g = 1.0;
                    if (ti < st_a + edge) g = 0.5 - 0.5 * std::cos(kPi * (ti - st_a) / edge);
                    if (ti > st_b - edge) g = 0.5 - 0.5 * std::cos(kPi * (st_b - ti) / edge);
                    v += b.st_shift * g;
                }
            }
            x[i] += v;
        }
    }

    for (int i = 0; i < n; ++i) {
        const double ti = i / spec.fs;
        x[i] += spec.wander_amp * std::sin(2.0 * kPi * spec.wander_hz * ti + wander_phase);
        x[i] += spec.noise_std * rng.normal();
    }
    for (const NoiseSpan& span : noise_spans) {
        // Band-limited burst: random-phase sinusoids with a Hann envelope.
        const double f[3] = {rng.uniform(24.0, 32.0), rng.uniform(32.0, 40.0),
                             rng.uniform(40.0, 48.0)};
        const double ph[3] = {rng.uniform(0.0, 2 * kPi), rng.uniform(0.0, 2 * kPi),
                              rng.uniform(0.0, 2 * kPi)};
        int lo = std::max(0, static_cast<int>(span.t0 * spec.fs));
        int hi = std::min(n, static_cast<int>(span.t1 * spec.fs));
        for (int i = lo; i < hi; ++i) {
            const double u = (i - lo) / std::max(1.0, static_cast<double>(hi - 1 - lo));
            const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * u);
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += std::sin(2.0 * kPi * f[k] * (i / spec.fs) + ph[k]);
            x[i] += span.amp * hann * v / 3.0;
        }
    }

    // Realized attributes.
    std::vector<double> r_in_range;
    double pr_sum = 0.0, qrs_sum = 0.0;
    int n_beats = 0;
    if (true_r_peaks) true_r_peaks->clear();
    for (const BeatParams& b : beats) {
        const int ri = static_cast<int>(std::lround(b.r_time * spec.fs));
        if (b.dropped || ri < 0 || ri >= n) continue;
        r_in_range.push_back(b.r_time);
        pr_sum += b.pr_ms;
        qrs_sum += spec.qrs_ms * b.qrs_scale;
        ++n_beats;
        if (true_r_peaks) true_r_peaks->push_back(ri);
    }

    EcgRecord rec;
    rec.fs = spec.fs;
    rec.channels = x.transpose();
    rec.anomaly_mask = std::move(mask);
    rec.attributes.sex = spec.sex;
    rec.attributes.age = spec.age;
    if (r_in_range.size() >= 2) {
        const double mean_rr = (r_in_range.back() - r_in_range.front()) / (r_in_range.size() - 1);
        rec.attributes.heart_rate = 60.0 / mean_rr;
        rec.attributes.qtc_ms = spec.qt_ms / std::sqrt(mean_rr);
    } else {
        rec.attributes.heart_rate = spec.hr_bpm;
        rec.attributes.qtc_ms = spec.qt_ms / std::sqrt(base_rr);
    }
    rec.attributes.pr_ms = n_beats > 0 ? pr_sum / n_beats : spec.pr_ms;
    rec.attributes.qrs_ms = n_beats > 0 ? qrs_sum / n_beats : spec.qrs_ms;
    rec.attributes.qt_ms = spec.qt_ms;
    rec.has_labels = true;
    rec.labels = derive_labels(spec);
    return rec;
}

std::vector<std::string> derive_labels(const SynthesisSpec& spec) {
    std::vector<std::string> labels;
    if (spec.hr_bpm >= 100.0) labels.push_back("sinus_tachycardia");
    if (spec.hr_bpm <= 55.0) labels.push_back("sinus_bradycardia");
    for (const auto& a : spec.anomalies) {
        std::string l = anomaly_label(a.kind);
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    if (labels.empty()) labels.push_back("normal");
    std::sort(labels.begin(), labels.end());
    return labels;
}

CohortSpec CohortSpec::from_config(const Config& cfg) {
    CohortSpec c;
    c.fs = cfg.get_double("fs", c.fs);
    c.duration_s = cfg.get_double("duration_s", c.duration_s);
    c.hr_bpm = cfg.get_range("hr_bpm", c.hr_bpm.first, c.hr_bpm.second);
    c.pr_ms = cfg.get_range("pr_ms", c.pr_ms.first, c.pr_ms.second);
    c.qt_ms = cfg.get_range("qt_ms", c.qt_ms.first, c.qt_ms.second);
    c.qrs_ms = cfg.get_range("qrs_ms", c.qrs_ms.first, c.qrs_ms.second);
    c.amp_r = cfg.get_range("amp_r", c.amp_r.first, c.amp_r.second);
    c.amp_t = cfg.get_range("amp_t", c.amp_t.first, c.amp_t.second);
    c.rr_jitter = cfg.get_range("rr_jitter", c.rr_jitter.first, c.rr_jitter.second);
    c.noise_std = cfg.get_range("noise_std", c.noise_std.first, c.noise_std.second);
    c.wander_amp = cfg.get_range("wander_amp", c.wander_amp.first, c.wander_amp.second);
    c.age = cfg.get_range("age", c.age.first, c.age.second);
    c.anomaly_fraction = cfg.get_double("anomaly_fraction", c.anomaly_fraction);
    c.second_anomaly_prob = cfg.get_double("second_anomaly_prob", c.second_anomaly_prob);
    c.paired_sex = cfg.get_bool("paired_sex", c.paired_sex);
    const std::string kinds = cfg.get_str("anomaly_kinds", "");
    if (!kinds.empty()) {
        size_t pos = 0;
        while (pos < kinds.size()) {
            size_t comma = kinds.find(',', pos);
            if (comma == std::string::npos) comma = kinds.size();
            std::string name = kinds.substr(pos, comma - pos);
            if (!name.empty()) c.anomaly_kinds.push_back(anomaly_kind_from_name(name));
            pos = comma + 1;
        }
    }
    return c;
}

SynthesisSpec sample_spec(const CohortSpec& cohort, uint64_t seed, uint64_t index) {
    // Paired mode shares the morphology stream between 2k and 2k+1 and flips sex.
    const uint64_t stream = cohort.paired_sex ? index / 2 : index;
    Rng rng = Rng::derive(seed, {0xc047ULL, stream});

    SynthesisSpec s;
    s.fs = cohort.fs;
    s.duration_s = cohort.duration_s;
    s.hr_bpm = rng.uniform(cohort.hr_bpm.first, cohort.hr_bpm.second);
    s.pr_ms = rng.uniform(cohort.pr_ms.first, cohort.pr_ms.second);
    s.qt_ms = rng.uniform(cohort.qt_ms.first, cohort.qt_ms.second);
    s.qrs_ms = rng.uniform(cohort.qrs_ms.first, cohort.qrs_ms.second);
    s.amp_r = rng.uniform(cohort.amp_r.first, cohort.amp_r.second);
    s.amp_t = rng.uniform(cohort.amp_t.first, cohort.amp_t.second);
    s.amp_p = 0.12 * rng.uniform(0.85, 1.15);
    s.amp_q = -0.10 * rng.uniform(0.85, 1.15);
    s.amp_s = -0.18 * rng.uniform(0.85, 1.15);
    s.rr_jitter = rng.uniform(cohort.rr_jitter.first, cohort.rr_jitter.second);
    s.noise_std = rng.uniform(cohort.noise_std.first, cohort.noise_std.second);
    s.wander_amp = rng.uniform(cohort.wander_amp.first, cohort.wander_amp.second);
    s.wander_hz = rng.uniform(0.15, 0.4);
    s.age = std::floor(rng.uniform(cohort.age.first, cohort.age.second));
    s.sex = cohort.paired_sex ? static_cast<double>(index % 2) : (rng.uniform() < 0.5 ? 0.0 : 1.0);

    if (cohort.anomaly_fraction > 0.0 && rng.uniform() < cohort.anomaly_fraction) {
        std::vector<AnomalyKind> kinds = cohort.anomaly_kinds;
        if (kinds.empty())
            kinds = {AnomalyKind::PrProlong, AnomalyKind::QrsWiden, AnomalyKind::StShift,
                     AnomalyKind::DroppedBeat, AnomalyKind::NoiseBurst};
        const int approx_beats = static_cast<int>(s.duration_s * s.hr_bpm / 60.0);
        auto draw = [&](AnomalyKind kind) {
            AnomalyInjection a;
            a.kind = kind;
            const int span = rng.uniform_int(2, 4);
            a.beat_from = rng.uniform_int(1, std::max(1, approx_beats - span - 2));
            a.beat_to = a.beat_from + (kind == AnomalyKind::DroppedBeat ? 0 : span - 1);
            switch (kind) {
                case AnomalyKind::PrProlong: a.magnitude = rng.uniform(0.45, 0.8); break;
                case AnomalyKind::QrsWiden: a.magnitude = rng.uniform(0.5, 0.9); break;
                case AnomalyKind::StShift: a.magnitude = rng.uniform(0.18, 0.35); break;
                case AnomalyKind::DroppedBeat: a.magnitude = 1.0; break;
                case AnomalyKind::NoiseBurst: a.magnitude = rng.uniform(0.2, 0.35); break;
            }
            return a;
        };
        AnomalyKind first = kinds[rng.uniform_int(0, static_cast<int>(kinds.size()) - 1)];
        s.anomalies.push_back(draw(first));
        if (kinds.size() > 1 && rng.uniform() < cohort.second_anomaly_prob) {
            AnomalyKind second = first;
            while (second == first)
                second = kinds[rng.uniform_int(0, static_cast<int>(kinds.size()) - 1)];
            s.anomalies.push_back(draw(second));
        }
    }
    s.validate();
    return s;
}

}  // namespace ecgad
