#pragma once

#include <string>
#include <vector>

#include "ecgad/config.hpp"
#include "ecgad/rng.hpp"
#include "ecgad/signal.hpp"

namespace ecgad {

enum class AnomalyKind { PrProlong, QrsWiden, StShift, DroppedBeat, NoiseBurst };

const char* anomaly_kind_name(AnomalyKind kind);
AnomalyKind anomaly_kind_from_name(const std::string& name);

// Diagnosis label attached to each anomaly kind plus the rate-derived ones.
std::string anomaly_label(AnomalyKind kind);

struct AnomalyInjection {
    AnomalyKind kind = AnomalyKind::StShift;
    int beat_from = 0;  // inclusive beat indices
    int beat_to = 0;
    double magnitude = 0.2;  // kind-specific scale (mV for st/noise, fraction otherwise)
};

// Gaussian-bump morphology model: P, Q, R, S, T components per beat, plus
// baseline wander and measurement noise. Intervals are the generating
// parameters, so ground-truth attributes come for free.
struct SynthesisSpec {
    double fs = 500.0;
    double duration_s = 10.0;
    double hr_bpm = 60.0;
    double rr_jitter = 0.03;  // fractional RR standard deviation

    double amp_p = 0.12, amp_q = -0.10, amp_r = 1.0, amp_s = -0.18, amp_t = 0.30;  // mV
    double pr_ms = 160.0;  // P center to R center
    double qt_ms = 380.0;
    double qrs_ms = 90.0;

    double noise_std = 0.02;    // mV
    double wander_amp = 0.05;   // mV
    double wander_hz = 0.25;

    double sex = 0.0;  // 0 male, 1 female
    double age = 50.0;

    std::vector<AnomalyInjection> anomalies;

    int n_samples() const { return static_cast<int>(fs * duration_s + 0.5); }
    void validate() const;
    static SynthesisSpec from_config(const Config& cfg);
    Config to_config() const;
};

// Deterministic for a fixed seed. anomaly_mask marks exactly the injected
// spans; attributes are derived from the realized beat train. When
// `true_r_peaks` is given it receives the generator's R sample indices.
EcgRecord synthesize_ecg(const SynthesisSpec& spec, uint64_t seed,
                         std::vector<int>* true_r_peaks = nullptr);

// Multi-hot diagnosis labels implied by the generating parameters.
std::vector<std::string> derive_labels(const SynthesisSpec& spec);

// Cohort sampler: scalar config keys pin a value, `lo:hi` draws uniformly.
struct CohortSpec {
    double fs = 500.0;
    double duration_s = 10.0;
    std::pair<double, double> hr_bpm{55.0, 95.0};
    std::pair<double, double> pr_ms{140.0, 185.0};
    std::pair<double, double> qt_ms{340.0, 410.0};
    std::pair<double, double> qrs_ms{80.0, 100.0};
    std::pair<double, double> amp_r{0.85, 1.15};
    std::pair<double, double> amp_t{0.22, 0.34};
    std::pair<double, double> rr_jitter{0.02, 0.05};
    std::pair<double, double> noise_std{0.01, 0.025};
    std::pair<double, double> wander_amp{0.02, 0.07};
    std::pair<double, double> age{20.0, 85.0};

    double anomaly_fraction = 0.0;          // probability a record gets injections
    std::vector<AnomalyKind> anomaly_kinds;  // empty = all five
    double second_anomaly_prob = 0.2;        // chance of a second, distinct kind
    bool paired_sex = false;  // consecutive records share morphology, alternate sex

    static CohortSpec from_config(const Config& cfg);
};

// Draw one record's generating parameters. `index` addresses the RNG stream
// so cohorts are reproducible regardless of generation order.
SynthesisSpec sample_spec(const CohortSpec& cohort, uint64_t seed, uint64_t index);

}  // namespace ecgad
