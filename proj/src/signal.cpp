#include "ecgad/signal.hpp"

#include <algorithm>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "ecgad/errors.hpp"

namespace ecgad {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* AttributeVector::name(int i) {
    static const char* names[kCount] = {"sex",   "age",    "heart_rate", "pr_ms",
                                        "qt_ms", "qtc_ms", "qrs_ms"};
    require(i >= 0 && i < kCount, "attribute index out of range");
    return names[i];
}

double AttributeVector::get(int i) const {
    switch (i) {
        case 0: return sex;
        case 1: return age;
        case 2: return heart_rate;
        case 3: return pr_ms;
        case 4: return qt_ms;
        case 5: return qtc_ms;
        case 6: return qrs_ms;
    }
    throw ContractError("attribute index out of range");
}

void AttributeVector::set(int i, double v) {
    switch (i) {
        case 0: sex = v; return;
        case 1: age = v; return;
        case 2: heart_rate = v; return;
        case 3: pr_ms = v; return;
        case 4: qt_ms = v; return;
        case 5: qtc_ms = v; return;
        case 6: qrs_ms = v; return;
    }
    throw ContractError("attribute index out of range");
}

void EcgRecord::validate() const {
    if (fs <= 0.0) throw DataError("record " + record_id + ": fs must be positive");
    if (!anomaly_mask.empty() && static_cast<int>(anomaly_mask.size()) != samples())
        throw DataError("record " + record_id + ": anomaly mask length mismatch");
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

std::vector<Biquad> butter_lowpass(int order, double fc, double fs) {
    if (order < 2 || order % 2 != 0) throw ConfigError("Butterworth order must be even and >= 2");
    if (fc <= 0.0 || fc >= fs / 2.0) throw ConfigError("low-pass cutoff outside (0, fs/2)");
    std::vector<Biquad> sections;
    const double w0 = 2.0 * kPi * fc / fs;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const int n_sections = order / 2;
    for (int k = 0; k < n_sections; ++k) {
        // Pole angle of the k-th conjugate pair of the analog prototype.
        const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order);
        const double q = 1.0 / (2.0 * std::cos(theta));
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        Biquad s;
        s.b0 = (1.0 - cw) / 2.0 / a0;
        s.b1 = (1.0 - cw) / a0;
        s.b2 = s.b0;
        s.a1 = (-2.0 * cw) / a0;
        s.a2 = (1.0 - alpha) / a0;
        sections.push_back(s);
    }
    return sections;
}

std::vector<Biquad> butter_highpass(int order, double fc, double fs) {
    if (order < 2 || order % 2 != 0) throw ConfigError("Butterworth order must be even and >= 2");
    if (fc <= 0.0 || fc >= fs / 2.0) throw ConfigError("high-pass cutoff outside (0, fs/2)");
    std::vector<Biquad> sections;
    const double w0 = 2.0 * kPi * fc / fs;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const int n_sections = order / 2;
    for (int k = 0; k < n_sections; ++k) {
        const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order);
        const double q = 1.0 / (2.0 * std::cos(theta));
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        Biquad s;
        s.b0 = (1.0 + cw) / 2.0 / a0;
        s.b1 = -(1.0 + cw) / a0;
        s.b2 = s.b0;
        s.a1 = (-2.0 * cw) / a0;
        s.a2 = (1.0 - alpha) / a0;
        sections.push_back(s);
    }
    return sections;
}

Biquad notch_filter(double f0, double fs, double q) {
    if (f0 <= 0.0 || f0 >= fs / 2.0) throw ConfigError("notch frequency outside (0, fs/2)");
    const double w0 = 2.0 * kPi * f0 / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
}

namespace {

// Causal run in transposed direct form II from an explicit initial state.
Eigen::VectorXd run_biquad(const Biquad& s, const Eigen::VectorXd& x, double z1, double z2) {
    Eigen::VectorXd y(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = s.b0 * xi + z1;
        z1 = s.b1 * xi - s.a1 * yi + z2;
        z2 = s.b2 * xi - s.a2 * yi;
        y[i] = yi;
    }
    return y;
}

Eigen::VectorXd run_fwd(const Biquad& s, const Eigen::VectorXd& x) {
    return run_biquad(s, x, 0.0, 0.0);
}

Eigen::VectorXd run_bwd(const Biquad& s, const Eigen::VectorXd& x) {
    return run_biquad(s, x.reverse(), 0.0, 0.0).reverse();
}

// Zero-input response from a unit initial state component.
Eigen::VectorXd state_response(const Biquad& s, int n, int which) {
    return run_biquad(s, Eigen::VectorXd::Zero(n), which == 0 ? 1.0 : 0.0,
                      which == 0 ? 0.0 : 1.0);
}

// Gustafsson forward-backward filtering for one section: pick the forward
// and backward initial states so that filtering forward-then-backward and
// backward-then-forward agree, which removes the edge ringing a padded
// filtfilt leaves behind (essential for the high-Q notch). The mean is
// taken out first; the LS system is singular for signal components the
// section nulls, and the min-norm solve then needs a zero-mean residual to
// keep nulled components out of the edge correction.
Eigen::VectorXd filtfilt_gust(const Biquad& s, const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    if (n < 8) return run_bwd(s, run_fwd(s, x));

    const double mu = x.mean();
    const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const Eigen::VectorXd xc = x.array() - mu;

    // filtering is affine in (input, state): F(x, z) = F(x, 0) + O z
    Eigen::MatrixXd o(n, 2);
    o.col(0) = state_response(s, n, 0);
    o.col(1) = state_response(s, n, 1);

    // Shared states couple the two orders:
    //   y_fb = U L x + U O sf + R O sb,  y_bf = L U x + O sf + L R O sb.
    // Solve (y_fb - y_bf)(sf, sb) = 0 in least squares and return the mean.
    Eigen::VectorXd ulx = run_bwd(s, run_fwd(s, xc));
    Eigen::VectorXd lux = run_fwd(s, run_bwd(s, xc));

    Eigen::MatrixXd uo(n, 2), ro(n, 2), lro(n, 2);
    for (int j = 0; j < 2; ++j) {
        uo.col(j) = run_bwd(s, o.col(j));
        ro.col(j) = o.col(j).reverse();
        lro.col(j) = run_fwd(s, ro.col(j).eval());
    }

    Eigen::MatrixXd design(n, 4);
    design.leftCols(2) = uo - o;
    design.rightCols(2) = ro - lro;
    Eigen::VectorXd rhs = lux - ulx;
    Eigen::VectorXd theta =
        design.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);

    Eigen::VectorXd y = 0.5 * (ulx + lux);
    y += 0.5 * ((uo + o) * theta.head(2) + (ro + lro) * theta.tail(2));
    y.array() += mu * dc_gain * dc_gain;
    return y;
}

}  // namespace

Eigen::VectorXd filter_cascade(const std::vector<Biquad>& sections, const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    for (const Biquad& s : sections) y = run_fwd(s, y);
    return y;
}

Eigen::VectorXd filtfilt(const std::vector<Biquad>& sections, const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    for (const Biquad& s : sections) y = filtfilt_gust(s, y);
    return y;
}

EcgRecord bandpass_filter(const EcgRecord& record, const FilterConfig& cfg) {
    record.validate();
    if (cfg.low_hz >= cfg.high_hz)
        throw ConfigError("band-pass cutoffs out of order: low >= high");
    if (record.fs <= 2.0 * cfg.high_hz)
        throw ConfigError("sampling rate too low for requested band");

    std::vector<Biquad> sections = butter_highpass(cfg.order, cfg.low_hz, record.fs);
    for (const Biquad& s : butter_lowpass(cfg.order, cfg.high_hz, record.fs)) sections.push_back(s);
    if (cfg.notch_hz > 0.0) {
        if (cfg.notch_hz >= record.fs / 2.0) throw ConfigError("notch above Nyquist");
        sections.push_back(notch_filter(cfg.notch_hz, record.fs, cfg.notch_q));
    }

    EcgRecord out = record;
    for (int c = 0; c < record.n_channels(); ++c)
        out.channels.row(c) = filtfilt(sections, record.channels.row(c).transpose()).transpose();
    return out;
}

// ---------------------------------------------------------------------------
// R-peak detection
// ---------------------------------------------------------------------------

std::vector<int> detect_r_peaks(const GlobalSignal& signal, const RPeakConfig& cfg) {
    const int n = signal.length();
    if (n < 3 || signal.fs <= 0.0) return {};
    const Eigen::VectorXd& x = signal.values;

    // Squared central derivative.
    Eigen::VectorXd energy = Eigen::VectorXd::Zero(n);
    for (int i = 1; i + 1 < n; ++i) {
        const double d = x[i + 1] - x[i - 1];
        energy[i] = d * d;
    }

    // Moving-average envelope (prefix sums, truncated at the edges).
    const int env_w = std::max(1, static_cast<int>(std::lround(cfg.envelope_s * signal.fs)));
    Eigen::VectorXd prefix(n + 1);
    prefix[0] = 0.0;
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + energy[i];
    Eigen::VectorXd envelope(n);
    const int half = env_w / 2;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n, i - half + env_w);
        envelope[i] = (prefix[hi] - prefix[lo]) / env_w;
    }

    const double global_max = envelope.maxCoeff();
    if (global_max <= 0.0) return {};

    // Adaptive threshold: fraction of the rolling max over a centered window.
    const int roll_w = std::max(1, static_cast<int>(std::lround(cfg.rolling_window_s * signal.fs)));
    const int rhalf = roll_w / 2;
    Eigen::VectorXd threshold(n);
    // O(n * w) worst case is fine at these lengths; keep it simple.
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - rhalf);
        const int hi = std::min(n, i + rhalf + 1);
        double m = 0.0;
        for (int j = lo; j < hi; ++j) m = std::max(m, envelope[j]);
        threshold[i] = std::max(cfg.threshold_frac * m, 1e-4 * global_max);
    }

    // Regions above threshold -> envelope argmax -> refine on |x|.
    const int search = std::max(1, static_cast<int>(std::lround(cfg.search_s * signal.fs)));
    const int refractory = static_cast<int>(std::lround(cfg.refractory_s * signal.fs));
    std::vector<int> peaks;
    std::vector<double> peak_energy;
    int i = 0;
    while (i < n) {
        if (envelope[i] <= threshold[i]) {
            ++i;
            continue;
        }
        int j = i;
        int arg = i;
        while (j < n && envelope[j] > threshold[j]) {
            if (envelope[j] > envelope[arg]) arg = j;
            ++j;
        }
        int lo = std::max(0, arg - search);
        int hi = std::min(n, arg + search + 1);
        int r = lo;
        for (int k = lo; k < hi; ++k)
            if (std::abs(x[k]) > std::abs(x[r])) r = k;

        if (!peaks.empty() && r - peaks.back() < refractory) {
            if (envelope[arg] > peak_energy.back()) {
                peaks.back() = r;
                peak_energy.back() = envelope[arg];
            }
        } else {
            peaks.push_back(r);
            peak_energy.push_back(envelope[arg]);
        }
        i = j;
    }
    return peaks;
}

std::vector<LocalBeat> segment_beats(const GlobalSignal& signal, const std::vector<int>& r_peaks,
                                     int beat_len) {
    require(beat_len >= 1, "segment_beats: beat length must be positive");
    const int n = signal.length();
    std::vector<LocalBeat> beats;
    beats.reserve(r_peaks.size());
    for (int r : r_peaks) {
        require(r >= 0 && r < n, "segment_beats: r-peak index out of range");
        LocalBeat beat;
        beat.window_start = r - beat_len / 2;
        beat.origin_index = std::clamp(beat.window_start, 0, std::max(0, n - beat_len));
        beat.values = Eigen::VectorXd::Zero(beat_len);
        const int lo = std::max(0, beat.window_start);
        const int hi = std::min(n, beat.window_start + beat_len);
        for (int i = lo; i < hi; ++i) beat.values[i - beat.window_start] = signal.values[i];
        beats.push_back(std::move(beat));
    }
    return beats;
}

TrendSignal extract_trend(const GlobalSignal& signal, int avg_window, int diff_window) {
    const int n = signal.length();
    if (avg_window < 1 || avg_window >= n) throw ConfigError("extract_trend: bad averaging window");
    if (diff_window < 1 || diff_window >= n) throw ConfigError("extract_trend: bad difference window");

    const Eigen::VectorXd& x = signal.values;
    Eigen::VectorXd smooth(n);
    const int half = avg_window / 2;
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < avg_window; ++k) {
            int idx = std::clamp(i - half + k, 0, n - 1);  // edge replication
            acc += x[idx];
        }
        smooth[i] = acc / avg_window;
    }

    TrendSignal trend;
    trend.values.resize(n);
    for (int i = diff_window; i < n; ++i) trend.values[i] = smooth[i] - smooth[i - diff_window];
    for (int i = 0; i < diff_window; ++i) trend.values[i] = trend.values[diff_window];
    return trend;
}

}  // namespace ecgad
