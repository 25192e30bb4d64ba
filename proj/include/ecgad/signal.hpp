#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ecgad {

// Patient attributes attached to a record. Values are NaN when unknown;
// `normalized` is filled by io::apply_normalization.
struct AttributeVector {
    double sex = kMissing;  // 0 male, 1 female
    double age = kMissing;
    double heart_rate = kMissing;  // bpm
    double pr_ms = kMissing;
    double qt_ms = kMissing;
    double qtc_ms = kMissing;
    double qrs_ms = kMissing;
    Eigen::VectorXd normalized;  // t_attr

    static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
    static constexpr int kCount = 7;
    static const char* name(int i);
    double get(int i) const;
    void set(int i, double v);
};

// One multi-channel ECG in physical units (mV), channels x samples.
struct EcgRecord {
    std::string record_id;
    Eigen::MatrixXd channels;
    double fs = 0.0;
    AttributeVector attributes;
    bool has_labels = false;
    std::vector<std::string> labels;     // diagnosis names; meaningful iff has_labels
    std::vector<uint8_t> anomaly_mask;   // per-sample ground truth; empty when absent

    int n_channels() const { return static_cast<int>(channels.rows()); }
    int samples() const { return static_cast<int>(channels.cols()); }
    void validate() const;  // fs > 0, mask length matches when present
};

// Full-length rhythm strip x_g (channel 0 of a record).
struct GlobalSignal {
    Eigen::VectorXd values;
    double fs = 0.0;

    int length() const { return static_cast<int>(values.size()); }
};

// d-sample window around one R-peak. `window_start` is the true (possibly
// out-of-frame) start of the window; `origin_index` is that start clamped
// into [0, D-d]. Samples outside the record are zero-padded.
struct LocalBeat {
    Eigen::VectorXd values;
    int origin_index = 0;
    int window_start = 0;

    int length() const { return static_cast<int>(values.size()); }
    int pad_left() const { return window_start < 0 ? -window_start : 0; }
    int pad_right(int record_len) const {
        int over = window_start + length() - record_len;
        return over > 0 ? over : 0;
    }
};

struct TrendSignal {
    Eigen::VectorXd values;
};

// Second-order IIR section, direct form I: y = b0 x + b1 x1 + b2 x2 - a1 y1 - a2 y2.
struct Biquad {
    double b0, b1, b2, a1, a2;
};

struct FilterConfig {
    double low_hz = 0.5;
    double high_hz = 40.0;
    double notch_hz = 50.0;  // <= 0 disables the notch
    double notch_q = 30.0;
    int order = 4;  // per Butterworth edge, must be even
};

// Butterworth sections via the RBJ biquad forms with pole-derived Q values.
std::vector<Biquad> butter_lowpass(int order, double fc, double fs);
std::vector<Biquad> butter_highpass(int order, double fc, double fs);
Biquad notch_filter(double f0, double fs, double q);

// Single forward pass of a section cascade.
Eigen::VectorXd filter_cascade(const std::vector<Biquad>& sections, const Eigen::VectorXd& x);

// Zero-phase forward-backward filtering. Edge states follow Gustafsson's
// method (forward-backward equals backward-forward), section by section.
Eigen::VectorXd filtfilt(const std::vector<Biquad>& sections, const Eigen::VectorXd& x);

// Band-pass + notch every channel of a record, zero phase. Channel count and
// length are unchanged.
EcgRecord bandpass_filter(const EcgRecord& record, const FilterConfig& cfg = {});

struct RPeakConfig {
    double refractory_s = 0.2;
    double rolling_window_s = 2.0;  // adaptive-threshold window
    double threshold_frac = 0.5;    // fraction of the rolling envelope max
    double envelope_s = 0.15;       // moving-average width for the energy envelope
    double search_s = 0.10;         // peak refinement half-window
};

// Squared-derivative energy envelope with an adaptive rolling-max threshold.
// Returns strictly increasing indices with refractory spacing; empty when no
// morphology is found.
std::vector<int> detect_r_peaks(const GlobalSignal& signal, const RPeakConfig& cfg = {});

// One d-sample beat per peak, centered on the R index, clipped and
// zero-padded at record boundaries.
std::vector<LocalBeat> segment_beats(const GlobalSignal& signal, const std::vector<int>& r_peaks,
                                     int beat_len);

// Moving average (edge-replicated) followed by a first difference at
// `diff_window`; the leading lag is re-padded by replicating the first
// computed value, keeping the operator linear in the input.
TrendSignal extract_trend(const GlobalSignal& signal, int avg_window = 25, int diff_window = 1);

}  // namespace ecgad
