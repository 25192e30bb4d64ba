#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecgad/io.hpp"
#include "ecgad/losses.hpp"
#include "ecgad/masking.hpp"
#include "ecgad/metrics.hpp"
#include "ecgad/model.hpp"
#include "ecgad/scoring.hpp"

namespace ecgad {

// Stage selector plus every knob a run needs; round-trips through the
// plain-text run config file.
struct RunConfig {
    std::string stage = "pretrain";  // pretrain | finetune_frozen | joint | scratch
    int epochs = 50;
    int batch_size = 32;
    double lr0 = 1e-4;
    double weight_decay = 1e-5;
    uint64_t seed = 7;
    std::string normal_class = "normal";
    bool allow_abnormal_pretrain = false;  // ablation escape hatch
    bool preprocess = true;                // in-memory band-pass before use
    MaskConfig mask;
    ModelConfig model;
    AsymmetricLossConfig asl;
    FilterConfig filter;
    int trend_avg_window = 25;
    int trend_diff_window = 1;
    RPeakConfig rpeak;

    void validate() const;
    static RunConfig from_config(const Config& cfg);
    Config to_config() const;
};

// Per-record cache of everything a training/scoring pass needs.
struct PreparedRecord {
    std::string id;
    GlobalSignal global;
    Eigen::VectorXd trend;
    std::vector<LocalBeat> beats;
    Eigen::VectorXd t_attr;  // normalized attributes
    Eigen::VectorXd y;       // multi-hot labels; zero-length when unlabeled
    AttributeVector attrs;
    bool abnormal = false;       // any diagnosis label besides the normal class
    bool mask_anomalous = false;  // ground-truth mask has nonzero entries
};

PreparedRecord prepare_record(const EcgRecord& record, const RunConfig& cfg,
                              const io::NormalizationStats& stats, const io::LabelSchema* schema);
std::vector<PreparedRecord> prepare_records(const std::vector<EcgRecord>& records,
                                            const RunConfig& cfg, const io::NormalizationStats& stats,
                                            const io::LabelSchema* schema);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr_first = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> curve;
    int best_epoch = 0;
    double best_val = 0.0;
    // Parameter values of the best-val epoch, in model parameter order.
    std::vector<ad::Array> best_params;
};

void restore_params(RestorationModel& model, const std::vector<ad::Array>& values);

// Self-supervised pretraining on NORMAL records (L_AD objective). Labeled
// abnormal records are rejected unless the config allows mixed pretraining.
TrainResult pretrain(RestorationModel& model, const RunConfig& cfg,
                     const std::vector<PreparedRecord>& train,
                     const std::vector<PreparedRecord>& val);

// Classifier on frozen backbone features (combined diagnostic features are
// precomputed once per record). Backbone bytes are untouched.
TrainResult finetune_frozen(RestorationModel& model, const RunConfig& cfg,
                            const std::vector<PreparedRecord>& train,
                            const std::vector<PreparedRecord>& val);

// End-to-end optimization of L_AD + L_cls over all parameters.
TrainResult joint_train(RestorationModel& model, const RunConfig& cfg,
                        const std::vector<PreparedRecord>& train,
                        const std::vector<PreparedRecord>& val);

// Supervised baseline: L_cls only, unmasked inputs, random init.
TrainResult train_scratch(RestorationModel& model, const RunConfig& cfg,
                          const std::vector<PreparedRecord>& train,
                          const std::vector<PreparedRecord>& val);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct ClassReport {
    std::string class_name;
    MetricReport report;
};

struct EvaluationResult {
    std::vector<ClassReport> per_class;
    MetricReport overall;                       // macro-averaged over defined classes
    std::vector<std::pair<std::string, MetricReport>> tier_reports;
    std::vector<MetricReport> sex_strata;
    std::vector<MetricReport> age_strata;
};

// Unmasked classifier predictions for each record.
std::vector<Eigen::VectorXd> predict_probs(const RestorationModel& model,
                                           const std::vector<PreparedRecord>& records);

EvaluationResult evaluate(const RestorationModel& model, const std::vector<PreparedRecord>& test,
                          const io::LabelSchema& schema,
                          const std::map<std::string, io::RarityTier>& tiers);

// Macro AUROC over a subset of classes (empty filter = all defined classes).
double macro_auroc(const std::vector<Eigen::VectorXd>& probs,
                   const std::vector<PreparedRecord>& records, const io::LabelSchema& schema,
                   const std::vector<std::string>& class_filter = {});

}  // namespace ecgad
