#include "ecgad/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgad/errors.hpp"
#include "ecgad/rng.hpp"

namespace ecgad {

using ad::Tensor;

void RunConfig::validate() const {
    if (stage != "pretrain" && stage != "finetune_frozen" && stage != "joint" && stage != "scratch")
        throw ConfigError("unknown training stage: " + stage);
    if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be positive");
    if (lr0 <= 0.0) throw ConfigError("lr0 must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    model.validate();
    asl.validate();
}

RunConfig RunConfig::from_config(const Config& cfg) {
    RunConfig r;
    r.stage = cfg.get_str("stage", r.stage);
    r.epochs = cfg.get_int("epochs", r.epochs);
    r.batch_size = cfg.get_int("batch_size", r.batch_size);
    r.lr0 = cfg.get_double("lr0", r.lr0);
    r.weight_decay = cfg.get_double("weight_decay", r.weight_decay);
    r.seed = static_cast<uint64_t>(cfg.get_double("seed", static_cast<double>(r.seed)));
    r.normal_class = cfg.get_str("normal_class", r.normal_class);
    r.allow_abnormal_pretrain = cfg.get_bool("pretrain.allow_abnormal", r.allow_abnormal_pretrain);
    r.preprocess = cfg.get_bool("preprocess.enabled", r.preprocess);
    r.mask.global_ratio = cfg.get_double("mask.global_ratio", r.mask.global_ratio);
    r.mask.local_ratio = cfg.get_double("mask.local_ratio", r.mask.local_ratio);
    r.mask.patch_len = cfg.get_int("mask.patch_len", r.mask.patch_len);
    r.model = ModelConfig::from_config(cfg);
    r.asl.gamma_pos = cfg.get_double("loss.gamma_pos", r.asl.gamma_pos);
    r.asl.gamma_neg = cfg.get_double("loss.gamma_neg", r.asl.gamma_neg);
    r.asl.tau = cfg.get_double("loss.tau", r.asl.tau);
    r.filter.low_hz = cfg.get_double("filter.low_hz", r.filter.low_hz);
    r.filter.high_hz = cfg.get_double("filter.high_hz", r.filter.high_hz);
    r.filter.notch_hz = cfg.get_double("filter.notch_hz", r.filter.notch_hz);
    r.filter.notch_q = cfg.get_double("filter.notch_q", r.filter.notch_q);
    r.filter.order = cfg.get_int("filter.order", r.filter.order);
    r.trend_avg_window = cfg.get_int("trend.avg_window", r.trend_avg_window);
    r.trend_diff_window = cfg.get_int("trend.diff_window", r.trend_diff_window);
    r.validate();
    return r;
}

Config RunConfig::to_config() const {
    Config cfg;
    cfg.set("stage", stage);
    cfg.set_int("epochs", epochs);
    cfg.set_int("batch_size", batch_size);
    cfg.set_double("lr0", lr0);
    cfg.set_double("weight_decay", weight_decay);
    cfg.set_int("seed", static_cast<long long>(seed));
    cfg.set("normal_class", normal_class);
    cfg.set("pretrain.allow_abnormal", allow_abnormal_pretrain ? "true" : "false");
    cfg.set("preprocess.enabled", preprocess ? "true" : "false");
    cfg.set_double("mask.global_ratio", mask.global_ratio);
    cfg.set_double("mask.local_ratio", mask.local_ratio);
    cfg.set_int("mask.patch_len", mask.patch_len);
    model.to_config(cfg);
    cfg.set_double("loss.gamma_pos", asl.gamma_pos);
    cfg.set_double("loss.gamma_neg", asl.gamma_neg);
    cfg.set_double("loss.tau", asl.tau);
    cfg.set_double("filter.low_hz", filter.low_hz);
    cfg.set_double("filter.high_hz", filter.high_hz);
    cfg.set_double("filter.notch_hz", filter.notch_hz);
    cfg.set_double("filter.notch_q", filter.notch_q);
    cfg.set_int("filter.order", filter.order);
    cfg.set_int("trend.avg_window", trend_avg_window);
    cfg.set_int("trend.diff_window", trend_diff_window);
    return cfg;
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

PreparedRecord prepare_record(const EcgRecord& record, const RunConfig& cfg,
                              const io::NormalizationStats& stats, const io::LabelSchema* schema) {
    EcgRecord rec = cfg.preprocess ? bandpass_filter(record, cfg.filter) : record;
    PreparedRecord p;
    p.id = rec.record_id;
    p.attrs = rec.attributes;
    p.global = GlobalSignal{rec.channels.row(0).transpose(), rec.fs};
    if (p.global.length() != cfg.model.global_len)
        throw DataError("record " + rec.record_id + ": length " +
                        std::to_string(p.global.length()) + " != model global_len " +
                        std::to_string(cfg.model.global_len));
    if (cfg.model.use_trend)
        p.trend = extract_trend(p.global, cfg.trend_avg_window, cfg.trend_diff_window).values;
    if (cfg.model.use_local) {
        std::vector<int> peaks = detect_r_peaks(p.global, cfg.rpeak);
        p.beats = segment_beats(p.global, peaks, cfg.model.local_len);
    }
    p.t_attr = io::apply_normalization(stats, rec.attributes);
    if (rec.has_labels && schema) p.y = schema->encode(rec.labels);
    if (rec.has_labels)
        for (const auto& l : rec.labels)
            if (l != cfg.normal_class) p.abnormal = true;
    for (uint8_t m : rec.anomaly_mask)
        if (m) p.mask_anomalous = true;
    return p;
}

std::vector<PreparedRecord> prepare_records(const std::vector<EcgRecord>& records,
                                            const RunConfig& cfg, const io::NormalizationStats& stats,
                                            const io::LabelSchema* schema) {
    std::vector<PreparedRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(prepare_record(r, cfg, stats, schema));
    return out;
}

// ---------------------------------------------------------------------------
// Loss assembly per sample
// ---------------------------------------------------------------------------

namespace {

Tensor constant_vec(const Eigen::VectorXd& v) {
    return Tensor::constant({static_cast<int>(v.size())}, v.array());
}

struct SampleInputs {
    Eigen::VectorXd global_in;  // masked (or clean) global
    Eigen::VectorXd local_in;   // masked (or clean) beat; empty if none
    Eigen::VectorXd local_clean;
};

// Masking policy for one training sample. rng must be sample-addressed so
// batch composition never affects the draw.
SampleInputs make_inputs(const PreparedRecord& rec, const RunConfig& cfg, Rng& rng) {
    SampleInputs in;
    const bool want_local = cfg.model.use_local && !rec.beats.empty();
    if (cfg.model.use_masking) {
        auto [mg, gdesc] = mask_global(rec.global, cfg.mask.global_ratio, cfg.mask.patch_len, rng);
        in.global_in = mg.values;
        if (want_local) {
            const LocalBeat& beat = select_training_beat(rec.beats, rng);
            in.local_clean = beat.values;
            auto [ml, ldesc] = mask_local(beat, cfg.mask.local_ratio, rng);
            in.local_in = ml.values;
        }
    } else {
        in.global_in = rec.global.values;
        if (want_local) {
            const LocalBeat& beat = select_training_beat(rec.beats, rng);
            in.local_clean = beat.values;
            in.local_in = beat.values;
        }
    }
    return in;
}

Tensor sample_ad_loss(const RestorationModel& model, const PreparedRecord& rec,
                      const RunConfig& cfg, const SampleInputs& in, RestorationOutput* out_opt) {
    RestorationOutput out = model.forward(in.global_in, in.local_in, rec.trend, false);
    Tensor x_g = constant_vec(rec.global.values);
    Tensor res;
    if (in.local_in.size() > 0) {
        res = loss_res(x_g, out.global_recon, out.sigma_g, constant_vec(in.local_clean),
                       out.local_recon, out.sigma_l);
    } else {
        res = loss_res(x_g, out.global_recon, out.sigma_g, Tensor(), Tensor(), Tensor());
    }
    Tensor trend, pred;
    if (cfg.model.use_trend) trend = loss_trend(x_g, out.trend_recon);
    if (cfg.model.use_attr) pred = loss_pred(constant_vec(rec.t_attr), out.attr_pred);
    if (out_opt) *out_opt = out;
    return loss_ad(res, trend, pred, cfg.model.alpha, cfg.model.beta);
}

void scale_grads(std::vector<ad::Parameter>& params, double factor) {
    for (auto& p : params) {
        if (p.tensor.grad().size() > 0) p.tensor.grad() *= factor;
    }
}

std::vector<ad::Array> snapshot_params(const RestorationModel& model) {
    std::vector<ad::Array> out;
    out.reserve(model.parameters().size());
    for (const auto& p : model.parameters()) out.push_back(p.tensor.value());
    return out;
}

void check_finite(double loss, int epoch, const char* stage) {
    if (!std::isfinite(loss))
        throw NumericError(std::string(stage) + ": non-finite loss at epoch " +
                           std::to_string(epoch));
}

// Shared epoch loop. `sample_loss` builds the per-sample graph;
// `val_loss_fn` evaluates one validation record under NoGrad.
template <typename SampleLossFn, typename ValLossFn>
TrainResult run_epochs(RestorationModel& model, std::vector<ad::Parameter> opt_params,
                       const RunConfig& cfg, size_t n_train, size_t n_val,
                       SampleLossFn&& sample_loss, ValLossFn&& val_loss_fn, const char* stage) {
    require(n_train > 0, std::string(stage) + ": no training records");
    ad::AdamW opt(opt_params, cfg.weight_decay);
    const int steps_per_epoch =
        static_cast<int>((n_train + cfg.batch_size - 1) / cfg.batch_size);
    const int total_steps = steps_per_epoch * cfg.epochs;

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    int global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng::derive(cfg.seed, {0x54f1, static_cast<uint64_t>(epoch)});
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        double lr_first = 0.0;
        size_t cursor = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            opt.zero_grad();
            int batch_n = 0;
            double batch_loss = 0.0;
            while (cursor < order.size() && batch_n < cfg.batch_size) {
                const size_t idx = order[cursor++];
                Tensor loss = sample_loss(idx, epoch);
                ad::backward(loss);
                batch_loss += loss.item();
                ++batch_n;
            }
            scale_grads(opt_params, 1.0 / batch_n);
            const double lr = ad::cosine_lr(global_step, total_steps, cfg.lr0);
            if (step == 0) lr_first = lr;
            opt.step(lr);
            ++global_step;
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(n_train);
        check_finite(epoch_loss, epoch, stage);

        double val_loss = 0.0;
        if (n_val > 0) {
            ad::NoGradGuard ng;
            for (size_t i = 0; i < n_val; ++i) val_loss += val_loss_fn(i);
            val_loss /= static_cast<double>(n_val);
            check_finite(val_loss, epoch, stage);
        } else {
            val_loss = epoch_loss;
        }

        result.curve.push_back({epoch, epoch_loss, val_loss, lr_first});
        if (val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            result.best_params = snapshot_params(model);
        }
    }
    if (result.best_params.empty()) result.best_params = snapshot_params(model);
    return result;
}

}  // namespace

void restore_params(RestorationModel& model, const std::vector<ad::Array>& values) {
    auto& params = model.parameters();
    require(values.size() == params.size(), "restore_params: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        require(values[i].size() == params[i].tensor.value().size(),
                "restore_params: parameter size mismatch");
        params[i].tensor.value() = values[i];
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

TrainResult pretrain(RestorationModel& model, const RunConfig& cfg,
                     const std::vector<PreparedRecord>& train,
                     const std::vector<PreparedRecord>& val) {
    if (!cfg.allow_abnormal_pretrain)
        for (const auto& r : train)
            if (r.abnormal)
                throw DataError("pretrain: abnormal record in the pretraining set: " + r.id);

    auto sample_loss = [&](size_t idx, int epoch) {
        const PreparedRecord& rec = train[idx];
        Rng rng = Rng::derive(cfg.seed, {0x7e41, static_cast<uint64_t>(epoch),
                                         static_cast<uint64_t>(idx)});
        SampleInputs in = make_inputs(rec, cfg, rng);
        return sample_ad_loss(model, rec, cfg, in, nullptr);
    };
    auto val_loss = [&](size_t i) {
        const PreparedRecord& rec = val[i];
        // fixed (epoch-independent) validation masks keep epochs comparable
        Rng rng = Rng::derive(cfg.seed, {0xa1, static_cast<uint64_t>(i)});
        SampleInputs in = make_inputs(rec, cfg, rng);
        return sample_ad_loss(model, rec, cfg, in, nullptr).item();
    };
    return run_epochs(model, model.parameters(), cfg, train.size(), val.size(), sample_loss,
                      val_loss, "pretrain");
}

TrainResult finetune_frozen(RestorationModel& model, const RunConfig& cfg,
                            const std::vector<PreparedRecord>& train,
                            const std::vector<PreparedRecord>& val) {
    require(cfg.model.n_classes > 0, "finetune_frozen: model has no classifier head");
    for (const auto& r : train)
        if (r.y.size() == 0) throw DataError("finetune_frozen: unlabeled record " + r.id);

    // Backbone is frozen: features are a fixed function of each record, so
    // compute them once.
    auto combined_of = [&](const PreparedRecord& rec) {
        ad::NoGradGuard ng;
        Tensor g = model.encode_global(rec.global.values);
        Tensor t;
        if (cfg.model.use_trend) t = model.trend_autoencode(rec.trend, g).trend_tokens;
        return model.combined_features(g, t).value();
    };
    std::vector<ad::Array> feats_train, feats_val;
    for (const auto& r : train) feats_train.push_back(combined_of(r));
    for (const auto& r : val) feats_val.push_back(combined_of(r));

    const int f = cfg.model.combined_dim();
    auto head_loss = [&](const ad::Array& feat, const Eigen::VectorXd& y) {
        Tensor combined = Tensor::constant({f}, feat);
        Tensor probs = model.classify(combined);
        return loss_cls(constant_vec(y), probs, cfg.asl);
    };
    auto sample_loss = [&](size_t idx, int) { return head_loss(feats_train[idx], train[idx].y); };
    auto val_loss = [&](size_t i) { return head_loss(feats_val[i], val[i].y).item(); };
    return run_epochs(model, model.classifier_parameters(), cfg, train.size(), val.size(),
                      sample_loss, val_loss, "finetune_frozen");
}

TrainResult joint_train(RestorationModel& model, const RunConfig& cfg,
                        const std::vector<PreparedRecord>& train,
                        const std::vector<PreparedRecord>& val) {
    require(cfg.model.n_classes > 0, "joint_train: model has no classifier head");
    for (const auto& r : train)
        if (r.y.size() == 0) throw DataError("joint_train: unlabeled record " + r.id);

    auto joint_loss = [&](const PreparedRecord& rec, Rng& rng) {
        SampleInputs in = make_inputs(rec, cfg, rng);
        RestorationOutput out;
        Tensor ad_part = sample_ad_loss(model, rec, cfg, in, &out);
        Tensor probs = model.classify(out.combined);
        Tensor cls_part = loss_cls(constant_vec(rec.y), probs, cfg.asl);
        return ad::add(ad_part, cls_part);
    };
    auto sample_loss = [&](size_t idx, int epoch) {
        Rng rng = Rng::derive(cfg.seed, {0x301e7, static_cast<uint64_t>(epoch),
                                         static_cast<uint64_t>(idx)});
        return joint_loss(train[idx], rng);
    };
    auto val_loss = [&](size_t i) {
        Rng rng = Rng::derive(cfg.seed, {0x3a1, static_cast<uint64_t>(i)});
        return joint_loss(val[i], rng).item();
    };
    return run_epochs(model, model.parameters(), cfg, train.size(), val.size(), sample_loss,
                      val_loss, "joint_train");
}

TrainResult train_scratch(RestorationModel& model, const RunConfig& cfg,
                          const std::vector<PreparedRecord>& train,
                          const std::vector<PreparedRecord>& val) {
    require(cfg.model.n_classes > 0, "train_scratch: model has no classifier head");
    for (const auto& r : train)
        if (r.y.size() == 0) throw DataError("train_scratch: unlabeled record " + r.id);

    auto cls_loss = [&](const PreparedRecord& rec) {
        // supervised baseline sees clean inputs
        Eigen::VectorXd local;
        if (cfg.model.use_local && !rec.beats.empty()) local = rec.beats.front().values;
        RestorationOutput out = model.forward(rec.global.values, local, rec.trend, true);
        return loss_cls(constant_vec(rec.y), out.class_probs, cfg.asl);
    };
    auto sample_loss = [&](size_t idx, int) { return cls_loss(train[idx]); };
    auto val_loss = [&](size_t i) { return cls_loss(val[i]).item(); };
    return run_epochs(model, model.parameters(), cfg, train.size(), val.size(), sample_loss,
                      val_loss, "scratch");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::vector<Eigen::VectorXd> predict_probs(const RestorationModel& model,
                                           const std::vector<PreparedRecord>& records) {
    ad::NoGradGuard ng;
    std::vector<Eigen::VectorXd> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        Eigen::VectorXd local;
        if (model.config().use_local && !rec.beats.empty()) local = rec.beats.front().values;
        RestorationOutput o = model.forward(rec.global.values, local, rec.trend, true);
        out.push_back(o.class_probs.value().matrix());
    }
    return out;
}

namespace {

MetricReport macro_average(const std::vector<MetricReport>& reports) {
    MetricReport m;
    int n = 0;
    for (const auto& r : reports) {
        if (!r.defined) continue;
        m.auroc += r.auroc;
        m.sensitivity += r.sensitivity;
        m.specificity += r.specificity;
        m.f1 += r.f1;
        m.pre_at_90 += r.pre_at_90;
        m.n_pos += r.n_pos;
        m.n_neg += r.n_neg;
        ++n;
    }
    if (n == 0) {
        m.defined = false;
        return m;
    }
    m.auroc /= n;
    m.sensitivity /= n;
    m.specificity /= n;
    m.f1 /= n;
    m.pre_at_90 /= n;
    return m;
}

}  // namespace

double macro_auroc(const std::vector<Eigen::VectorXd>& probs,
                   const std::vector<PreparedRecord>& records, const io::LabelSchema& schema,
                   const std::vector<std::string>& class_filter) {
    require(probs.size() == records.size(), "macro_auroc: probs/records mismatch");
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < schema.n_classes(); ++k) {
        if (!class_filter.empty() &&
            std::find(class_filter.begin(), class_filter.end(), schema.names()[k]) ==
                class_filter.end())
            continue;
        std::vector<double> s;
        std::vector<int> l;
        for (size_t i = 0; i < records.size(); ++i) {
            if (records[i].y.size() == 0) continue;
            s.push_back(probs[i][k]);
            l.push_back(records[i].y[k] > 0.5 ? 1 : 0);
        }
        try {
            sum += auroc(s, l);
            ++n;
        } catch (const DataError&) {
            // single-class column; skipped
        }
    }
    if (n == 0) throw DataError("macro_auroc: no class with both labels present");
    return sum / n;
}

EvaluationResult evaluate(const RestorationModel& model, const std::vector<PreparedRecord>& test,
                          const io::LabelSchema& schema,
                          const std::map<std::string, io::RarityTier>& tiers) {
    EvaluationResult result;
    std::vector<Eigen::VectorXd> probs = predict_probs(model, test);

    auto class_report = [&](int k, const std::vector<size_t>& subset) {
        std::vector<double> s;
        std::vector<int> l;
        for (size_t i : subset) {
            if (test[i].y.size() == 0) continue;
            s.push_back(probs[i][k]);
            l.push_back(test[i].y[k] > 0.5 ? 1 : 0);
        }
        if (s.empty()) {
            MetricReport r;
            r.defined = false;
            return r;
        }
        return score_report(s, l);
    };

    std::vector<size_t> all(test.size());
    std::iota(all.begin(), all.end(), 0);

    std::vector<MetricReport> per_class_reports;
    for (int k = 0; k < schema.n_classes(); ++k) {
        MetricReport r = class_report(k, all);
        result.per_class.push_back({schema.names()[k], r});
        per_class_reports.push_back(r);
    }
    result.overall = macro_average(per_class_reports);

    for (io::RarityTier tier :
         {io::RarityTier::Common, io::RarityTier::Uncommon, io::RarityTier::Rare}) {
        std::vector<MetricReport> tier_class;
        for (int k = 0; k < schema.n_classes(); ++k) {
            auto it = tiers.find(schema.names()[k]);
            if (it == tiers.end() || it->second != tier) continue;
            tier_class.push_back(per_class_reports[k]);
        }
        if (tier_class.empty()) continue;
        MetricReport m = macro_average(tier_class);
        m.stratum_key = std::string("tier=") + io::tier_name(tier);
        result.tier_reports.emplace_back(io::tier_name(tier), m);
    }

    // Fairness strata on the macro metric: each stratum re-evaluates every
    // class within its records.
    auto strata_reports = [&](StratifyKey key) {
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < test.size(); ++i)
            groups[stratum_of(test[i].attrs.sex, test[i].attrs.age, key)].push_back(i);
        std::vector<MetricReport> out;
        for (const auto& [name, subset] : groups) {
            std::vector<MetricReport> cls;
            for (int k = 0; k < schema.n_classes(); ++k) cls.push_back(class_report(k, subset));
            MetricReport m = macro_average(cls);
            m.stratum_key = name;
            out.push_back(m);
        }
        return out;
    };
    result.sex_strata = strata_reports(StratifyKey::Sex);
    result.age_strata = strata_reports(StratifyKey::AgeDecade);
    return result;
}

}  // namespace ecgad
