#include "ecgad/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ecgad/errors.hpp"
#include "ecgad/io.hpp"
#include "ecgad/metrics.hpp"
#include "ecgad/scoring.hpp"
#include "ecgad/svg.hpp"
#include "ecgad/synth.hpp"
#include "ecgad/training.hpp"

namespace fs = std::filesystem;

namespace ecgad::cli {

namespace {

Config load_config_or_empty(const std::string& path) {
    if (path.empty()) return Config();
    return Config::from_file(path);
}

Config resolved_config(const CommonArgs& args) {
    Config cfg = load_config_or_empty(args.config_path);
    cfg.set_int("seed", static_cast<long long>(resolve_seed(args.seed, cfg)));
    if (args.epochs) cfg.set_int("epochs", *args.epochs);
    return cfg;
}

void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ConfigError("--out directory is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
}

struct ManifestBuilder {
    Config kv;

    void set_command(const std::string& cmd) { kv.set("command", cmd); }
    void add_config(const Config& cfg) {
        for (const auto& [k, v] : cfg.entries()) kv.set("config." + k, v);
    }
    void add_input_dir(const std::string& name, const std::string& dir) {
        kv.set("input." + name + ".dir", dir);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(io::dataset_checksum(dir)));
        kv.set("input." + name + ".checksum", buf);
    }
    void add_output(const std::string& out_dir, const std::string& file) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(
                          io::fnv1a_file((fs::path(out_dir) / file).string())));
        kv.set("output." + file, buf);
    }
    void save(const std::string& out_dir) const {
        kv.save((fs::path(out_dir) / "manifest.txt").string());
    }
};

void write_loss_curve(const std::string& out_dir, const TrainResult& result) {
    std::ofstream out(fs::path(out_dir) / "loss_curve.csv");
    if (!out) throw DataError("cannot write loss curve");
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& e : result.curve)
        out << e.epoch << "," << format_double(e.train_loss) << "," << format_double(e.val_loss)
            << "," << format_double(e.lr_first) << "\n";
}

void stats_to_config(const io::NormalizationStats& stats, Config& cfg) {
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        cfg.set_double("norm.mean." + std::to_string(i), stats.mean[i]);
        cfg.set_double("norm.std." + std::to_string(i), stats.std[i]);
    }
}

io::NormalizationStats stats_from_config(const Config& cfg) {
    io::NormalizationStats s;
    s.mean = Eigen::VectorXd::Zero(AttributeVector::kCount);
    s.std = Eigen::VectorXd::Ones(AttributeVector::kCount);
    for (int i = 0; i < AttributeVector::kCount; ++i) {
        s.mean[i] = cfg.get_double("norm.mean." + std::to_string(i), 0.0);
        s.std[i] = cfg.get_double("norm.std." + std::to_string(i), 1.0);
    }
    return s;
}

ScoringConfig scoring_config(const RunConfig& rc) {
    ScoringConfig sc;
    sc.trend_avg_window = rc.trend_avg_window;
    sc.trend_diff_window = rc.trend_diff_window;
    sc.rpeak = rc.rpeak;
    return sc;
}

// Architecture keys that must come from the checkpoint, not user overrides.
void pin_model_geometry(Config& cfg, const Config& ckpt) {
    for (const char* key :
         {"model.global_len", "model.local_len", "model.embed_dim", "model.encoder_depth",
          "model.conv_kernel", "model.heads", "model.decoder_hidden", "model.attr_hidden",
          "model.classifier_hidden", "model.classifier_depth", "model.n_attrs",
          "model.use_masking", "model.use_local", "model.use_trend", "model.use_attr",
          "model.sigma_eps"}) {
        if (ckpt.has(key)) cfg.set(key, ckpt.get_str(key, ""));
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        if (!item.empty()) out.push_back(item);
        if (comma == s.size()) break;
        pos = comma + 1;
    }
    return out;
}

std::string join_list(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

bool record_is_anomalous(const PreparedRecord& rec) {
    return rec.mask_anomalous || rec.abnormal;
}

void write_report_csv_header(std::ofstream& out) {
    out << "stratum,defined,auroc,sensitivity,specificity,f1,pre_at_90,n_pos,n_neg,threshold\n";
}

void write_report_csv_row(std::ofstream& out, const std::string& name, const MetricReport& r) {
    out << name << "," << (r.defined ? 1 : 0) << "," << format_double(r.auroc) << ","
        << format_double(r.sensitivity) << "," << format_double(r.specificity) << ","
        << format_double(r.f1) << "," << format_double(r.pre_at_90) << "," << r.n_pos << ","
        << r.n_neg << "," << format_double(r.operating_threshold) << "\n";
}

}  // namespace

uint64_t resolve_seed(const std::optional<uint64_t>& flag, const Config& cfg, uint64_t fallback) {
    if (flag) return *flag;
    if (cfg.has("seed")) return static_cast<uint64_t>(cfg.get_double("seed", 0.0));
    if (const char* env = std::getenv("CARDIO_ANOMALY_SEED")) {
        try {
            return static_cast<uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError("CARDIO_ANOMALY_SEED is not an integer");
        }
    }
    return fallback;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

void cmd_generate(const std::string& spec_path, int count, const std::string& out_dir,
                  std::optional<uint64_t> seed_flag, const std::string& id_prefix) {
    if (count < 0) throw ConfigError("--count must be >= 0");
    Config spec_cfg = load_config_or_empty(spec_path);
    const uint64_t seed = resolve_seed(seed_flag, spec_cfg);
    CohortSpec cohort = CohortSpec::from_config(spec_cfg);
    ensure_out_dir(out_dir);

    for (int i = 0; i < count; ++i) {
        SynthesisSpec spec = sample_spec(cohort, seed, static_cast<uint64_t>(i));
        const uint64_t rec_seed = Rng::derive(seed, {0x9ec, static_cast<uint64_t>(i)}).next_u64();
        EcgRecord rec = synthesize_ecg(spec, rec_seed);
        char id[64];
        std::snprintf(id, sizeof(id), "%s_%05d", id_prefix.c_str(), i);
        rec.record_id = id;
        io::save_record(rec, out_dir);
    }

    ManifestBuilder mb;
    mb.set_command("generate");
    mb.add_config(spec_cfg);
    mb.kv.set_int("seed", static_cast<long long>(seed));
    mb.kv.set_int("count", count);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(io::dataset_checksum(out_dir)));
    mb.kv.set("output.dataset.checksum", buf);
    mb.save(out_dir);
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

void cmd_preprocess(const std::string& records_dir, const CommonArgs& args) {
    Config cfg = resolved_config(args);
    RunConfig rc = RunConfig::from_config(cfg);
    ensure_out_dir(args.out_dir);
    for (const auto& id : io::list_records(records_dir)) {
        EcgRecord rec = io::load_record(records_dir, id);
        io::save_record(bandpass_filter(rec, rc.filter), args.out_dir);
    }
    ManifestBuilder mb;
    mb.set_command("preprocess");
    mb.add_config(cfg);
    mb.add_input_dir("records", records_dir);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(io::dataset_checksum(args.out_dir)));
    mb.kv.set("output.dataset.checksum", buf);
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

void cmd_pretrain(const std::string& train_dir, const std::string& val_dir,
                  const CommonArgs& args) {
    Config cfg = resolved_config(args);
    cfg.set_int("model.n_classes", 0);  // no classifier during pretraining
    cfg.set("stage", "pretrain");
    RunConfig rc = RunConfig::from_config(cfg);
    ensure_out_dir(args.out_dir);

    std::vector<EcgRecord> train_recs = io::load_records(train_dir);
    std::vector<EcgRecord> val_recs = io::load_records(val_dir);
    io::NormalizationStats stats = io::fit_normalization(train_recs);
    std::vector<PreparedRecord> train = prepare_records(train_recs, rc, stats, nullptr);
    std::vector<PreparedRecord> val = prepare_records(val_recs, rc, stats, nullptr);

    RestorationModel model(rc.model, rc.seed);
    TrainResult result = pretrain(model, rc, train, val);

    // final params first, then the best-val restore
    std::vector<ad::Array> final_params;
    for (const auto& p : model.parameters()) final_params.push_back(p.tensor.value());

    restore_params(model, result.best_params);
    // localization threshold from normal validation score maps
    std::vector<ScoreMap> val_maps;
    for (const auto& rec : val_recs) {
        EcgRecord filtered = rc.preprocess ? bandpass_filter(rec, rc.filter) : rec;
        val_maps.push_back(assemble(filtered, model, scoring_config(rc)));
    }
    const double loc_thr = localization_threshold(val_maps);

    Config extra = rc.to_config();
    stats_to_config(stats, extra);
    extra.set_double("calib.loc_threshold", loc_thr);
    extra.set_int("train.best_epoch", result.best_epoch);
    model.save_checkpoint((fs::path(args.out_dir) / "model.ckpt").string(), extra);

    restore_params(model, final_params);
    model.save_checkpoint((fs::path(args.out_dir) / "model_final.ckpt").string(), extra);

    write_loss_curve(args.out_dir, result);
    rc.to_config().save((fs::path(args.out_dir) / "run_config.txt").string());

    ManifestBuilder mb;
    mb.set_command("pretrain");
    mb.add_config(cfg);
    mb.add_input_dir("train", train_dir);
    mb.add_input_dir("val", val_dir);
    mb.add_output(args.out_dir, "model.ckpt");
    mb.add_output(args.out_dir, "model_final.ckpt");
    mb.add_output(args.out_dir, "loss_curve.csv");
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// finetune / joint-train
// ---------------------------------------------------------------------------

void cmd_finetune(const std::string& model_path, const std::string& train_dir,
                  const std::string& val_dir, const CommonArgs& args, bool joint) {
    Config ckpt_extra;
    {
        // parse header only; the model itself is rebuilt with a classifier
        RestorationModel probe = RestorationModel::load_checkpoint(model_path, &ckpt_extra);
        (void)probe;
    }
    Config cfg = ckpt_extra;
    Config user = resolved_config(args);
    cfg.merge(user);
    pin_model_geometry(cfg, ckpt_extra);

    std::vector<EcgRecord> train_recs = io::load_records(train_dir);
    std::vector<EcgRecord> val_recs = io::load_records(val_dir);
    io::LabelSchema schema = io::LabelSchema::infer(train_recs);
    if (schema.n_classes() == 0) throw DataError("finetune: training records carry no labels");
    cfg.set_int("model.n_classes", schema.n_classes());
    cfg.set("stage", joint ? "joint" : "finetune_frozen");
    RunConfig rc = RunConfig::from_config(cfg);
    ensure_out_dir(args.out_dir);

    io::NormalizationStats stats = stats_from_config(ckpt_extra);
    std::vector<PreparedRecord> train = prepare_records(train_recs, rc, stats, &schema);
    std::vector<PreparedRecord> val = prepare_records(val_recs, rc, stats, &schema);

    RestorationModel model(rc.model, rc.seed);
    load_backbone(model, model_path);

    TrainResult result =
        joint ? joint_train(model, rc, train, val) : finetune_frozen(model, rc, train, val);
    restore_params(model, result.best_params);

    Config extra = rc.to_config();
    stats_to_config(stats, extra);
    if (ckpt_extra.has("calib.loc_threshold"))
        extra.set("calib.loc_threshold", ckpt_extra.get_str("calib.loc_threshold", ""));
    extra.set("schema.classes", join_list(schema.names()));
    extra.set_int("train.best_epoch", result.best_epoch);
    model.save_checkpoint((fs::path(args.out_dir) / "model.ckpt").string(), extra);
    schema.save((fs::path(args.out_dir) / "label_schema.txt").string());
    write_loss_curve(args.out_dir, result);
    rc.to_config().save((fs::path(args.out_dir) / "run_config.txt").string());

    ManifestBuilder mb;
    mb.set_command(joint ? "joint-train" : "finetune");
    mb.add_config(cfg);
    mb.kv.set("input.model", model_path);
    mb.add_input_dir("train", train_dir);
    mb.add_input_dir("val", val_dir);
    mb.add_output(args.out_dir, "model.ckpt");
    mb.add_output(args.out_dir, "loss_curve.csv");
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

void cmd_score(const std::string& model_path, const std::string& records_dir,
               const CommonArgs& args, bool plot, std::optional<double> threshold, int jobs) {
    Config ckpt_extra;
    RestorationModel model = RestorationModel::load_checkpoint(model_path, &ckpt_extra);
    RunConfig rc = RunConfig::from_config(ckpt_extra);
    ensure_out_dir(args.out_dir);

    std::vector<std::string> schema_names = split_list(ckpt_extra.get_str("schema.classes", ""));

    std::vector<std::string> ids = io::list_records(records_dir);
    std::vector<EcgRecord> filtered(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        EcgRecord rec = io::load_record(records_dir, ids[i]);
        filtered[i] = rc.preprocess ? bandpass_filter(rec, rc.filter) : rec;
    }

    std::vector<ScoreMap> maps(ids.size());
    auto worker = [&](size_t start, size_t stride) {
        for (size_t i = start; i < ids.size(); i += stride)
            maps[i] = assemble(filtered[i], model, scoring_config(rc));
    };
    const int n_jobs = std::max(1, jobs);
    if (n_jobs == 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_jobs; ++t) pool.emplace_back(worker, static_cast<size_t>(t), n_jobs);
        for (auto& th : pool) th.join();
    }

    double loc_thr = threshold ? *threshold : ckpt_extra.get_double("calib.loc_threshold",
                                                                    std::nan(""));

    std::ofstream summary(fs::path(args.out_dir) / "summary.csv");
    summary << "record_id,anomaly_score,beat_count,unsegmentable,top5\n";
    for (size_t i = 0; i < ids.size(); ++i) {
        const ScoreMap& map = maps[i];
        std::ofstream csv(fs::path(args.out_dir) / (ids[i] + "_scores.csv"));
        csv << "index,s,s_g,s_l,mask\n";
        const auto& mask = filtered[i].anomaly_mask;
        for (int k = 0; k < map.values.size(); ++k)
            csv << k << "," << format_double(map.values[k]) << ","
                << format_double(map.global_part[k]) << "," << format_double(map.local_part[k])
                << "," << (mask.empty() ? 0 : static_cast<int>(mask[k])) << "\n";

        std::string top5;
        if (model.config().n_classes > 0 && !schema_names.empty()) {
            io::NormalizationStats stats = stats_from_config(ckpt_extra);
            PreparedRecord p = prepare_record(filtered[i], rc, stats, nullptr);
            ad::NoGradGuard ng;
            Eigen::VectorXd local;
            if (model.config().use_local && !p.beats.empty()) local = p.beats.front().values;
            RestorationOutput o = model.forward(p.global.values, local, p.trend, true);
            Eigen::VectorXd probs = o.class_probs.value().matrix();
            std::vector<int> order(probs.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (probs[a] != probs[b]) return probs[a] > probs[b];
                return a < b;
            });
            for (int r = 0; r < std::min<int>(5, static_cast<int>(order.size())); ++r) {
                if (r) top5 += ";";
                top5 += schema_names[order[r]] + ":" + format_double(probs[order[r]]);
            }
        }
        summary << ids[i] << "," << format_double(map.anomaly_score) << "," << map.beat_count << ","
                << (map.unsegmentable ? 1 : 0) << "," << top5 << "\n";

        if (plot) {
            std::vector<std::pair<int, int>> spans;
            size_t k = 0;
            while (k < mask.size()) {
                if (!mask[k]) {
                    ++k;
                    continue;
                }
                size_t e = k;
                while (e < mask.size() && mask[e]) ++e;
                spans.emplace_back(static_cast<int>(k), static_cast<int>(e));
                k = e;
            }
            svg::write_line_plot((fs::path(args.out_dir) / (ids[i] + "_scores.svg")).string(),
                                 "score map " + ids[i],
                                 {{"S", "#d62728", map.values},
                                  {"S_g", "#1f77b4", map.global_part},
                                  {"S_l", "#2ca02c", map.local_part}},
                                 spans);
        }
    }
    summary.close();

    // binarized localization at the resolved threshold, when one exists
    if (std::isfinite(loc_thr)) {
        std::ofstream out(fs::path(args.out_dir) / "localization.csv");
        out << "record_id,threshold,predicted_fraction\n";
        for (size_t i = 0; i < ids.size(); ++i) {
            auto pred = binarize(maps[i], loc_thr);
            const double frac =
                std::accumulate(pred.begin(), pred.end(), 0.0) / std::max<size_t>(1, pred.size());
            out << ids[i] << "," << format_double(loc_thr) << "," << format_double(frac) << "\n";
        }
    }

    ManifestBuilder mb;
    mb.set_command("score");
    mb.kv.set("input.model", model_path);
    mb.add_input_dir("records", records_dir);
    mb.add_output(args.out_dir, "summary.csv");
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void cmd_evaluate(const std::string& model_path, const std::string& records_dir,
                  const std::string& train_dir_for_tiers, const CommonArgs& args) {
    Config ckpt_extra;
    RestorationModel model = RestorationModel::load_checkpoint(model_path, &ckpt_extra);
    if (model.config().n_classes == 0)
        throw ConfigError("evaluate: checkpoint has no classifier head");
    RunConfig rc = RunConfig::from_config(ckpt_extra);
    ensure_out_dir(args.out_dir);

    std::vector<std::string> names = split_list(ckpt_extra.get_str("schema.classes", ""));
    if (static_cast<int>(names.size()) != model.config().n_classes)
        throw DataError("evaluate: checkpoint schema missing or inconsistent");
    io::LabelSchema schema(names);

    io::NormalizationStats stats = stats_from_config(ckpt_extra);
    std::vector<EcgRecord> recs = io::load_records(records_dir);
    std::vector<PreparedRecord> test = prepare_records(recs, rc, stats, &schema);

    std::map<std::string, io::RarityTier> tiers;
    if (!train_dir_for_tiers.empty()) {
        Config user = load_config_or_empty(args.config_path);
        tiers = io::tier_classes(io::load_records(train_dir_for_tiers),
                                 user.get_int("tier.low", 10), user.get_int("tier.high", 50));
    }

    EvaluationResult result = evaluate(model, test, schema, tiers);

    {
        std::ofstream out(fs::path(args.out_dir) / "per_class.csv");
        write_report_csv_header(out);
        for (const auto& c : result.per_class) write_report_csv_row(out, c.class_name, c.report);
    }
    {
        std::ofstream out(fs::path(args.out_dir) / "reports.csv");
        write_report_csv_header(out);
        write_report_csv_row(out, "overall", result.overall);
        for (const auto& [name, r] : result.tier_reports) write_report_csv_row(out, name, r);
        for (const auto& r : result.sex_strata) write_report_csv_row(out, r.stratum_key, r);
        for (const auto& r : result.age_strata) write_report_csv_row(out, r.stratum_key, r);
    }
    {
        std::ofstream out(fs::path(args.out_dir) / "report.txt");
        out << "class                         auroc   sens    spec    f1      pre@90\n";
        char line[160];
        auto print = [&](const std::string& name, const MetricReport& r) {
            if (!r.defined) {
                std::snprintf(line, sizeof(line), "%-28s  undefined (n_pos=%d n_neg=%d)\n",
                              name.c_str(), r.n_pos, r.n_neg);
            } else {
                std::snprintf(line, sizeof(line), "%-28s  %.4f  %.4f  %.4f  %.4f  %.4f\n",
                              name.c_str(), r.auroc, r.sensitivity, r.specificity, r.f1,
                              r.pre_at_90);
            }
            out << line;
        };
        for (const auto& c : result.per_class) print(c.class_name, c.report);
        print("overall(macro)", result.overall);
        for (const auto& [name, r] : result.tier_reports) print("tier:" + name, r);
        for (const auto& r : result.sex_strata) print(r.stratum_key, r);
        for (const auto& r : result.age_strata) print(r.stratum_key, r);
    }

    ManifestBuilder mb;
    mb.set_command("evaluate");
    mb.kv.set("input.model", model_path);
    mb.add_input_dir("records", records_dir);
    mb.add_output(args.out_dir, "per_class.csv");
    mb.add_output(args.out_dir, "reports.csv");
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// fairness-report
// ---------------------------------------------------------------------------

void cmd_fairness(const std::string& model_path, const std::string& records_dir,
                  const std::string& by, const CommonArgs& args) {
    Config ckpt_extra;
    RestorationModel model = RestorationModel::load_checkpoint(model_path, &ckpt_extra);
    RunConfig rc = RunConfig::from_config(ckpt_extra);
    ensure_out_dir(args.out_dir);

    std::vector<EcgRecord> recs = io::load_records(records_dir);
    io::NormalizationStats stats = stats_from_config(ckpt_extra);
    std::vector<PreparedRecord> prepared = prepare_records(recs, rc, stats, nullptr);

    // Detection fairness: the anomaly score A(x) against anomalous ground truth.
    std::vector<StratifiedItem> items(prepared.size());
    for (size_t i = 0; i < prepared.size(); ++i) {
        EcgRecord filtered = rc.preprocess ? bandpass_filter(recs[i], rc.filter) : recs[i];
        ScoreMap map = assemble(filtered, model, scoring_config(rc));
        items[i].sex = prepared[i].attrs.sex;
        items[i].age = prepared[i].attrs.age;
        items[i].score = map.anomaly_score;
        items[i].label = record_is_anomalous(prepared[i]) ? 1 : 0;
    }

    std::ofstream csv(fs::path(args.out_dir) / "fairness.csv");
    write_report_csv_header(csv);
    std::ofstream txt(fs::path(args.out_dir) / "fairness.txt");

    std::vector<svg::BarGroup> groups;
    for (const std::string& key_name : split_list(by)) {
        StratifyKey key;
        if (key_name == "sex")
            key = StratifyKey::Sex;
        else if (key_name == "age")
            key = StratifyKey::AgeDecade;
        else
            throw ConfigError("fairness-report: unknown stratification key: " + key_name);

        std::vector<MetricReport> reports = stratify(items, key);
        double lo = 2.0, hi = -1.0;
        for (const auto& r : reports) {
            write_report_csv_row(csv, r.stratum_key, r);
            if (r.defined) {
                lo = std::min(lo, r.auroc);
                hi = std::max(hi, r.auroc);
                groups.push_back({r.stratum_key, {r.auroc, r.sensitivity, r.specificity}});
            } else {
                txt << r.stratum_key << " undefined (single-class stratum)\n";
            }
        }
        if (hi >= lo)
            txt << key_name << " auroc_gap = " << format_double(hi - lo) << "\n";
        else
            txt << key_name << " auroc_gap = undefined\n";
    }
    if (!groups.empty())
        svg::write_grouped_bars((fs::path(args.out_dir) / "fairness.svg").string(),
                                "fairness by stratum", {"auroc", "sensitivity", "specificity"},
                                groups);

    ManifestBuilder mb;
    mb.set_command("fairness-report");
    mb.kv.set("input.model", model_path);
    mb.add_input_dir("records", records_dir);
    mb.add_output(args.out_dir, "fairness.csv");
    mb.save(args.out_dir);
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

void cmd_ablate(const std::string& train_dir, const std::string& val_dir,
                const std::string& test_dir, const std::string& components,
                const std::string& seeds, const CommonArgs& args) {
    Config cfg = resolved_config(args);
    cfg.set("stage", "pretrain");
    cfg.set_int("model.n_classes", 0);
    RunConfig base = RunConfig::from_config(cfg);
    ensure_out_dir(args.out_dir);

    std::vector<std::string> comp = split_list(components.empty() ? "mr,mc,tar,apm" : components);
    for (const auto& c : comp)
        if (c != "mr" && c != "mc" && c != "tar" && c != "apm")
            throw ConfigError("ablate: unknown component: " + c);

    std::vector<uint64_t> seed_list;
    for (const auto& s : split_list(seeds.empty() ? "1,2,3,4,5" : seeds))
        seed_list.push_back(std::stoull(s));

    // cumulative lattice: none, then +component in the given order
    struct Stage {
        std::string name;
        bool mr = false, mc = false, tar = false, apm = false;
    };
    std::vector<Stage> stages;
    Stage cur{"none"};
    stages.push_back(cur);
    std::string label = "none";
    for (const auto& c : comp) {
        if (c == "mr") cur.mr = true;
        if (c == "mc") cur.mc = true;
        if (c == "tar") cur.tar = true;
        if (c == "apm") cur.apm = true;
        label += "+" + c;
        cur.name = label;
        stages.push_back(cur);
    }

    std::vector<EcgRecord> train_recs = io::load_records(train_dir);
    std::vector<EcgRecord> val_recs = io::load_records(val_dir);
    std::vector<EcgRecord> test_recs = io::load_records(test_dir);
    io::NormalizationStats stats = io::fit_normalization(train_recs);

    // prepared with all branches so every stage reuses the same cache
    RunConfig full = base;
    full.model.use_masking = full.model.use_local = full.model.use_trend = full.model.use_attr =
        true;
    std::vector<PreparedRecord> train = prepare_records(train_recs, full, stats, nullptr);
    std::vector<PreparedRecord> val = prepare_records(val_recs, full, stats, nullptr);
    std::vector<PreparedRecord> test = prepare_records(test_recs, full, stats, nullptr);
    std::vector<EcgRecord> test_filtered;
    for (const auto& r : test_recs)
        test_filtered.push_back(base.preprocess ? bandpass_filter(r, base.filter) : r);

    std::ofstream csv(fs::path(args.out_dir) / "ablation.csv");
    csv << "stage,seed,auroc\n";
    std::vector<double> stage_mean(stages.size(), 0.0);

    for (uint64_t seed : seed_list) {
        for (size_t si = 0; si < stages.size(); ++si) {
            const Stage& st = stages[si];
            RunConfig rc = base;
            rc.seed = seed;
            rc.model.use_masking = st.mr;
            rc.model.use_local = st.mc;
            rc.model.use_trend = st.tar;
            rc.model.use_attr = st.apm;

            RestorationModel model(rc.model, rc.seed);
            TrainResult result = pretrain(model, rc, train, val);
            restore_params(model, result.best_params);

            std::vector<double> scores;
            std::vector<int> labels;
            for (size_t i = 0; i < test.size(); ++i) {
                ScoreMap map = assemble(test_filtered[i], model, scoring_config(rc));
                scores.push_back(map.anomaly_score);
                labels.push_back(record_is_anomalous(test[i]) ? 1 : 0);
            }
            const double v = auroc(scores, labels);
            csv << st.name << "," << seed << "," << format_double(v) << "\n";
            csv.flush();
            stage_mean[si] += v;

            Config stage_cfg = rc.to_config();
            stage_cfg.save((fs::path(args.out_dir) /
                            ("stage_" + std::to_string(si) + "_seed_" + std::to_string(seed) +
                             "_config.txt"))
                               .string());
        }
    }
    for (size_t si = 0; si < stages.size(); ++si)
        csv << stages[si].name << ",mean," << format_double(stage_mean[si] / seed_list.size())
            << "\n";
    csv.close();

    ManifestBuilder mb;
    mb.set_command("ablate");
    mb.add_config(cfg);
    mb.add_input_dir("train", train_dir);
    mb.add_input_dir("val", val_dir);
    mb.add_input_dir("test", test_dir);
    mb.kv.set("components", components.empty() ? "mr,mc,tar,apm" : components);
    mb.kv.set("seeds", seeds.empty() ? "1,2,3,4,5" : seeds);
    mb.add_output(args.out_dir, "ablation.csv");
    mb.save(args.out_dir);
}

}  // namespace ecgad::cli
