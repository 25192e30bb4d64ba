// Command-line front end for the ECG anomaly-detection pipeline.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric failure (non-finite loss), 1 anything else.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "ecgad/cli.hpp"
#include "ecgad/errors.hpp"

using ecgad::cli::CommonArgs;

int main(int argc, char** argv) {
    CLI::App app{"ecgad: two-stage ECG anomaly detection and diagnosis"};
    app.require_subcommand(1);

    std::string spec_path, records_dir, train_dir, val_dir, test_dir, model_path;
    std::string tiers_train_dir, by = "sex,age", components, seeds;
    int count = 0, jobs = 1;
    bool plot = false;
    std::optional<double> threshold;
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
    CommonArgs common;

    auto add_common = [&](CLI::App* cmd, bool with_out = true) {
        cmd->add_option("--config", common.config_path, "run config file (key = value)");
        cmd->add_option("--seed", seed, "seed override (else config, else CARDIO_ANOMALY_SEED)");
        cmd->add_option("--epochs", epochs, "epoch override");
        if (with_out) cmd->add_option("--out", common.out_dir, "output directory")->required();
    };

    auto* generate = app.add_subcommand("generate", "synthesize an ECG cohort");
    generate->add_option("--spec", spec_path, "cohort spec config file");
    generate->add_option("--count", count, "number of records")->required();
    add_common(generate);

    auto* preprocess = app.add_subcommand("preprocess", "band-pass + notch filter records");
    preprocess->add_option("--records", records_dir, "input records directory")->required();
    add_common(preprocess);

    auto* pretrain = app.add_subcommand("pretrain", "self-supervised restoration pretraining");
    pretrain->add_option("--train", train_dir, "normal training records")->required();
    pretrain->add_option("--val", val_dir, "normal validation records")->required();
    add_common(pretrain);

    auto* finetune = app.add_subcommand("finetune", "train classifier on a frozen backbone");
    finetune->add_option("--model", model_path, "pretrained checkpoint")->required();
    finetune->add_option("--train", train_dir, "labeled training records")->required();
    finetune->add_option("--val", val_dir, "labeled validation records")->required();
    add_common(finetune);

    auto* joint = app.add_subcommand("joint-train", "joint restoration + classification training");
    joint->add_option("--model", model_path, "pretrained checkpoint")->required();
    joint->add_option("--train", train_dir, "labeled training records")->required();
    joint->add_option("--val", val_dir, "labeled validation records")->required();
    add_common(joint);

    auto* score = app.add_subcommand("score", "anomaly score maps and top-5 classes");
    score->add_option("--model", model_path, "checkpoint")->required();
    score->add_option("--records", records_dir, "records to score")->required();
    score->add_flag("--plot", plot, "emit one SVG score plot per record");
    score->add_option("--threshold", threshold, "localization threshold override");
    score->add_option("--jobs", jobs, "worker threads (deterministic output order)");
    add_common(score);

    auto* evaluate = app.add_subcommand("evaluate", "classification metric reports");
    evaluate->add_option("--model", model_path, "classifier checkpoint")->required();
    evaluate->add_option("--records", records_dir, "test records")->required();
    evaluate->add_option("--train", tiers_train_dir, "training records for rarity tiers");
    add_common(evaluate);

    auto* fairness = app.add_subcommand("fairness-report", "stratified performance report");
    fairness->add_option("--model", model_path, "checkpoint")->required();
    fairness->add_option("--records", records_dir, "records")->required();
    fairness->add_option("--by", by, "strata keys: sex,age");
    add_common(fairness);

    auto* ablate = app.add_subcommand("ablate", "component-lattice ablation study");
    ablate->add_option("--train", train_dir, "normal training records")->required();
    ablate->add_option("--val", val_dir, "normal validation records")->required();
    ablate->add_option("--test", test_dir, "mixed test records")->required();
    ablate->add_option("--components", components, "lattice order (default mr,mc,tar,apm)");
    ablate->add_option("--seeds", seeds, "comma-separated seeds (default 1,2,3,4,5)");
    add_common(ablate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    common.seed = seed;
    common.epochs = epochs;

    try {
        if (generate->parsed()) ecgad::cli::cmd_generate(spec_path, count, common.out_dir, seed);
        if (preprocess->parsed()) ecgad::cli::cmd_preprocess(records_dir, common);
        if (pretrain->parsed()) ecgad::cli::cmd_pretrain(train_dir, val_dir, common);
        if (finetune->parsed()) ecgad::cli::cmd_finetune(model_path, train_dir, val_dir, common, false);
        if (joint->parsed()) ecgad::cli::cmd_finetune(model_path, train_dir, val_dir, common, true);
        if (score->parsed())
            ecgad::cli::cmd_score(model_path, records_dir, common, plot, threshold, jobs);
        if (evaluate->parsed())
            ecgad::cli::cmd_evaluate(model_path, records_dir, tiers_train_dir, common);
        if (fairness->parsed()) ecgad::cli::cmd_fairness(model_path, records_dir, by, common);
        if (ablate->parsed())
            ecgad::cli::cmd_ablate(train_dir, val_dir, test_dir, components, seeds, common);
    } catch (const ecgad::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ecgad::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ecgad::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
