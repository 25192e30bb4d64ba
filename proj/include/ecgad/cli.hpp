#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecgad/config.hpp"

namespace ecgad::cli {

// Command implementations behind the CLI front end; each writes its outputs
// plus a deterministic manifest under `out`. They throw the ecgad error
// types, which the front end maps onto exit codes (2 config, 3 data,
// 4 numeric).

struct CommonArgs {
    std::string config_path;      // optional run config file
    std::optional<uint64_t> seed;  // overrides config / env
    std::optional<int> epochs;
    std::string out_dir;
};

// Resolved seed: flag > config file > CARDIO_ANOMALY_SEED env > default.
uint64_t resolve_seed(const std::optional<uint64_t>& flag, const Config& cfg,
                      uint64_t fallback = 7);

void cmd_generate(const std::string& spec_path, int count, const std::string& out_dir,
                  std::optional<uint64_t> seed, const std::string& id_prefix = "rec");

void cmd_preprocess(const std::string& records_dir, const CommonArgs& args);

void cmd_pretrain(const std::string& train_dir, const std::string& val_dir,
                  const CommonArgs& args);

void cmd_finetune(const std::string& model_path, const std::string& train_dir,
                  const std::string& val_dir, const CommonArgs& args, bool joint);

void cmd_score(const std::string& model_path, const std::string& records_dir,
               const CommonArgs& args, bool plot, std::optional<double> threshold, int jobs);

void cmd_evaluate(const std::string& model_path, const std::string& records_dir,
                  const std::string& train_dir_for_tiers, const CommonArgs& args);

void cmd_fairness(const std::string& model_path, const std::string& records_dir,
                  const std::string& by, const CommonArgs& args);

void cmd_ablate(const std::string& train_dir, const std::string& val_dir,
                const std::string& test_dir, const std::string& components,
                const std::string& seeds, const CommonArgs& args);

}  // namespace ecgad::cli
