#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hapnet/datagen.hpp"
#include "hapnet/eval.hpp"
#include "hapnet/model.hpp"
#include "hapnet/parallel.hpp"

namespace hapnet {

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 64;
    std::string optimizer = "adam"; // or "sgd"
    uint64_t seed = 1;
    AblationMode ablation = AblationMode::full;
    int patience = 10; // epochs without validation improvement before stopping

    void validate() const; // ConfigError on out-of-range fields
};

struct EpochLog {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double valid_mape = 0.0;
};

// Result of one training run; model carries the best-validation parameters.
struct TrainRun {
    Model model;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_valid_mape = 0.0;
    int epochs_run = 0;
};

// Trains a fresh model (seeded by model_cfg.seed, ablation from train_cfg)
// on the train split with early stopping against the valid split. Batches
// are cluster-homogeneous and reshuffled every epoch. Emits one log line
// per epoch to log_stream when given. TrainError on non-finite loss.
TrainRun train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
               ExecMode mode = ExecMode::serial, std::ostream* log_stream = nullptr);

struct AblationRun {
    AblationMode ablation = AblationMode::full;
    uint64_t seed = 0;
    double test_mape = 0.0;
    double best_valid_mape = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    std::string checkpoint_path;
};

struct AblationModeSummary {
    double mean_test_mape = 0.0;
    // dispersion between seeds (sample stddev across runs); this is a
    // different animal from the per-record stderr inside an EvalReport
    double seed_spread = 0.0;
};

struct AblationSummary {
    std::vector<AblationRun> runs;
    std::map<AblationMode, AblationModeSummary> by_mode;
};

// Trains {full, no-paaa, no-recon} x seeds, checkpoints each run under
// out_dir, evaluates on the test split, and writes out_dir/summary.json.
AblationSummary ablation_suite(const Dataset& data, const ModelConfig& model_cfg,
                               const TrainConfig& train_cfg, std::span<const uint64_t> seeds,
                               const std::string& out_dir, ExecMode mode = ExecMode::serial,
                               std::ostream* log_stream = nullptr);

} // namespace hapnet
