#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hapnet/datagen.hpp"
#include "hapnet/eval.hpp"
#include "hapnet/parallel.hpp"
#include "hapnet/vec.hpp"

namespace hapnet {

struct BaselineConfig {
    double lasso_lambda = 1e-4;
    double lasso_tol = 1e-9;
    int lasso_max_iters = 2000;
    double mlp_learning_rate = 1e-3;
    int mlp_epochs = 60;
    int mlp_batch_size = 64;
    int mlp_patience = 10;
    uint64_t seed = 1;

    void validate() const; // ConfigError on out-of-range fields
};

struct LassoFit {
    Vec weights;
    double intercept = 0.0;
    int iterations = 0; // sweeps until the max parameter delta fell under tol
};

// Coordinate-descent lasso for (1/2N)*sum (y - w.x - b)^2 + lambda*|w|_1
// with an unpenalized intercept. rows index into data.records.
LassoFit lasso_fit(const Dataset& data, std::span<const size_t> rows, double lambda,
                   double tol = 1e-9, int max_iters = 2000);

struct BaselineReports {
    EvalReport linear; // per-cluster lasso, fit on the train split
    EvalReport mlp;    // shared net on [x; event multi-hot], early-stopped on valid
};

// Both baselines score the test split. Neither touches capsule machinery:
// the linear model is closed-form per cluster, the MLP owns its parameters.
BaselineReports run_baselines(const Dataset& data, const BaselineConfig& cfg = {},
                              ExecMode mode = ExecMode::serial, std::ostream* log_stream = nullptr);

} // namespace hapnet
