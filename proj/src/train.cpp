#include "hapnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "hapnet/errors.hpp"
#include "hapnet/rng.hpp"
#include "hapnet/tape.hpp"

namespace hapnet {

void TrainConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate < 0.0)
        throw ConfigError("learning_rate must be finite and non-negative");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("optimizer must be 'adam' or 'sgd', got '" + optimizer + "'");
    if (patience < 1) throw ConfigError("patience must be at least 1");
}

namespace {

std::string cluster_key(const EventCluster& cluster) {
    std::string out;
    const std::vector<int> ids = cluster.sorted_ids();
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) out += '+';
        out += std::to_string(ids[i]);
    }
    return out;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.bounded(i));
        std::swap(v[i - 1], v[j]);
    }
}

// Cluster-homogeneous batches: every batch's records share one event
// cluster, so the tape rebuilds the same graph shape within a batch.
std::vector<std::vector<size_t>> make_batches(
    const std::map<std::string, std::vector<size_t>>& groups, int batch_size, Rng epoch_rng) {
    std::vector<std::vector<size_t>> batches;
    int gi = 0;
    for (const auto& [key, members] : groups) {
        std::vector<size_t> order = members;
        shuffle_in_place(order, epoch_rng.derive(7, static_cast<uint64_t>(gi++)));
        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(batch_size)) {
            const size_t end = std::min(order.size(), at + static_cast<size_t>(batch_size));
            batches.emplace_back(order.begin() + static_cast<long>(at),
                                 order.begin() + static_cast<long>(end));
        }
    }
    shuffle_in_place(batches, epoch_rng.derive(8));
    return batches;
}

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;
};

void apply_update(std::vector<double>& theta, const std::vector<double>& grad,
                  const TrainConfig& cfg, AdamState& adam) {
    const double lr = cfg.learning_rate;
    if (cfg.optimizer == "sgd") {
        for (size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * grad[k];
        return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    adam.t += 1;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
    for (size_t k = 0; k < theta.size(); ++k) {
        adam.m[k] = b1 * adam.m[k] + (1.0 - b1) * grad[k];
        adam.v[k] = b2 * adam.v[k] + (1.0 - b2) * grad[k] * grad[k];
        const double mhat = adam.m[k] / c1;
        const double vhat = adam.v[k] / c2;
        theta[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

TrainRun train(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
               ExecMode mode, std::ostream* log_stream) {
    model_cfg.validate();
    train_cfg.validate();
    if (data.meta.d != model_cfg.d)
        throw ConfigError("model expects d=" + std::to_string(model_cfg.d) +
                          " but dataset has d=" + std::to_string(data.meta.d));
    if (data.meta.n_e != model_cfg.n_e)
        throw ConfigError("model expects n_e=" + std::to_string(model_cfg.n_e) +
                          " but dataset has n_e=" + std::to_string(data.meta.n_e));

    const std::vector<size_t> train_idx = split_indices(data, Split::train);
    const std::vector<size_t> valid_idx = split_indices(data, Split::valid);
    if (train_idx.empty()) throw ContractError("train: split 'train' has no records");
    if (valid_idx.empty()) throw ContractError("train: split 'valid' has no records");

    TrainRun out{Model(model_cfg, train_cfg.ablation), {}, 0,
                 std::numeric_limits<double>::infinity(), 0};
    Model& live = out.model;
    std::vector<double>& theta = live.params().raw();
    const size_t n_params = theta.size();

    // Warm-start the head's output bias at the train-target mean so early
    // epochs fight the residual structure instead of the offset. Skipped at
    // learning_rate zero, which is a pure no-op run by contract.
    if (train_cfg.learning_rate > 0.0) {
        double mean_y = 0.0;
        for (size_t r : train_idx) mean_y += data.records[r].y;
        mean_y /= static_cast<double>(train_idx.size());
        live.params().values(live.layout().head_b1)[0] = mean_y;
    }

    std::map<std::string, std::vector<size_t>> groups;
    for (size_t r : train_idx) groups[cluster_key(data.records[r].cluster)].push_back(r);

    // one tape and gradient buffer per chunk slot; chunk results are folded
    // in chunk-index order so thread count never changes the arithmetic
    const int max_chunks = chunk_count(train_cfg.batch_size);
    std::vector<std::vector<double>> chunk_grad(static_cast<size_t>(max_chunks));
    std::vector<Tape> tapes(static_cast<size_t>(max_chunks));
    for (int c = 0; c < max_chunks; ++c) {
        chunk_grad[static_cast<size_t>(c)].assign(n_params, 0.0);
        tapes[static_cast<size_t>(c)].bind(&live.params(), chunk_grad[static_cast<size_t>(c)].data());
    }
    std::vector<double> chunk_loss(static_cast<size_t>(max_chunks), 0.0);
    std::vector<double> grad(n_params, 0.0);

    AdamState adam;
    if (train_cfg.optimizer == "adam") {
        adam.m.assign(n_params, 0.0);
        adam.v.assign(n_params, 0.0);
    }

    Rng root(train_cfg.seed);
    std::vector<double> best_theta = theta;
    int stale = 0;

    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        const std::vector<std::vector<size_t>> batches =
            make_batches(groups, train_cfg.batch_size, root.derive(6, static_cast<uint64_t>(epoch)));

        double epoch_loss_sum = 0.0;
        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const std::vector<size_t>& batch = batches[bi];
            const int64_t bn = static_cast<int64_t>(batch.size());
            const int nch = chunk_count(bn);
            const double inv_bn = 1.0 / static_cast<double>(bn);

            for (int c = 0; c < nch; ++c) {
                std::fill(chunk_grad[static_cast<size_t>(c)].begin(),
                          chunk_grad[static_cast<size_t>(c)].end(), 0.0);
                chunk_loss[static_cast<size_t>(c)] = 0.0;
            }
            for_chunks(bn, mode, [&](int ci, int64_t b, int64_t e) {
                Tape& tp = tapes[static_cast<size_t>(ci)];
                double local = 0.0;
                for (int64_t i = b; i < e; ++i) {
                    const SubjectRecord& rec = data.records[batch[static_cast<size_t>(i)]];
                    tp.reset();
                    const Var loss = live.record_loss_t(tp, rec.x.span(), rec.cluster, rec.y);
                    local += tp.scalar(loss);
                    tp.backward(loss, inv_bn);
                }
                chunk_loss[static_cast<size_t>(ci)] = local * inv_bn;
            });

            double batch_loss = 0.0;
            for (int c = 0; c < nch; ++c) batch_loss += chunk_loss[static_cast<size_t>(c)];
            if (!std::isfinite(batch_loss))
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(bi + 1) + " of " + std::to_string(batches.size()) +
                                 " (loss=" + std::to_string(batch_loss) + "); aborting");
            epoch_loss_sum += batch_loss * static_cast<double>(bn);

            std::fill(grad.begin(), grad.end(), 0.0);
            for (int c = 0; c < nch; ++c) {
                const std::vector<double>& g = chunk_grad[static_cast<size_t>(c)];
                for (size_t k = 0; k < n_params; ++k) grad[k] += g[k];
            }
            apply_update(theta, grad, train_cfg, adam);
        }

        const double train_loss = epoch_loss_sum / static_cast<double>(train_idx.size());
        const double valid_mape = evaluate(live, data, Split::valid, mode).mape_mean;
        if (!std::isfinite(valid_mape))
            throw TrainError("non-finite validation MAPE at epoch " + std::to_string(epoch) +
                             "; aborting");

        out.log.push_back({epoch, train_loss, valid_mape});
        out.epochs_run = epoch;
        if (log_stream) {
            char line[128];
            std::snprintf(line, sizeof(line), "epoch=%d train_loss=%.12g valid_mape=%.12g\n", epoch,
                          train_loss, valid_mape);
            *log_stream << line << std::flush;
        }

        if (valid_mape < out.best_valid_mape) {
            out.best_valid_mape = valid_mape;
            out.best_epoch = epoch;
            best_theta = theta;
            stale = 0;
        } else {
            stale += 1;
            if (stale >= train_cfg.patience) break;
        }
    }

    theta = best_theta; // hand back the best-validation parameters
    return out;
}

AblationSummary ablation_suite(const Dataset& data, const ModelConfig& model_cfg,
                               const TrainConfig& train_cfg, std::span<const uint64_t> seeds,
                               const std::string& out_dir, ExecMode mode,
                               std::ostream* log_stream) {
    if (seeds.empty()) throw ContractError("ablation_suite: no seeds given");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create ablation directory " + out_dir + ": " + ec.message());

    constexpr AblationMode kModes[] = {AblationMode::full, AblationMode::no_paaa,
                                       AblationMode::no_recon};
    AblationSummary summary;
    for (AblationMode ab : kModes) {
        for (uint64_t seed : seeds) {
            ModelConfig mc = model_cfg;
            mc.seed = seed;
            TrainConfig tc = train_cfg;
            tc.ablation = ab;
            tc.seed = seed;
            TrainRun run = train(data, mc, tc, mode, nullptr);

            const std::string ckpt =
                out_dir + "/ckpt-" + to_string(ab) + "-seed" + std::to_string(seed) + ".json";
            save_checkpoint(run.model, ckpt);
            const double test_mape = evaluate(run.model, data, Split::test, mode).mape_mean;

            summary.runs.push_back({ab, seed, test_mape, run.best_valid_mape, run.best_epoch,
                                    run.epochs_run, ckpt});
            if (log_stream) {
                char line[192];
                std::snprintf(line, sizeof(line),
                              "[ablate] ablation=%s seed=%llu test_mape=%.6g best_epoch=%d "
                              "epochs_run=%d\n",
                              to_string(ab).c_str(), static_cast<unsigned long long>(seed),
                              test_mape, run.best_epoch, run.epochs_run);
                *log_stream << line << std::flush;
            }
        }
    }

    for (AblationMode ab : kModes) {
        std::vector<double> mapes;
        for (const AblationRun& r : summary.runs)
            if (r.ablation == ab) mapes.push_back(r.test_mape);
        AblationModeSummary ms;
        for (double m : mapes) ms.mean_test_mape += m;
        ms.mean_test_mape /= static_cast<double>(mapes.size());
        if (mapes.size() > 1) {
            double ss = 0.0;
            for (double m : mapes) ss += (m - ms.mean_test_mape) * (m - ms.mean_test_mape);
            ms.seed_spread = std::sqrt(ss / static_cast<double>(mapes.size() - 1));
        }
        summary.by_mode[ab] = ms;
        if (log_stream) {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "[ablate] ablation=%s mean_test_mape=%.6g seed_spread=%.6g\n",
                          to_string(ab).c_str(), ms.mean_test_mape, ms.seed_spread);
            *log_stream << line << std::flush;
        }
    }

    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "hapnet-ablation";
    nlohmann::json seeds_json = nlohmann::json::array();
    for (uint64_t s : seeds) seeds_json.push_back(s);
    j["seeds"] = std::move(seeds_json);
    nlohmann::json runs = nlohmann::json::array();
    for (const AblationRun& r : summary.runs) {
        runs.push_back({{"ablation", to_string(r.ablation)},
                        {"seed", r.seed},
                        {"test_mape", r.test_mape},
                        {"best_valid_mape", r.best_valid_mape},
                        {"best_epoch", r.best_epoch},
                        {"epochs_run", r.epochs_run},
                        {"checkpoint", r.checkpoint_path}});
    }
    j["runs"] = std::move(runs);
    nlohmann::json by_mode = nlohmann::json::object();
    for (const auto& [ab, ms] : summary.by_mode)
        by_mode[to_string(ab)] = {{"mean_test_mape", ms.mean_test_mape},
                                  {"seed_spread", ms.seed_spread}};
    j["by_mode"] = std::move(by_mode);

    const std::string summary_path = out_dir + "/summary.json";
    std::ofstream out(summary_path);
    if (!out) throw IoError("cannot write " + summary_path);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing " + summary_path);
    return summary;
}

} // namespace hapnet
