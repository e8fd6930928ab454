#include "hapnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "hapnet/errors.hpp"
#include "hapnet/param_store.hpp"
#include "hapnet/rng.hpp"
#include "hapnet/tape.hpp"

namespace hapnet {

void BaselineConfig::validate() const {
    if (!std::isfinite(lasso_lambda) || lasso_lambda < 0.0)
        throw ConfigError("lasso_lambda must be finite and non-negative");
    if (!std::isfinite(lasso_tol) || lasso_tol <= 0.0)
        throw ConfigError("lasso_tol must be finite and positive");
    if (lasso_max_iters < 1) throw ConfigError("lasso_max_iters must be at least 1");
    if (!std::isfinite(mlp_learning_rate) || mlp_learning_rate < 0.0)
        throw ConfigError("mlp_learning_rate must be finite and non-negative");
    if (mlp_epochs < 1) throw ConfigError("mlp_epochs must be at least 1");
    if (mlp_batch_size < 1) throw ConfigError("mlp_batch_size must be at least 1");
    if (mlp_patience < 1) throw ConfigError("mlp_patience must be at least 1");
}

LassoFit lasso_fit(const Dataset& data, std::span<const size_t> rows, double lambda, double tol,
                   int max_iters) {
    if (rows.empty()) throw ContractError("lasso_fit: no rows");
    const int d = data.meta.d;
    const double n = static_cast<double>(rows.size());

    // per-coordinate second moments, fixed across sweeps
    std::vector<double> z(static_cast<size_t>(d), 0.0);
    for (size_t r : rows) {
        const Vec& x = data.records[r].x;
        for (int j = 0; j < d; ++j) z[static_cast<size_t>(j)] += x[j] * x[j];
    }
    for (double& zj : z) zj /= n;

    std::vector<double> w(static_cast<size_t>(d), 0.0);
    double b = 0.0;
    std::vector<double> resid(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) resid[i] = data.records[rows[i]].y;

    const auto soft = [](double v, double t) {
        if (v > t) return v - t;
        if (v < -t) return v + t;
        return 0.0;
    };

    int sweeps = 0;
    for (; sweeps < max_iters; ++sweeps) {
        double max_delta = 0.0;

        double mean_resid = 0.0;
        for (double r : resid) mean_resid += r;
        mean_resid /= n;
        if (mean_resid != 0.0) {
            b += mean_resid;
            for (double& r : resid) r -= mean_resid;
            max_delta = std::abs(mean_resid);
        }

        for (int j = 0; j < d; ++j) {
            const double zj = z[static_cast<size_t>(j)];
            if (zj == 0.0) continue;
            double rho = zj * w[static_cast<size_t>(j)];
            for (size_t i = 0; i < rows.size(); ++i)
                rho += data.records[rows[i]].x[j] * resid[i] / n;
            const double w_new = soft(rho, lambda) / zj;
            const double delta = w_new - w[static_cast<size_t>(j)];
            if (delta != 0.0) {
                for (size_t i = 0; i < rows.size(); ++i)
                    resid[i] -= delta * data.records[rows[i]].x[j];
                w[static_cast<size_t>(j)] = w_new;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < tol) {
            ++sweeps;
            break;
        }
    }
    return {Vec(std::move(w)), b, sweeps};
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

void shuffle_indices(std::vector<size_t>& v, Rng rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.bounded(i));
        std::swap(v[i - 1], v[j]);
    }
}

EvalReport linear_baseline(const Dataset& data, const std::vector<size_t>& train_idx,
                           const std::vector<size_t>& test_idx, const BaselineConfig& cfg) {
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t r : train_idx) groups[cluster_key(data.records[r].cluster)].push_back(r);

    std::map<std::string, LassoFit> fits;
    for (const auto& [key, rows] : groups)
        fits.emplace(key, lasso_fit(data, rows, cfg.lasso_lambda, cfg.lasso_tol,
                                    cfg.lasso_max_iters));

    std::vector<double> yhat(test_idx.size());
    for (size_t i = 0; i < test_idx.size(); ++i) {
        const SubjectRecord& rec = data.records[test_idx[i]];
        const auto it = fits.find(cluster_key(rec.cluster));
        if (it == fits.end())
            throw LookupError("linear baseline: cluster '" + cluster_key(rec.cluster) +
                              "' appears in test but not in train");
        yhat[i] = it->second.weights.dot(rec.x) + it->second.intercept;
    }
    return make_report(data, Split::test, test_idx, yhat);
}

// MLP over [x; event multi-hot]: affine-ELU 64, affine-ELU 32, affine 1
struct MlpNet {
    ParamStore ps;
    ParamRef W0, b0, W1, b1, W2, b2;
    int d = 0, n_e = 0;

    MlpNet(int d_, int n_e_, uint64_t seed) : d(d_), n_e(n_e_) {
        const int in = d + n_e;
        W0 = ps.add_matrix("mlp.W.0", 64, in);
        b0 = ps.add_vector("mlp.b.0", 64);
        W1 = ps.add_matrix("mlp.W.1", 32, 64);
        b1 = ps.add_vector("mlp.b.1", 32);
        W2 = ps.add_matrix("mlp.W.2", 1, 32);
        b2 = ps.add_vector("mlp.b.2", 1);
        ps.init_uniform(Rng(seed), -0.1, 0.1);
    }

    void encode(const SubjectRecord& rec, std::vector<double>& buf) const {
        buf.assign(static_cast<size_t>(d + n_e), 0.0);
        for (int j = 0; j < d; ++j) buf[static_cast<size_t>(j)] = rec.x[j];
        for (int e : rec.cluster.ids()) buf[static_cast<size_t>(d + e - 1)] = 1.0;
    }

    Var forward_t(Tape& t, std::span<const double> in) const {
        const Var x = t.input(in);
        const Var h0 = t.elu(t.add_param(t.matvec(W0, x), b0));
        const Var h1 = t.elu(t.add_param(t.matvec(W1, h0), b1));
        return t.add_param(t.matvec(W2, h1), b2);
    }

    double predict(const SubjectRecord& rec, Tape& t, std::vector<double>& buf) const {
        encode(rec, buf);
        t.reset();
        return t.value(forward_t(t, buf))[0];
    }
};

EvalReport mlp_baseline(const Dataset& data, const std::vector<size_t>& train_idx,
                        const std::vector<size_t>& valid_idx, const std::vector<size_t>& test_idx,
                        const BaselineConfig& cfg, ExecMode mode, std::ostream* log_stream) {
    MlpNet net(data.meta.d, data.meta.n_e, cfg.seed);
    std::vector<double>& theta = net.ps.raw();
    const size_t n_params = theta.size();

    if (cfg.mlp_learning_rate > 0.0) {
        double mean_y = 0.0;
        for (size_t r : train_idx) mean_y += data.records[r].y;
        net.ps.values(net.b2)[0] = mean_y / static_cast<double>(train_idx.size());
    }

    const int max_chunks = chunk_count(cfg.mlp_batch_size);
    std::vector<std::vector<double>> chunk_grad(static_cast<size_t>(max_chunks));
    std::vector<Tape> tapes(static_cast<size_t>(max_chunks));
    std::vector<std::vector<double>> inbuf(static_cast<size_t>(max_chunks));
    for (int c = 0; c < max_chunks; ++c) {
        chunk_grad[static_cast<size_t>(c)].assign(n_params, 0.0);
        tapes[static_cast<size_t>(c)].bind(&net.ps, chunk_grad[static_cast<size_t>(c)].data());
    }
    std::vector<double> grad(n_params, 0.0);
    std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
    int64_t adam_t = 0;
    constexpr double b1c = 0.9, b2c = 0.999, eps = 1e-8;

    // split-sized loops bring their own scratch: the shared workspace above
    // only has one slot per batch chunk, and splits span far more chunks
    const auto predict_split = [&](const std::vector<size_t>& idx) {
        std::vector<double> yhat(idx.size());
        for_chunks(static_cast<int64_t>(idx.size()), mode, [&](int, int64_t b, int64_t e) {
            Tape tp(&net.ps, nullptr); // forward passes only, no gradients
            std::vector<double> buf;
            for (int64_t i = b; i < e; ++i)
                yhat[static_cast<size_t>(i)] =
                    net.predict(data.records[idx[static_cast<size_t>(i)]], tp, buf);
        });
        return yhat;
    };

    Rng root(cfg.seed);
    double best_mape = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta = theta;
    int best_epoch = 0, stale = 0;

    std::vector<size_t> order = train_idx;
    for (int epoch = 1; epoch <= cfg.mlp_epochs; ++epoch) {
        shuffle_indices(order, root.derive(9, static_cast<uint64_t>(epoch)));

        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.mlp_batch_size)) {
            const size_t end = std::min(order.size(), at + static_cast<size_t>(cfg.mlp_batch_size));
            const int64_t bn = static_cast<int64_t>(end - at);
            const int nch = chunk_count(bn);
            const double inv_bn = 1.0 / static_cast<double>(bn);
            for (int c = 0; c < nch; ++c)
                std::fill(chunk_grad[static_cast<size_t>(c)].begin(),
                          chunk_grad[static_cast<size_t>(c)].end(), 0.0);

            for_chunks(bn, mode, [&](int ci, int64_t b, int64_t e) {
                Tape& tp = tapes[static_cast<size_t>(ci)];
                std::vector<double>& buf = inbuf[static_cast<size_t>(ci)];
                for (int64_t i = b; i < e; ++i) {
                    const SubjectRecord& rec = data.records[order[at + static_cast<size_t>(i)]];
                    net.encode(rec, buf);
                    tp.reset();
                    const Var yhat = net.forward_t(tp, buf);
                    const Var err = tp.sub(yhat, tp.input_scalar(rec.y));
                    const Var loss = tp.mul(err, err);
                    tp.backward(loss, inv_bn);
                }
            });

            std::fill(grad.begin(), grad.end(), 0.0);
            for (int c = 0; c < nch; ++c) {
                const std::vector<double>& g = chunk_grad[static_cast<size_t>(c)];
                for (size_t k = 0; k < n_params; ++k) grad[k] += g[k];
            }
            adam_t += 1;
            const double c1 = 1.0 - std::pow(b1c, static_cast<double>(adam_t));
            const double c2 = 1.0 - std::pow(b2c, static_cast<double>(adam_t));
            for (size_t k = 0; k < n_params; ++k) {
                adam_m[k] = b1c * adam_m[k] + (1.0 - b1c) * grad[k];
                adam_v[k] = b2c * adam_v[k] + (1.0 - b2c) * grad[k] * grad[k];
                theta[k] -= cfg.mlp_learning_rate * (adam_m[k] / c1) /
                            (std::sqrt(adam_v[k] / c2) + eps);
            }
        }

        const double valid_mape =
            make_report(data, Split::valid, valid_idx, predict_split(valid_idx)).mape_mean;
        if (!std::isfinite(valid_mape))
            throw TrainError("mlp baseline: non-finite validation MAPE at epoch " +
                             std::to_string(epoch));
        if (valid_mape < best_mape) {
            best_mape = valid_mape;
            best_epoch = epoch;
            best_theta = theta;
            stale = 0;
        } else if (++stale >= cfg.mlp_patience) {
            break;
        }
    }
    theta = best_theta;

    if (log_stream) {
        char line[128];
        std::snprintf(line, sizeof(line), "[baseline] mlp best_epoch=%d valid_mape=%.6g\n",
                      best_epoch, best_mape);
        *log_stream << line << std::flush;
    }
    return make_report(data, Split::test, test_idx, predict_split(test_idx));
}

} // namespace

BaselineReports run_baselines(const Dataset& data, const BaselineConfig& cfg, ExecMode mode,
                              std::ostream* log_stream) {
    cfg.validate();
    const std::vector<size_t> train_idx = split_indices(data, Split::train);
    const std::vector<size_t> valid_idx = split_indices(data, Split::valid);
    const std::vector<size_t> test_idx = split_indices(data, Split::test);
    if (train_idx.empty()) throw ContractError("run_baselines: split 'train' has no records");
    if (valid_idx.empty()) throw ContractError("run_baselines: split 'valid' has no records");
    if (test_idx.empty()) throw ContractError("run_baselines: split 'test' has no records");

    BaselineReports out{linear_baseline(data, train_idx, test_idx, cfg),
                        mlp_baseline(data, train_idx, valid_idx, test_idx, cfg, mode, log_stream)};
    if (log_stream) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "[baseline] linear test_mape=%.6g\n[baseline] mlp test_mape=%.6g\n",
                      out.linear.mape_mean, out.mlp.mape_mean);
        *log_stream << line << std::flush;
    }
    return out;
}

} // namespace hapnet
