#include "hapnet/model.hpp"

#include <cmath>

#include "hapnet/errors.hpp"
#include "hapnet/kernels.hpp"

namespace hapnet {

void ModelConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v < 1) throw ConfigError(std::string("config: ") + what + " must be >= 1");
    };
    positive(d, "d");
    positive(n_e, "n_e");
    positive(n_u, "n_u");
    positive(n_s, "n_s");
    positive(n_v, "n_v");
    positive(n_z, "n_z");
    positive(h, "h");
    positive(routing_iters, "routing_iters");
    positive(heads, "heads");
    positive(head_hidden, "head_hidden");
    positive(decoder_hidden, "decoder_hidden");
    if (n_v != n_s)
        throw ConfigError("config: n_v must equal n_s (cluster capsules inherit event positions)");
    if (!std::isfinite(beta) || beta < 0.0) throw ConfigError("config: beta must be finite and >= 0");
}

std::string to_string(AblationMode mode) {
    switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::no_paaa: return "no-paaa";
    case AblationMode::no_recon: return "no-recon";
    }
    return "?";
}

AblationMode ablation_from_string(const std::string& s) {
    if (s == "full") return AblationMode::full;
    if (s == "no-paaa" || s == "no_paaa") return AblationMode::no_paaa;
    if (s == "no-recon" || s == "no_recon") return AblationMode::no_recon;
    throw ConfigError("unknown ablation mode '" + s + "' (expected full, no-paaa or no-recon)");
}

Model::Model(ModelConfig config, AblationMode mode) : config_(config), mode_(mode) {
    config_.validate();
    layout_.feature = make_feature_params(store_, config_.n_u, config_.d, config_.h);
    for (int e = 1; e <= config_.n_e; ++e)
        layout_.events.push_back(make_event_params(store_, e, config_.n_u, config_.n_s, config_.h));
    layout_.attention = make_attention_params(store_, config_.heads, config_.h);
    layout_.outcome = make_outcome_params(store_, config_.n_v, config_.n_z, config_.h);

    int zlen = config_.zbar_len();
    layout_.head_W0 = store_.add_matrix("head.W.0", config_.head_hidden, zlen);
    layout_.head_b0 = store_.add_vector("head.b.0", config_.head_hidden);
    layout_.head_W1 = store_.add_matrix("head.W.1", 1, config_.head_hidden);
    layout_.head_b1 = store_.add_vector("head.b.1", 1);
    layout_.dec_W0 = store_.add_matrix("decoder.W.0", config_.decoder_hidden, zlen);
    layout_.dec_b0 = store_.add_vector("decoder.b.0", config_.decoder_hidden);
    layout_.dec_W1 = store_.add_matrix("decoder.W.1", config_.d, config_.decoder_hidden);
    layout_.dec_b1 = store_.add_vector("decoder.b.1", config_.d);

    init_params();
}

// Fan-in scaled uniform ranges. The capsule trunk squashes at every level,
// and squash is quadratic near the origin: transforms initialized too small
// collapse the signal to ~0 by the outcome layer, leaving the head a
// constant predictor with gradients under Adam's epsilon. The routing gain
// keeps pre-squash norms near 1 so every level stays responsive.
void Model::init_params() {
    Rng rng(config_.seed);
    const auto fill = [&](const ParamRef& ref, double r) {
        for (double& v : store_.values(ref)) v = rng.uniform(-r, r);
    };
    const auto zero = [&](const ParamRef& ref) {
        for (double& v : store_.values(ref)) v = 0.0;
    };
    const auto xavier = [](int fan_in, int fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    };

    const double r_feature = std::sqrt(3.0 / config_.d);
    const double r_route = 2.2 * std::sqrt(3.0 / config_.h);
    const double r_att_w = std::sqrt(3.0 / config_.h);
    const double r_att_a = std::sqrt(3.0 / (2.0 * config_.h));

    for (int i = 0; i < config_.n_u; ++i) {
        fill(layout_.feature.W[static_cast<size_t>(i)], r_feature);
        zero(layout_.feature.b[static_cast<size_t>(i)]);
    }
    for (const RoutingParams& bank : layout_.events)
        for (const auto& row : bank.W)
            for (const ParamRef& ref : row) fill(ref, r_route);
    for (const AttentionHead& head : layout_.attention.heads) {
        fill(head.W, r_att_w);
        fill(head.a, r_att_a);
    }
    for (const auto& row : layout_.outcome.W)
        for (const ParamRef& ref : row) fill(ref, r_route);

    const int zlen = config_.zbar_len();
    fill(layout_.head_W0, xavier(zlen, config_.head_hidden));
    zero(layout_.head_b0);
    fill(layout_.head_W1, xavier(config_.head_hidden, 1));
    zero(layout_.head_b1);
    fill(layout_.dec_W0, xavier(zlen, config_.decoder_hidden));
    zero(layout_.dec_b0);
    fill(layout_.dec_W1, xavier(config_.decoder_hidden, config_.d));
    zero(layout_.dec_b1);
}

Model::ForwardVars Model::forward_t(Tape& t, std::span<const double> x,
                                    const EventCluster& cluster) const {
    if (static_cast<int>(x.size()) != config_.d) throw ShapeError("forward: feature length != d");
    for (int e : cluster.ids())
        if (e > config_.n_e)
            throw ContractError("forward: cluster references unknown event " + std::to_string(e));

    Var xv = t.input(x);
    PoseVars U = disentangle_features_t(t, xv, layout_.feature);

    std::vector<PoseVars> sets;
    sets.reserve(cluster.ids().size());
    for (int e : cluster.ids())
        sets.push_back(event_capsules_t(t, U, e, layout_.events, config_.routing_iters));

    PoseVars V = build_cluster_capsules_t(t, sets, cluster, layout_.attention,
                                          mode_ != AblationMode::no_paaa);
    PoseVars Z = outcome_capsules_t(t, V, layout_.outcome, config_.routing_iters);

    Var zbar = t.concat(Z.capsules);
    Var hidden = t.elu(t.add_param(t.matvec(layout_.head_W0, zbar), layout_.head_b0));
    Var yhat = t.add_param(t.matvec(layout_.head_W1, hidden), layout_.head_b1);
    return {yhat, zbar, xv};
}

Var Model::reconstruct_t(Tape& t, Var zbar) const {
    if (t.dim(zbar) != config_.zbar_len()) throw ShapeError("reconstruct: input length != n_z*h");
    Var hidden = t.elu(t.add_param(t.matvec(layout_.dec_W0, zbar), layout_.dec_b0));
    return t.add_param(t.matvec(layout_.dec_W1, hidden), layout_.dec_b1);
}

Var Model::record_loss_t(Tape& t, std::span<const double> x, const EventCluster& cluster,
                         double y) const {
    ForwardVars f = forward_t(t, x, cluster);
    Var err = t.sub(f.yhat, t.input_scalar(y));
    Var loss = t.mul(err, err);
    if (reconstruction_active()) {
        Var xhat = reconstruct_t(t, f.zbar);
        loss = t.sub(loss, t.scale(t.cosine(xhat, f.x), config_.beta));
    }
    return loss;
}

Model::Prediction Model::predict(const Vec& x, const EventCluster& cluster) const {
    Tape t(&store_, nullptr);
    ForwardVars f = forward_t(t, x.span(), cluster);
    return {t.scalar(f.yhat), Vec::from_span(t.value(f.zbar))};
}

Vec Model::reconstruct(const Vec& zbar) const {
    Tape t(&store_, nullptr);
    return Vec::from_span(t.value(reconstruct_t(t, t.input(zbar.span()))));
}

double loss_total(std::span<const LossSample> batch, double beta) {
    if (batch.empty()) throw ContractError("loss: empty batch");
    double mse = 0.0;
    double sim = 0.0;
    for (const LossSample& s : batch) {
        double e = s.yhat - s.y;
        mse += e * e;
        if (beta != 0.0) {
            if (s.xhat.size() != s.x.size()) throw ShapeError("loss: xhat/x length mismatch");
            sim += kernels::cosine(s.xhat.data(), s.x.data(), s.x.size());
        }
    }
    double n = static_cast<double>(batch.size());
    return mse / n - beta * (sim / n);
}

} // namespace hapnet
