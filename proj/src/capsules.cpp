#include "hapnet/capsules.hpp"

#include "hapnet/errors.hpp"

namespace hapnet {

std::string to_string(CapsuleLevel level) {
    switch (level) {
    case CapsuleLevel::feature: return "feature";
    case CapsuleLevel::event: return "event";
    case CapsuleLevel::cluster: return "cluster";
    case CapsuleLevel::outcome: return "outcome";
    }
    return "?";
}

PoseMatrix make_pose(CapsuleLevel level, std::vector<Vec> capsules) {
    for (const Vec& c : capsules)
        if (c.size() != capsules.front().size())
            throw ShapeError("pose matrix: capsules must share one dimension");
    return PoseMatrix{level, std::move(capsules)};
}

FeatureLayerParams make_feature_params(ParamStore& ps, int n_u, int d, int h) {
    FeatureLayerParams p;
    for (int i = 0; i < n_u; ++i) {
        p.W.push_back(ps.add_matrix("feat.W." + std::to_string(i), h, d));
        p.b.push_back(ps.add_vector("feat.b." + std::to_string(i), h));
    }
    return p;
}

static RoutingParams make_routing(ParamStore& ps, const std::string& prefix, int n_in, int n_out, int h) {
    RoutingParams p;
    p.W.resize(static_cast<size_t>(n_in));
    for (int i = 0; i < n_in; ++i)
        for (int j = 0; j < n_out; ++j)
            p.W[static_cast<size_t>(i)].push_back(
                ps.add_matrix(prefix + std::to_string(i) + "." + std::to_string(j), h, h));
    return p;
}

RoutingParams make_event_params(ParamStore& ps, int event_id, int n_in, int n_out, int h) {
    return make_routing(ps, "event." + std::to_string(event_id) + ".W.", n_in, n_out, h);
}

RoutingParams make_outcome_params(ParamStore& ps, int n_in, int n_out, int h) {
    return make_routing(ps, "outcome.W.", n_in, n_out, h);
}

PoseVars disentangle_features_t(Tape& t, Var x, const FeatureLayerParams& params) {
    if (params.count() == 0 || params.W.size() != params.b.size())
        throw ShapeError("feature layer: needs matching W/b lists");
    PoseVars out;
    out.level = CapsuleLevel::feature;
    for (int i = 0; i < params.count(); ++i) {
        Var pre = t.add_param(t.tanh_(t.matvec(params.W[static_cast<size_t>(i)], x)),
                              params.b[static_cast<size_t>(i)]);
        out.capsules.push_back(t.squash(pre));
    }
    return out;
}

RoutingBuild dynamic_routing_t(Tape& t, const PoseVars& in, const RoutingParams& params,
                               int iterations, CapsuleLevel out_level) {
    if (iterations < 1) throw ContractError("routing: needs at least one iteration");
    int n_in = params.n_in();
    int n_out = params.n_out();
    if (in.size() != n_in) throw ShapeError("routing: input capsule count mismatch");
    if (n_in == 0 || n_out == 0) throw ShapeError("routing: empty transform bank");

    // prediction vectors, computed once
    std::vector<std::vector<Var>> uhat(static_cast<size_t>(n_in));
    for (int i = 0; i < n_in; ++i)
        for (int j = 0; j < n_out; ++j)
            uhat[static_cast<size_t>(i)].push_back(
                t.matvec(params.W[static_cast<size_t>(i)][static_cast<size_t>(j)],
                         in.capsules[static_cast<size_t>(i)]));

    // logits start at zero for every subject
    std::vector<double> zero(static_cast<size_t>(n_out), 0.0);
    std::vector<Var> b(static_cast<size_t>(n_in));
    for (int i = 0; i < n_in; ++i) b[static_cast<size_t>(i)] = t.input(zero);

    std::vector<Var> c(static_cast<size_t>(n_in));
    std::vector<Var> s(static_cast<size_t>(n_out));
    std::vector<Var> coeffs(static_cast<size_t>(n_in));
    std::vector<Var> vecs(static_cast<size_t>(n_in));
    std::vector<Var> agree(static_cast<size_t>(n_out));
    for (int pass = 0; pass < iterations; ++pass) {
        for (int i = 0; i < n_in; ++i) c[static_cast<size_t>(i)] = t.softmax(b[static_cast<size_t>(i)]);
        for (int j = 0; j < n_out; ++j) {
            for (int i = 0; i < n_in; ++i) {
                coeffs[static_cast<size_t>(i)] = t.pick(c[static_cast<size_t>(i)], j);
                vecs[static_cast<size_t>(i)] = uhat[static_cast<size_t>(i)][static_cast<size_t>(j)];
            }
            s[static_cast<size_t>(j)] = t.squash(t.weighted_sum(coeffs, vecs));
        }
        for (int i = 0; i < n_in; ++i) {
            for (int j = 0; j < n_out; ++j)
                agree[static_cast<size_t>(j)] = t.dot(uhat[static_cast<size_t>(i)][static_cast<size_t>(j)],
                                                      s[static_cast<size_t>(j)]);
            b[static_cast<size_t>(i)] = t.add(b[static_cast<size_t>(i)], t.pack(agree));
        }
    }

    RoutingBuild out;
    out.capsules.level = out_level;
    out.capsules.capsules = std::move(s);
    out.coupling_rows = std::move(c);
    out.logit_rows = std::move(b);
    return out;
}

PoseVars event_capsules_t(Tape& t, const PoseVars& U, int event_id,
                          std::span<const RoutingParams> bank, int iterations) {
    if (event_id < 1 || static_cast<size_t>(event_id) > bank.size())
        throw LookupError("event capsules: unknown event id " + std::to_string(event_id));
    return dynamic_routing_t(t, U, bank[static_cast<size_t>(event_id - 1)], iterations,
                             CapsuleLevel::event)
        .capsules;
}

PoseVars outcome_capsules_t(Tape& t, const PoseVars& V, const RoutingParams& params, int iterations) {
    return dynamic_routing_t(t, V, params, iterations, CapsuleLevel::outcome).capsules;
}

PoseMatrix disentangle_features(const ParamStore& ps, const Vec& x, const FeatureLayerParams& params) {
    Tape t(&ps, nullptr);
    PoseVars u = disentangle_features_t(t, t.input(x.span()), params);
    std::vector<Vec> caps;
    for (Var v : u.capsules) caps.push_back(Vec::from_span(t.value(v)));
    return make_pose(CapsuleLevel::feature, std::move(caps));
}

std::pair<PoseMatrix, RoutingState> dynamic_routing(const ParamStore& ps, const PoseMatrix& in,
                                                    const RoutingParams& params, int iterations,
                                                    CapsuleLevel out_level) {
    Tape t(&ps, nullptr);
    PoseVars inv;
    inv.level = in.level;
    for (const Vec& c : in.capsules) inv.capsules.push_back(t.input(c.span()));
    RoutingBuild rb = dynamic_routing_t(t, inv, params, iterations, out_level);

    std::vector<Vec> caps;
    for (Var v : rb.capsules.capsules) caps.push_back(Vec::from_span(t.value(v)));
    RoutingState st;
    st.logits = Mat(params.n_in(), params.n_out());
    st.couplings = Mat(params.n_in(), params.n_out());
    for (int i = 0; i < params.n_in(); ++i) {
        auto lrow = t.value(rb.logit_rows[static_cast<size_t>(i)]);
        auto crow = t.value(rb.coupling_rows[static_cast<size_t>(i)]);
        for (int j = 0; j < params.n_out(); ++j) {
            st.logits.at(i, j) = lrow[static_cast<size_t>(j)];
            st.couplings.at(i, j) = crow[static_cast<size_t>(j)];
        }
    }
    return {make_pose(out_level, std::move(caps)), std::move(st)};
}

} // namespace hapnet
