#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hapnet/param_store.hpp"
#include "hapnet/tape.hpp"
#include "hapnet/vec.hpp"

namespace hapnet {

enum class CapsuleLevel { feature, event, cluster, outcome };

std::string to_string(CapsuleLevel level);

// Ordered set of same-dimension capsules at one level of the hierarchy.
struct PoseMatrix {
    CapsuleLevel level = CapsuleLevel::feature;
    std::vector<Vec> capsules;

    int size() const { return static_cast<int>(capsules.size()); }
    int dim() const { return capsules.empty() ? 0 : capsules.front().size(); }
};

// validates the identical-dimension invariant
PoseMatrix make_pose(CapsuleLevel level, std::vector<Vec> capsules);

// Tape-side pose matrix: capsule values live on a tape.
struct PoseVars {
    CapsuleLevel level = CapsuleLevel::feature;
    std::vector<Var> capsules;

    int size() const { return static_cast<int>(capsules.size()); }
};

// Final routing logits and couplings, (n_in x n_out); each coupling row is
// a softmax over the output index, so rows sum to 1.
struct RoutingState {
    Mat logits;
    Mat couplings;
};

// Feature disentanglement: per-capsule W_i (h x d) and bias b_i (h).
struct FeatureLayerParams {
    std::vector<ParamRef> W;
    std::vector<ParamRef> b;
    int count() const { return static_cast<int>(W.size()); }
};

// Routing transforms: W[i][j] maps input capsule i into the frame of
// output capsule j, shape (h_out x h_in).
struct RoutingParams {
    std::vector<std::vector<ParamRef>> W;
    int n_in() const { return static_cast<int>(W.size()); }
    int n_out() const { return W.empty() ? 0 : static_cast<int>(W.front().size()); }
};

// parameter registration (names are the serialization contract)
FeatureLayerParams make_feature_params(ParamStore& ps, int n_u, int d, int h);
RoutingParams make_event_params(ParamStore& ps, int event_id, int n_in, int n_out, int h);
RoutingParams make_outcome_params(ParamStore& ps, int n_in, int n_out, int h);

// u_i = squash(tanh(W_i x) + b_i), one capsule per W_i
PoseVars disentangle_features_t(Tape& t, Var x, const FeatureLayerParams& params);

struct RoutingBuild {
    PoseVars capsules;
    std::vector<Var> coupling_rows; // n_in rows, each dim n_out (from the final pass)
    std::vector<Var> logit_rows;    // n_in rows, after the final agreement update
};

// Routing by agreement, unrolled so gradients flow through every pass:
//   c = softmax(b) over outputs; s_j = squash(sum_i c_ij uhat_j|i);
//   b_ij += uhat_j|i . s_j   (update applied on every pass, last included)
RoutingBuild dynamic_routing_t(Tape& t, const PoseVars& in, const RoutingParams& params,
                               int iterations, CapsuleLevel out_level);

// routes through the one event network selected by event_id (1-based);
// uninvolved event parameters never enter the graph
PoseVars event_capsules_t(Tape& t, const PoseVars& U, int event_id,
                          std::span<const RoutingParams> bank, int iterations);

PoseVars outcome_capsules_t(Tape& t, const PoseVars& V, const RoutingParams& params, int iterations);

// plain-value wrappers (build a throwaway tape; for tests and inspection)
PoseMatrix disentangle_features(const ParamStore& ps, const Vec& x, const FeatureLayerParams& params);
std::pair<PoseMatrix, RoutingState> dynamic_routing(const ParamStore& ps, const PoseMatrix& in,
                                                    const RoutingParams& params, int iterations,
                                                    CapsuleLevel out_level);

} // namespace hapnet
