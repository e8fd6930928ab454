#pragma once

#include <span>
#include <string>
#include <vector>

#include "hapnet/capsules.hpp"
#include "hapnet/param_store.hpp"
#include "hapnet/tape.hpp"
#include "hapnet/vec.hpp"

namespace hapnet {

// One attention head: shared linear map W (h x h) and scoring vector a (2h).
struct AttentionHead {
    ParamRef W;
    ParamRef a;
};

struct AttentionParams {
    std::vector<AttentionHead> heads;
    double slope = 0.2; // LeakyReLU slope in the score
    int head_count() const { return static_cast<int>(heads.size()); }
};

AttentionParams make_attention_params(ParamStore& ps, int heads, int h);

// Nonempty ordered set of distinct event ids (1-based).
class EventCluster {
public:
    explicit EventCluster(std::vector<int> ids);
    const std::vector<int>& ids() const { return ids_; }
    int size() const { return static_cast<int>(ids_.size()); }
    std::string label() const;            // "1+3", in listed order
    std::vector<int> sorted_ids() const;  // canonical key, independent of listing order
    bool contains(int event_id) const;
    friend bool operator==(const EventCluster& a, const EventCluster& b) { return a.ids_ == b.ids_; }
    friend bool operator<(const EventCluster& a, const EventCluster& b) { return a.ids_ < b.ids_; }

private:
    std::vector<int> ids_;
};

// Regroups per-event capsule sets by position: result[j] holds the
// position-j capsule of every event in the cluster, in cluster order.
std::vector<std::vector<Var>> stack_cluster_t(std::span<const PoseVars> event_sets,
                                              const EventCluster& cluster);

// One head's score matrix for the capsules at one position:
// alpha_kl = softmax_l(LeakyReLU(a . [W s_k || W s_l])); rows sum to 1.
Mat attention_scores(const ParamStore& ps, const std::vector<Vec>& group,
                     const AttentionHead& head, double slope);

// Attended capsules at one position, averaged over heads:
// sbar_k = mean_h tanh(sum_l alpha^h_kl W_h s_l).
std::vector<Var> attend_position_t(Tape& t, std::span<const Var> group, const AttentionParams& params);

// v = sum of the attended capsules at one position
Var additive_combine_t(Tape& t, std::span<const Var> attended);

// Full cluster-capsule construction. |cluster| >= 2: attention then addition
// per position. Singleton: v_j = mean_h tanh(W_h s_j), no score pass. With
// paaa_enabled = false: plain per-position addition, attention parameters
// stay out of the graph entirely.
PoseVars build_cluster_capsules_t(Tape& t, std::span<const PoseVars> event_sets,
                                  const EventCluster& cluster, const AttentionParams& params,
                                  bool paaa_enabled);

// plain-value wrapper
PoseMatrix build_cluster_capsules(const ParamStore& ps, std::span<const PoseMatrix> event_sets,
                                  const EventCluster& cluster, const AttentionParams& params,
                                  bool paaa_enabled);

} // namespace hapnet
