#include "hapnet/attention.hpp"

#include <algorithm>
#include <set>

#include "hapnet/errors.hpp"

namespace hapnet {

AttentionParams make_attention_params(ParamStore& ps, int heads, int h) {
    if (heads < 1) throw ContractError("attention: needs at least one head");
    AttentionParams p;
    for (int k = 0; k < heads; ++k) {
        AttentionHead head;
        head.W = ps.add_matrix("paaa.head." + std::to_string(k) + ".W", h, h);
        head.a = ps.add_vector("paaa.head." + std::to_string(k) + ".a", 2 * h);
        p.heads.push_back(head);
    }
    return p;
}

EventCluster::EventCluster(std::vector<int> ids) : ids_(std::move(ids)) {
    if (ids_.empty()) throw ContractError("event cluster: must be nonempty");
    std::set<int> seen;
    for (int e : ids_) {
        if (e < 1) throw ContractError("event cluster: event ids are 1-based");
        if (!seen.insert(e).second)
            throw ContractError("event cluster: duplicate event id " + std::to_string(e));
    }
}

std::string EventCluster::label() const {
    std::string out;
    for (size_t i = 0; i < ids_.size(); ++i) {
        if (i > 0) out += '+';
        out += std::to_string(ids_[i]);
    }
    return out;
}

std::vector<int> EventCluster::sorted_ids() const {
    std::vector<int> s = ids_;
    std::sort(s.begin(), s.end());
    return s;
}

bool EventCluster::contains(int event_id) const {
    for (int e : ids_)
        if (e == event_id) return true;
    return false;
}

std::vector<std::vector<Var>> stack_cluster_t(std::span<const PoseVars> event_sets,
                                              const EventCluster& cluster) {
    if (event_sets.size() != static_cast<size_t>(cluster.size()))
        throw ContractError("stack: cluster references an event without computed capsules");
    int n_s = event_sets.front().size();
    for (const PoseVars& s : event_sets)
        if (s.size() != n_s) throw ShapeError("stack: event capsule counts differ");
    std::vector<std::vector<Var>> groups(static_cast<size_t>(n_s));
    for (int j = 0; j < n_s; ++j)
        for (const PoseVars& s : event_sets)
            groups[static_cast<size_t>(j)].push_back(s.capsules[static_cast<size_t>(j)]);
    return groups;
}

namespace {

// one head's transformed capsules p_l = W s_l
std::vector<Var> head_transform(Tape& t, std::span<const Var> group, const AttentionHead& head) {
    std::vector<Var> p;
    p.reserve(group.size());
    for (Var s : group) p.push_back(t.matvec(head.W, s));
    return p;
}

// one head's attended output for every k in the group
std::vector<Var> head_attend(Tape& t, std::span<const Var> group, const AttentionHead& head,
                             double slope) {
    std::vector<Var> p = head_transform(t, group, head);
    size_t n = p.size();
    std::vector<Var> out;
    out.reserve(n);
    if (n == 1) {
        out.push_back(t.tanh_(p[0])); // alpha = [[1]]
        return out;
    }
    std::vector<Var> scores(n);
    std::vector<Var> coeffs(n);
    for (size_t k = 0; k < n; ++k) {
        for (size_t l = 0; l < n; ++l) {
            Var pair = t.concat(std::vector<Var>{p[k], p[l]});
            scores[l] = t.leaky_relu(t.dot(t.param(head.a), pair), slope);
        }
        Var alpha = t.softmax(t.pack(scores));
        for (size_t l = 0; l < n; ++l) coeffs[l] = t.pick(alpha, static_cast<int>(l));
        out.push_back(t.tanh_(t.weighted_sum(coeffs, p)));
    }
    return out;
}

} // namespace

Mat attention_scores(const ParamStore& ps, const std::vector<Vec>& group, const AttentionHead& head,
                     double slope) {
    if (group.empty()) throw ContractError("attention scores: empty group");
    Tape t(&ps, nullptr);
    std::vector<Var> g;
    for (const Vec& s : group) g.push_back(t.input(s.span()));
    std::vector<Var> p = head_transform(t, g, head);
    size_t n = p.size();
    Mat alpha(static_cast<int>(n), static_cast<int>(n));
    std::vector<Var> scores(n);
    for (size_t k = 0; k < n; ++k) {
        for (size_t l = 0; l < n; ++l) {
            Var pair = t.concat(std::vector<Var>{p[k], p[l]});
            scores[l] = t.leaky_relu(t.dot(t.param(head.a), pair), slope);
        }
        Var row = t.softmax(t.pack(scores));
        auto rv = t.value(row);
        for (size_t l = 0; l < n; ++l) alpha.at(static_cast<int>(k), static_cast<int>(l)) = rv[l];
    }
    return alpha;
}

std::vector<Var> attend_position_t(Tape& t, std::span<const Var> group, const AttentionParams& params) {
    if (group.empty()) throw ContractError("attention: empty group");
    if (params.head_count() < 1) throw ContractError("attention: needs at least one head");
    size_t n = group.size();
    std::vector<std::vector<Var>> per_head;
    per_head.reserve(params.heads.size());
    for (const AttentionHead& head : params.heads)
        per_head.push_back(head_attend(t, group, head, params.slope));

    std::vector<Var> out;
    out.reserve(n);
    std::vector<Var> acc(params.heads.size());
    for (size_t k = 0; k < n; ++k) {
        for (size_t h = 0; h < per_head.size(); ++h) acc[h] = per_head[h][k];
        out.push_back(t.scale(t.sum(acc), 1.0 / static_cast<double>(per_head.size())));
    }
    return out;
}

Var additive_combine_t(Tape& t, std::span<const Var> attended) {
    if (attended.empty()) throw ContractError("combine: empty group");
    return t.sum(attended);
}

PoseVars build_cluster_capsules_t(Tape& t, std::span<const PoseVars> event_sets,
                                  const EventCluster& cluster, const AttentionParams& params,
                                  bool paaa_enabled) {
    std::vector<std::vector<Var>> groups = stack_cluster_t(event_sets, cluster);
    PoseVars out;
    out.level = CapsuleLevel::cluster;
    out.capsules.reserve(groups.size());
    for (const std::vector<Var>& group : groups) {
        if (!paaa_enabled) {
            out.capsules.push_back(t.sum(group));
        } else {
            std::vector<Var> attended = attend_position_t(t, group, params);
            out.capsules.push_back(additive_combine_t(t, attended));
        }
    }
    return out;
}

PoseMatrix build_cluster_capsules(const ParamStore& ps, std::span<const PoseMatrix> event_sets,
                                  const EventCluster& cluster, const AttentionParams& params,
                                  bool paaa_enabled) {
    Tape t(&ps, nullptr);
    std::vector<PoseVars> sets;
    sets.reserve(event_sets.size());
    for (const PoseMatrix& pm : event_sets) {
        PoseVars pv;
        pv.level = pm.level;
        for (const Vec& c : pm.capsules) pv.capsules.push_back(t.input(c.span()));
        sets.push_back(std::move(pv));
    }
    PoseVars v = build_cluster_capsules_t(t, sets, cluster, params, paaa_enabled);
    std::vector<Vec> caps;
    for (Var c : v.capsules) caps.push_back(Vec::from_span(t.value(c)));
    return make_pose(CapsuleLevel::cluster, std::move(caps));
}

} // namespace hapnet
