#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hapnet/attention.hpp"
#include "hapnet/parallel.hpp"
#include "hapnet/vec.hpp"

namespace hapnet {

enum class Split { train, valid, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s); // SchemaError on unknown tag

// Synthetic cohorts with 3, 6 or 9 event types. Events form consecutive
// triples (a, b, c); within a triple, c shifts the effect coefficients of a
// and b whenever they share a cluster, and triples do not interact.
struct SyntheticConfig {
    int n_e = 3;
    int d = 25;
    int subjects_per_cluster = 0; // 0 picks the per-n_e default below
    uint64_t seed = 1;
    double modifier_scale = 0.5; // modifier vectors ~ Uniform(-scale, scale)^d
    double noise_std = 1.0;
    bool linear_tau = false; // replace the trig effect curves with identity (test hook)

    int resolved_subjects() const; // 1000 / 200 / 100 by event count
    void validate() const;         // ConfigError outside the supported grid
};

struct SubjectRecord {
    Vec x;
    EventCluster cluster;
    double y = 0.0;
    Split split = Split::train;
};

struct Dataset {
    SyntheticConfig meta;
    std::vector<SubjectRecord> records;
};

// All nonempty subsets of {1..n_e}, ordered by size then lexicographically.
// ContractError when n_e < 1.
std::vector<EventCluster> enumerate_clusters(int n_e);

// Everything about a dataset that is fixed before subjects are drawn. The
// modifier map is keyed by the modified event; the entry applies whenever
// that event's triple-mate c is in the cluster.
struct SyntheticDraws {
    std::vector<Vec> coef;        // effect coefficients, index e-1
    std::map<int, Vec> modifier;  // modified event id -> coefficient shift
    std::vector<EventCluster> clusters; // included clusters, generation order
};

SyntheticDraws synthetic_draws(const SyntheticConfig& config);

// the event whose presence shifts this event's coefficient, or 0 for none
int modifier_source(int event_id);

// noise-free outcome for one subject under the template
double template_outcome(const SyntheticDraws& draws, const SyntheticConfig& config,
                        const EventCluster& cluster, const Vec& x);

// subjects_per_cluster records for every included cluster, in cluster-major
// order; a pure function of the config regardless of execution mode
Dataset generate(const SyntheticConfig& config, ExecMode mode = ExecMode::serial);

// seeded 60/20/20 tagging, stratified per cluster; ContractError below 5 records
void assign_splits(Dataset& dataset, uint64_t seed);

int count_split(const Dataset& dataset, Split split);

// JSON-lines file: header object, then one record per line
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace hapnet
