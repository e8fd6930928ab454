#include "hapnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hapnet/errors.hpp"
#include "hapnet/rng.hpp"
#include "json.hpp"

namespace hapnet {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kKind = "hapnet-dataset";

// role of an event inside its triple: 0 and 1 are modified, 2 modifies
int triple_pos(int event_id) { return (event_id - 1) % 3; }

double tau(int pos, double t, bool linear) {
    if (linear) return t;
    switch (pos) {
    case 0: return 5.0 + 2.0 * std::sin(t);
    case 1: return 5.0 + 2.0 * std::cos(t);
    default: return 5.0 + std::sin(t) + std::cos(t);
    }
}

Vec draw_uniform_vec(Rng rng, int d, double lo, double hi) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

// sample `count` clusters without replacement, favoring small clusters with
// weight 2^-|cluster|
std::vector<EventCluster> sample_weighted(std::vector<EventCluster> pool, int count, Rng rng) {
    std::vector<EventCluster> picked;
    std::vector<double> w;
    w.reserve(pool.size());
    for (const EventCluster& c : pool) w.push_back(std::pow(2.0, -c.size()));
    for (int k = 0; k < count && !pool.empty(); ++k) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = rng.uniform(0.0, total);
        size_t pick = 0;
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc) {
                pick = i;
                break;
            }
            pick = i; // rounding fallback: keep the last bucket
        }
        picked.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return picked;
}

void sort_clusters(std::vector<EventCluster>& cs) {
    std::sort(cs.begin(), cs.end(), [](const EventCluster& a, const EventCluster& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a.ids() < b.ids();
    });
}

} // namespace

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test") return Split::test;
    throw SchemaError("unknown split tag '" + s + "'");
}

int SyntheticConfig::resolved_subjects() const {
    if (subjects_per_cluster > 0) return subjects_per_cluster;
    switch (n_e) {
    case 3: return 1000;
    case 6: return 200;
    default: return 100;
    }
}

void SyntheticConfig::validate() const {
    if (n_e != 3 && n_e != 6 && n_e != 9)
        throw ConfigError("datagen: n_e must be 3, 6 or 9 (got " + std::to_string(n_e) + ")");
    if (d < 1) throw ConfigError("datagen: d must be >= 1");
    if (subjects_per_cluster < 0) throw ConfigError("datagen: subjects_per_cluster must be >= 0");
    if (!std::isfinite(modifier_scale) || modifier_scale < 0.0)
        throw ConfigError("datagen: modifier_scale must be finite and >= 0");
    if (!std::isfinite(noise_std) || noise_std < 0.0)
        throw ConfigError("datagen: noise_std must be finite and >= 0");
}

std::vector<EventCluster> enumerate_clusters(int n_e) {
    if (n_e < 1) throw ContractError("enumerate_clusters: n_e must be >= 1");
    std::vector<EventCluster> out;
    for (uint32_t mask = 1; mask < (1u << n_e); ++mask) {
        std::vector<int> ids;
        for (int e = 1; e <= n_e; ++e)
            if (mask & (1u << (e - 1))) ids.push_back(e);
        out.emplace_back(std::move(ids));
    }
    sort_clusters(out);
    return out;
}

int modifier_source(int event_id) {
    int pos = triple_pos(event_id);
    if (pos == 2) return 0;
    return event_id - pos + 2;
}

SyntheticDraws synthetic_draws(const SyntheticConfig& config) {
    config.validate();
    Rng root(config.seed);
    SyntheticDraws out;
    for (int e = 1; e <= config.n_e; ++e)
        out.coef.push_back(draw_uniform_vec(root.derive(1, static_cast<uint64_t>(e)), config.d, -1.0, 1.0));
    for (int e = 1; e <= config.n_e; ++e)
        if (modifier_source(e) != 0)
            out.modifier.emplace(e, draw_uniform_vec(root.derive(2, static_cast<uint64_t>(e)), config.d,
                                                     -config.modifier_scale, config.modifier_scale));

    std::vector<EventCluster> all = enumerate_clusters(config.n_e);
    if (config.n_e == 9) {
        // keep every singleton, then a small-skewed sample of the rest
        std::vector<EventCluster> singles, rest;
        for (EventCluster& c : all)
            (c.size() == 1 ? singles : rest).push_back(std::move(c));
        std::vector<EventCluster> picked = sample_weighted(std::move(rest), 120 - static_cast<int>(singles.size()),
                                                           root.derive(3));
        out.clusters = std::move(singles);
        for (EventCluster& c : picked) out.clusters.push_back(std::move(c));
        sort_clusters(out.clusters);
    } else {
        out.clusters = std::move(all);
    }
    return out;
}

double template_outcome(const SyntheticDraws& draws, const SyntheticConfig& config,
                        const EventCluster& cluster, const Vec& x) {
    double y = 0.0;
    for (int e : cluster.ids()) {
        if (e > static_cast<int>(draws.coef.size()))
            throw ContractError("template_outcome: event beyond the drawn coefficients");
        Vec coef = draws.coef[static_cast<size_t>(e - 1)];
        int source = modifier_source(e);
        if (source != 0 && source <= config.n_e && cluster.contains(source))
            coef += draws.modifier.at(e);
        y += tau(triple_pos(e), coef.dot(x), config.linear_tau);
    }
    return y;
}

Dataset generate(const SyntheticConfig& config, ExecMode mode) {
    SyntheticDraws draws = synthetic_draws(config);
    Rng root(config.seed);
    int per = config.resolved_subjects();
    int64_t total = static_cast<int64_t>(draws.clusters.size()) * per;

    // chunks are filled independently and spliced in index order, so the
    // result is identical no matter how the chunks were scheduled
    std::vector<std::vector<SubjectRecord>> chunks(static_cast<size_t>(chunk_count(total)));
    for_chunks(total, mode, [&](int c, int64_t b, int64_t e) {
        auto& local = chunks[static_cast<size_t>(c)];
        local.reserve(static_cast<size_t>(e - b));
        for (int64_t r = b; r < e; ++r) {
            int64_t ci = r / per;
            int64_t k = r % per;
            const EventCluster& cluster = draws.clusters[static_cast<size_t>(ci)];
            Rng rng = root.derive(4, static_cast<uint64_t>(ci), static_cast<uint64_t>(k));
            Vec x(config.d);
            for (int i = 0; i < config.d; ++i) x[i] = rng.normal();
            double y = template_outcome(draws, config, cluster, x) + config.noise_std * rng.normal();
            local.push_back(SubjectRecord{std::move(x), cluster, y, Split::train});
        }
    });

    Dataset ds;
    ds.meta = config;
    ds.meta.subjects_per_cluster = per;
    ds.records.reserve(static_cast<size_t>(total));
    for (auto& chunk : chunks)
        for (SubjectRecord& rec : chunk) ds.records.push_back(std::move(rec));
    return ds;
}

void assign_splits(Dataset& dataset, uint64_t seed) {
    if (dataset.records.size() < 5)
        throw ContractError("split: need at least 5 records for a 60/20/20 split");

    std::map<std::vector<int>, std::vector<size_t>> by_cluster;
    for (size_t i = 0; i < dataset.records.size(); ++i)
        by_cluster[dataset.records[i].cluster.sorted_ids()].push_back(i);

    Rng root(seed);
    uint64_t ci = 0;
    for (auto& [key, idx] : by_cluster) {
        Rng rng = root.derive(5, ci++);
        for (size_t i = idx.size(); i > 1; --i) // Fisher-Yates
            std::swap(idx[i - 1], idx[static_cast<size_t>(rng.bounded(i))]);
        int64_t n = static_cast<int64_t>(idx.size());
        int64_t n_train = std::lround(0.6 * static_cast<double>(n));
        int64_t n_valid = std::min<int64_t>(std::lround(0.2 * static_cast<double>(n)), n - n_train);
        for (int64_t i = 0; i < n; ++i) {
            Split s = i < n_train ? Split::train : (i < n_train + n_valid ? Split::valid : Split::test);
            dataset.records[idx[static_cast<size_t>(i)]].split = s;
        }
    }
}

int count_split(const Dataset& dataset, Split split) {
    int n = 0;
    for (const SubjectRecord& r : dataset.records)
        if (r.split == split) ++n;
    return n;
}

namespace {

nlohmann::json config_to_json(const SyntheticConfig& c) {
    return {
        {"n_e", c.n_e},
        {"d", c.d},
        {"subjects_per_cluster", c.subjects_per_cluster},
        {"seed", c.seed},
        {"modifier_scale", c.modifier_scale},
        {"noise_std", c.noise_std},
        {"linear_tau", c.linear_tau},
    };
}

SyntheticConfig config_from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    try {
        c.n_e = j.at("n_e").get<int>();
        c.d = j.at("d").get<int>();
        c.subjects_per_cluster = j.at("subjects_per_cluster").get<int>();
        c.seed = j.at("seed").get<uint64_t>();
        c.modifier_scale = j.at("modifier_scale").get<double>();
        c.noise_std = j.at("noise_std").get<double>();
        c.linear_tau = j.at("linear_tau").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("dataset: bad config header: ") + e.what());
    }
    return c;
}

} // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open dataset for writing: " + path);

    nlohmann::json header;
    header["format_version"] = kFormatVersion;
    header["kind"] = kKind;
    header["config"] = config_to_json(dataset.meta);
    out << header.dump() << '\n';

    for (const SubjectRecord& r : dataset.records) {
        nlohmann::json j;
        j["x"] = r.x.values();
        j["events"] = r.cluster.ids();
        j["y"] = r.y;
        j["split"] = to_string(r.split);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing dataset: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("dataset: empty file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("dataset: invalid header: ") + e.what());
    }
    if (!header.is_object() || header.value("kind", "") != kKind)
        throw SchemaError("dataset: not a dataset file");
    if (header.value("format_version", -1) != kFormatVersion)
        throw SchemaError("dataset: unsupported format version");

    Dataset ds;
    ds.meta = config_from_json(header.at("config"));
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("dataset: bad record on line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            std::vector<double> xv = j.at("x").get<std::vector<double>>();
            std::vector<int> events = j.at("events").get<std::vector<int>>();
            double y = j.at("y").get<double>();
            Split split = split_from_string(j.at("split").get<std::string>());
            if (static_cast<int>(xv.size()) != ds.meta.d)
                throw SchemaError("dataset: x length != d on line " + std::to_string(lineno));
            for (int e : events)
                if (e < 1 || e > ds.meta.n_e)
                    throw SchemaError("dataset: unknown event id on line " + std::to_string(lineno));
            if (!std::isfinite(y))
                throw SchemaError("dataset: non-finite y on line " + std::to_string(lineno));
            ds.records.push_back(
                SubjectRecord{Vec(std::move(xv)), EventCluster(std::move(events)), y, split});
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("dataset: bad record on line " + std::to_string(lineno) + ": " + e.what());
        } catch (const ContractError& e) {
            throw SchemaError("dataset: invalid cluster on line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DomainError& e) {
            throw SchemaError("dataset: invalid values on line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return ds;
}

} // namespace hapnet
