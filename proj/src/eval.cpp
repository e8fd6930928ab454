#include "hapnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hapnet/errors.hpp"

namespace hapnet {

namespace {

std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) out += '+';
        out += std::to_string(ids[i]);
    }
    return out;
}

// stderr of the percent APEs: sample std over sqrt(N), 0 when N <= 1
double ape_stderr_percent(double ape_sum, double ape_sq_sum, int64_t n) {
    if (n <= 1) return 0.0;
    const double nd = static_cast<double>(n);
    const double mean = ape_sum / nd;
    double var = (ape_sq_sum - nd * mean * mean) / (nd - 1.0);
    if (var < 0.0) var = 0.0; // guard tiny negative round-off
    return 100.0 * std::sqrt(var / nd);
}

} // namespace

void GroupStats::add(double y, double yhat) {
    const double ape = std::abs(y - yhat) / std::abs(y);
    count += 1;
    sum_y += y;
    sum_yhat += yhat;
    ape_sum += ape;
    ape_sq_sum += ape * ape;
}

GroupStats& GroupStats::operator+=(const GroupStats& o) {
    count += o.count;
    sum_y += o.sum_y;
    sum_yhat += o.sum_yhat;
    ape_sum += o.ape_sum;
    ape_sq_sum += o.ape_sq_sum;
    return *this;
}

std::pair<double, double> mape(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size())
        throw ShapeError("mape: y has " + std::to_string(y.size()) + " entries but yhat has " +
                         std::to_string(yhat.size()));
    if (y.empty()) throw ContractError("mape: no records");

    std::string zeros;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            if (!zeros.empty()) zeros += ", ";
            zeros += std::to_string(i);
        }
    }
    if (!zeros.empty()) throw DomainError("mape: target is zero at index " + zeros);

    const double n = static_cast<double>(y.size());
    double sum = 0.0, sq = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double ape = std::abs(y[i] - yhat[i]) / std::abs(y[i]);
        sum += ape;
        sq += ape * ape;
    }
    return {100.0 * sum / n, ape_stderr_percent(sum, sq, static_cast<int64_t>(y.size()))};
}

std::vector<size_t> split_indices(const Dataset& data, Split split) {
    std::vector<size_t> idx;
    for (size_t r = 0; r < data.records.size(); ++r)
        if (data.records[r].split == split) idx.push_back(r);
    return idx;
}

EvalReport make_report(const Dataset& data, Split split, const std::vector<size_t>& indices,
                       const std::vector<double>& yhat) {
    if (indices.size() != yhat.size())
        throw ContractError("make_report: " + std::to_string(indices.size()) + " records but " +
                            std::to_string(yhat.size()) + " predictions");
    if (indices.empty())
        throw ContractError("make_report: split '" + to_string(split) + "' has no records");

    std::string zeros;
    for (size_t i = 0; i < indices.size(); ++i) {
        if (data.records[indices[i]].y == 0.0) {
            if (!zeros.empty()) zeros += ", ";
            zeros += std::to_string(i);
        }
    }
    if (!zeros.empty()) throw DomainError("mape: target is zero at index " + zeros);

    EvalReport rep;
    rep.split = split;
    for (size_t i = 0; i < indices.size(); ++i) {
        const SubjectRecord& rec = data.records[indices[i]];
        const std::string key = join_ids(rec.cluster.sorted_ids());
        rep.per_cluster[key].add(rec.y, yhat[i]);
        for (int e : rec.cluster.ids()) rep.per_event[e].add(rec.y, yhat[i]);
    }

    // totals are derived from the per-cluster groups, in map order, so the
    // aggregation identity is exact rather than merely close
    for (const auto& [key, g] : rep.per_cluster) rep.total += g;
    rep.count = rep.total.count;
    rep.mape_mean = rep.total.mape();
    rep.mape_stderr = ape_stderr_percent(rep.total.ape_sum, rep.total.ape_sq_sum, rep.count);
    return rep;
}

EvalReport evaluate(const Model& model, const Dataset& data, Split split, ExecMode mode) {
    const std::vector<size_t> indices = split_indices(data, split);
    if (indices.empty())
        throw ContractError("evaluate: split '" + to_string(split) + "' has no records");

    std::vector<double> yhat(indices.size(), 0.0);
    for_chunks(static_cast<int64_t>(indices.size()), mode, [&](int, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            const SubjectRecord& rec = data.records[indices[static_cast<size_t>(i)]];
            yhat[static_cast<size_t>(i)] = model.predict(rec.x, rec.cluster).yhat;
        }
    });
    return make_report(data, split, indices, yhat);
}

namespace {

nlohmann::json stats_to_json(const GroupStats& g) {
    return {{"count", g.count},
            {"sum_y", g.sum_y},
            {"sum_yhat", g.sum_yhat},
            {"ape_sum", g.ape_sum},
            {"ape_sq_sum", g.ape_sq_sum}};
}

GroupStats stats_from_json(const nlohmann::json& j) {
    GroupStats g;
    g.count = j.at("count").get<int64_t>();
    g.sum_y = j.at("sum_y").get<double>();
    g.sum_yhat = j.at("sum_yhat").get<double>();
    g.ape_sum = j.at("ape_sum").get<double>();
    g.ape_sq_sum = j.at("ape_sq_sum").get<double>();
    return g;
}

} // namespace

void save_report(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "hapnet-eval";
    j["split"] = to_string(report.split);
    j["count"] = report.count;
    j["mape_mean"] = report.mape_mean;
    j["mape_stderr"] = report.mape_stderr;
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [key, g] : report.per_cluster) pc[key] = stats_to_json(g);
    j["per_cluster"] = std::move(pc);
    nlohmann::json pe = nlohmann::json::object();
    for (const auto& [id, g] : report.per_event) pe[std::to_string(id)] = stats_to_json(g);
    j["per_event"] = std::move(pe);
    j["total"] = stats_to_json(report.total);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open report file for writing: " + path);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing report file: " + path);
}

EvalReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("report file is not valid JSON: " + path + ": " + e.what());
    }
    try {
        if (j.at("kind").get<std::string>() != "hapnet-eval")
            throw SchemaError("not an eval report: " + path);
        if (j.at("format_version").get<int>() != 1)
            throw SchemaError("unsupported report format version in " + path);
        EvalReport rep;
        rep.split = split_from_string(j.at("split").get<std::string>());
        rep.count = j.at("count").get<int64_t>();
        rep.mape_mean = j.at("mape_mean").get<double>();
        rep.mape_stderr = j.at("mape_stderr").get<double>();
        for (const auto& [key, val] : j.at("per_cluster").items())
            rep.per_cluster[key] = stats_from_json(val);
        for (const auto& [key, val] : j.at("per_event").items())
            rep.per_event[std::stoi(key)] = stats_from_json(val);
        rep.total = stats_from_json(j.at("total"));
        return rep;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed eval report " + path + ": " + e.what());
    }
}

namespace {

void write_csv_row(std::ofstream& out, const std::string& id, const GroupStats& g) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%lld,%.10g,%.10g,%.10g", id.c_str(),
                  static_cast<long long>(g.count), g.mean_y(), g.mean_yhat(), g.mape());
    out << buf << '\n';
}

} // namespace

void write_report_csv(const EvalReport& report, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir + ": " + ec.message());

    const std::string header = "cluster_id,count,mean_y,mean_yhat,mape\n";

    std::ofstream pc(dir + "/per_cluster.csv");
    if (!pc) throw IoError("cannot write " + dir + "/per_cluster.csv");
    pc << header;
    for (const auto& [key, g] : report.per_cluster) write_csv_row(pc, key, g);

    std::ofstream pe(dir + "/per_event.csv");
    if (!pe) throw IoError("cannot write " + dir + "/per_event.csv");
    pe << "event_id,count,mean_y,mean_yhat,mape\n";
    for (const auto& [id, g] : report.per_event) write_csv_row(pe, std::to_string(id), g);

    std::ofstream tot(dir + "/total.csv");
    if (!tot) throw IoError("cannot write " + dir + "/total.csv");
    tot << header;
    write_csv_row(tot, "all", report.total);
}

} // namespace hapnet
