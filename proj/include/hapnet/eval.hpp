#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hapnet/datagen.hpp"
#include "hapnet/model.hpp"
#include "hapnet/parallel.hpp"

namespace hapnet {

// Running sums for one aggregation group. Sums, not means, are stored so
// the report-level identity (total = sum of groups) holds exactly.
struct GroupStats {
    int64_t count = 0;
    double sum_y = 0.0;
    double sum_yhat = 0.0;
    double ape_sum = 0.0;    // sum of |y - yhat| / |y|
    double ape_sq_sum = 0.0; // sum of squared per-record APEs

    double mean_y() const { return count > 0 ? sum_y / static_cast<double>(count) : 0.0; }
    double mean_yhat() const { return count > 0 ? sum_yhat / static_cast<double>(count) : 0.0; }
    double mape() const { return count > 0 ? 100.0 * ape_sum / static_cast<double>(count) : 0.0; }

    void add(double y, double yhat);
    GroupStats& operator+=(const GroupStats& o);
};

struct EvalReport {
    Split split = Split::test;
    int64_t count = 0;
    double mape_mean = 0.0;   // percent
    double mape_stderr = 0.0; // percent; per-record dispersion of the APEs
    std::map<std::string, GroupStats> per_cluster; // canonical cluster label -> stats
    std::map<int, GroupStats> per_event;           // event id -> stats over records containing it
    GroupStats total;                              // summed from per_cluster, in map order
};

// (mean percent, stderr percent) of |y - yhat| / |y|; stderr uses the
// sample standard deviation over sqrt(N) and is 0 for N <= 1.
// DomainError listing the offending indices when any y is exactly 0.
std::pair<double, double> mape(const std::vector<double>& y, const std::vector<double>& yhat);

// model predictions over one split; ContractError when the split is empty
EvalReport evaluate(const Model& model, const Dataset& data, Split split,
                    ExecMode mode = ExecMode::serial);

// report assembly from aligned vectors (shared by model and baseline paths)
EvalReport make_report(const Dataset& data, Split split, const std::vector<size_t>& indices,
                       const std::vector<double>& yhat);

std::vector<size_t> split_indices(const Dataset& data, Split split);

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

// per_cluster.csv, per_event.csv and total.csv under dir
void write_report_csv(const EvalReport& report, const std::string& dir);

} // namespace hapnet
