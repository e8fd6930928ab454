#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hapnet/errors.hpp"
#include "hapnet/rng.hpp"

namespace hapnet {

// Slice of the flat parameter array. Matrices are row-major (rows x cols);
// vectors have cols == 1.
struct ParamRef {
    int64_t off = -1;
    int rows = 0;
    int cols = 1;
    int64_t size() const { return static_cast<int64_t>(rows) * cols; }
    bool valid() const { return off >= 0; }
};

// Named flat collection of learnable tensors. All model parameters live in
// one contiguous array so a gradient buffer is just a same-sized array and
// every element is addressable by (name, index) for gradient checking.
class ParamStore {
public:
    struct Entry {
        std::string name;
        std::vector<int> shape; // {rows} or {rows, cols}
        ParamRef ref;
    };

    ParamRef add_matrix(const std::string& name, int rows, int cols);
    ParamRef add_vector(const std::string& name, int len);

    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    int entry_count() const { return static_cast<int>(entries_.size()); }
    const Entry& entry(int i) const { return entries_[static_cast<size_t>(i)]; }
    const Entry& entry(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::span<double> values(const ParamRef& r) { return {data_.data() + r.off, static_cast<size_t>(r.size())}; }
    std::span<const double> values(const ParamRef& r) const {
        return {data_.data() + r.off, static_cast<size_t>(r.size())};
    }

    // fills every entry, in creation order, element-wise uniform in [lo, hi]
    void init_uniform(Rng rng, double lo, double hi);

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

private:
    ParamRef add(const std::string& name, std::vector<int> shape, int rows, int cols);

    std::vector<double> data_;
    std::vector<Entry> entries_;
    std::map<std::string, int> index_;
};

} // namespace hapnet
