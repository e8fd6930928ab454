#include "hapnet/param_store.hpp"

namespace hapnet {

ParamRef ParamStore::add(const std::string& name, std::vector<int> shape, int rows, int cols) {
    if (index_.count(name)) throw ContractError("ParamStore: duplicate name " + name);
    if (rows <= 0 || cols <= 0) throw ShapeError("ParamStore: non-positive shape for " + name);
    ParamRef r{static_cast<int64_t>(data_.size()), rows, cols};
    data_.resize(data_.size() + static_cast<size_t>(r.size()), 0.0);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, std::move(shape), r});
    return r;
}

ParamRef ParamStore::add_matrix(const std::string& name, int rows, int cols) {
    return add(name, {rows, cols}, rows, cols);
}

ParamRef ParamStore::add_vector(const std::string& name, int len) {
    return add(name, {len}, len, 1);
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("ParamStore: unknown parameter " + name);
    return entries_[static_cast<size_t>(it->second)];
}

void ParamStore::init_uniform(Rng rng, double lo, double hi) {
    for (double& x : data_) x = rng.uniform(lo, hi);
}

} // namespace hapnet
