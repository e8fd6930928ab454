#pragma once

#include <stdexcept>
#include <string>

namespace hapnet {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// dimension / length mismatch between operands
struct ShapeError : Error { using Error::Error; };
// numeric domain: non-finite values, empty softmax, zero denominators
struct DomainError : Error { using Error::Error; };
// violated API precondition (empty cluster, zero iterations, empty batch, ...)
struct ContractError : Error { using Error::Error; };
// unknown event id or parameter name
struct LookupError : Error { using Error::Error; };
// invalid configuration value or key
struct ConfigError : Error { using Error::Error; };
// file format / version problems
struct SchemaError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
// training diverged (non-finite loss)
struct TrainError : Error { using Error::Error; };

} // namespace hapnet
