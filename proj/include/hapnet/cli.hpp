#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hapnet/model.hpp"
#include "hapnet/train.hpp"

namespace hapnet {

// Flat key=value file mapped onto the model and training configs; the
// `seed` key feeds both. Unknown keys and malformed values are ConfigError.
void apply_config_file(const std::string& path, ModelConfig& model_cfg, TrainConfig& train_cfg);

// argv-style entry point shared by the hapnet binary and in-process tests.
// args exclude the program name. Returns the process exit code:
// 0 success, 1 invalid input (flags, config, schema), 2 runtime failure.
int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace hapnet
