#include <cmath>
#include <fstream>

#include "hapnet/errors.hpp"
#include "hapnet/model.hpp"
#include "json.hpp"

namespace hapnet {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kKind = "hapnet-checkpoint";

nlohmann::json config_to_json(const ModelConfig& c) {
    return {
        {"d", c.d},
        {"n_e", c.n_e},
        {"n_u", c.n_u},
        {"n_s", c.n_s},
        {"n_v", c.n_v},
        {"n_z", c.n_z},
        {"h", c.h},
        {"routing_iters", c.routing_iters},
        {"heads", c.heads},
        {"beta", c.beta},
        {"head_hidden", c.head_hidden},
        {"decoder_hidden", c.decoder_hidden},
        {"seed", c.seed},
    };
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.d = j.at("d").get<int>();
        c.n_e = j.at("n_e").get<int>();
        c.n_u = j.at("n_u").get<int>();
        c.n_s = j.at("n_s").get<int>();
        c.n_v = j.at("n_v").get<int>();
        c.n_z = j.at("n_z").get<int>();
        c.h = j.at("h").get<int>();
        c.routing_iters = j.at("routing_iters").get<int>();
        c.heads = j.at("heads").get<int>();
        c.beta = j.at("beta").get<double>();
        c.head_hidden = j.at("head_hidden").get<int>();
        c.decoder_hidden = j.at("decoder_hidden").get<int>();
        c.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("checkpoint: bad model_config: ") + e.what());
    }
    return c;
}

} // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = kKind;
    j["ablation"] = to_string(model.mode());
    j["model_config"] = config_to_json(model.config());

    nlohmann::json params = nlohmann::json::object();
    const ParamStore& ps = model.params();
    for (int i = 0; i < ps.entry_count(); ++i) {
        const ParamStore::Entry& e = ps.entry(i);
        auto vals = ps.values(e.ref);
        params[e.name] = {
            {"shape", e.shape},
            {"data", std::vector<double>(vals.begin(), vals.end())},
        };
    }
    j["params"] = std::move(params);

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("checkpoint: invalid JSON: ") + e.what());
    }

    if (!j.is_object() || j.value("kind", "") != kKind)
        throw SchemaError("checkpoint: not a model checkpoint file");
    if (j.value("format_version", -1) != kFormatVersion)
        throw SchemaError("checkpoint: unsupported format version");
    if (!j.contains("model_config") || !j.contains("params") || !j.contains("ablation"))
        throw SchemaError("checkpoint: missing required sections");

    ModelConfig cfg = config_from_json(j["model_config"]);
    AblationMode mode = ablation_from_string(j["ablation"].get<std::string>());
    Model model(cfg, mode);

    const nlohmann::json& params = j["params"];
    ParamStore& ps = model.params();
    if (params.size() != static_cast<size_t>(ps.entry_count()))
        throw SchemaError("checkpoint: parameter set does not match the model layout");
    for (int i = 0; i < ps.entry_count(); ++i) {
        const ParamStore::Entry& e = ps.entry(i);
        if (!params.contains(e.name)) throw SchemaError("checkpoint: missing parameter " + e.name);
        const nlohmann::json& pj = params[e.name];
        std::vector<int> shape;
        std::vector<double> data;
        try {
            shape = pj.at("shape").get<std::vector<int>>();
            data = pj.at("data").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& ex) {
            throw SchemaError("checkpoint: bad entry for " + e.name + ": " + ex.what());
        }
        if (shape != e.shape) throw SchemaError("checkpoint: shape mismatch for " + e.name);
        if (data.size() != static_cast<size_t>(e.ref.size()))
            throw SchemaError("checkpoint: value count mismatch for " + e.name);
        auto dst = ps.values(e.ref);
        for (size_t k = 0; k < data.size(); ++k) {
            if (!std::isfinite(data[k])) throw SchemaError("checkpoint: non-finite value in " + e.name);
            dst[k] = data[k];
        }
    }
    return model;
}

} // namespace hapnet
