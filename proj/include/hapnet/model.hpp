#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hapnet/attention.hpp"
#include "hapnet/capsules.hpp"
#include "hapnet/param_store.hpp"
#include "hapnet/tape.hpp"
#include "hapnet/vec.hpp"

namespace hapnet {

struct ModelConfig {
    int d = 25;            // subject feature dimension
    int n_e = 3;           // number of known event types
    int n_u = 5;           // feature capsules
    int n_s = 5;           // event capsules per event
    int n_v = 5;           // cluster capsules (must equal n_s)
    int n_z = 5;           // outcome capsules
    int h = 8;             // capsule dimension
    int routing_iters = 3;
    int heads = 3;         // attention heads
    double beta = 0.1;     // reconstruction loss weight
    int head_hidden = 32;  // regression head hidden width
    int decoder_hidden = 64;
    uint64_t seed = 1;

    int zbar_len() const { return n_z * h; }
    void validate() const; // ConfigError on out-of-range fields
};

enum class AblationMode { full, no_paaa, no_recon };

std::string to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& s); // ConfigError on unknown token

// Named views into the parameter store, grouped by pipeline stage.
struct HapNetParams {
    FeatureLayerParams feature;
    std::vector<RoutingParams> events; // one routing bank per event type
    AttentionParams attention;
    RoutingParams outcome;
    ParamRef head_W0, head_b0, head_W1, head_b1;
    ParamRef dec_W0, dec_b0, dec_W1, dec_b1;
};

// Full pipeline: features -> feature capsules -> per-event capsules ->
// cluster capsules (attention) -> outcome capsules -> flatten -> head.
// The reconstruction decoder runs off the flattened outcome vector.
class Model {
public:
    Model(ModelConfig config, AblationMode mode);

    const ModelConfig& config() const { return config_; }
    AblationMode mode() const { return mode_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const HapNetParams& layout() const { return layout_; }

    struct ForwardVars {
        Var yhat; // dim 1
        Var zbar; // dim n_z * h
        Var x;    // the input leaf, for reconstruction loss
    };
    ForwardVars forward_t(Tape& t, std::span<const double> x, const EventCluster& cluster) const;
    Var reconstruct_t(Tape& t, Var zbar) const;

    // (yhat - y)^2 minus beta * cos(xhat, x); the decoder subgraph is built
    // only when the mode and beta call for it
    Var record_loss_t(Tape& t, std::span<const double> x, const EventCluster& cluster, double y) const;

    struct Prediction {
        double yhat = 0.0;
        Vec zbar;
    };
    Prediction predict(const Vec& x, const EventCluster& cluster) const;
    Vec reconstruct(const Vec& zbar) const;

    bool reconstruction_active() const { return mode_ != AblationMode::no_recon && config_.beta != 0.0; }

private:
    void init_params();

    ModelConfig config_;
    AblationMode mode_;
    ParamStore store_;
    HapNetParams layout_;
};

// One aligned sample for the composite loss.
struct LossSample {
    double yhat = 0.0;
    double y = 0.0;
    Vec xhat;
    Vec x;
};

// L = mean((yhat - y)^2) - beta * mean(cos(xhat, x)); ContractError on empty
double loss_total(std::span<const LossSample> batch, double beta);

// checkpoint round trip: config + ablation + every named parameter
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace hapnet
