/// The conditioned U-Net operator and its variants.
///
/// Variants:
///   ditto         - d-dimensional conditioned U-Net with spatial/channel
///                   attention; the conditioning scalar (time, or any other
///                   scalar) is embedded sinusoidally, passed through the
///                   conditioning head, and injected into every ResNet block.
///   ditto_point   - same topology with 1-D convolutions over a point list;
///                   spatial structure enters through per-axis sinusoidal
///                   positional codes summed into a d_emb-wide channel block.
///   ditto_gate    - ditto plus a convolutional gate on every encoder->decoder
///                   skip connection (identity at initialization).
///   baseline_unet - the same U-Net with no conditioning wired in; its output
///                   is exactly independent of the scalar input.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ditto/nn/embedding.hpp"
#include "ditto/nn/layers.hpp"

namespace ditto::nn {

enum class Variant { ditto, ditto_point, ditto_gate, baseline_unet };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
    Variant variant = Variant::ditto;
    int dimension = 1;
    std::vector<int> grid = {128};   // spatial shape the model is built for
    int levels = 4;
    int base_channels = 32;
    std::vector<int> channel_mults;  // per level; defaults to {1,2,2,...}
    int res_blocks_per_level = 2;
    std::vector<int> attention_levels;  // defaults to {levels-1}
    bool use_attention = true;
    bool attention_softmax = true;   // false reproduces the literal QK^T/sqrt(d) V form
    int norm_groups = 8;
    int d_emb = 32;
    int mlp_hidden = 128;
    double time_scale = 1.0;         // scalar is multiplied by this before embedding
    bool conditioning_residual = true;  // h * (1+s); false gives the pure h * s form
    std::string conditioning_scalar_name = "time";
    double point_coord_scale = 100.0;

    int channels_at(int level) const;
    bool attention_at(int level) const;
    bool conditioned() const { return variant != Variant::baseline_unet; }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return cfg_; }
    std::vector<Param*>& params() { return params_; }
    const std::vector<Param*>& params() const { return params_; }
    std::size_t param_count() const;
    void zero_grad();

    /// Predict fields for a batch of initial conditions (B, S...) and one
    /// scalar per sample. Output shape equals input shape. Grid coordinates,
    /// normalized to [0,1] per axis, are concatenated internally.
    Tensor forward(const Tensor& x0, const std::vector<double>& scalars);

    /// Convenience single-sample form.
    Tensor forward_one(const Tensor& x0, double scalar);

    /// Point-cloud path (ditto_point): values (B, N), coords (N, d).
    /// N is padded internally to a multiple of 2^(levels-1) and cropped on
    /// output.
    Tensor point_forward(const Tensor& values, const Tensor& coords,
                         const std::vector<double>& scalars);

    /// Backpropagate from d(loss)/d(output); accumulates parameter gradients
    /// and returns d(loss)/d(x0).
    Tensor backward(const Tensor& gy);

    /// Parameter values snapshot/restore (used for best-checkpoint retention).
    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& vals);

    /// Positional code block for a coordinate list (N, d) -> (d_emb, N).
    Tensor positional_code(const Tensor& coords) const;

private:
    struct LevelBlocks {
        std::vector<ConditionedResBlock> res;
        std::optional<AttentionBlock> attn_sp, attn_ch;
    };

    Tensor forward_assembled(const Tensor& input, const std::vector<double>& scalars);
    Tensor assemble_grid_input(const Tensor& x0) const;

    ModelConfig cfg_;
    int rank_ = 1;  // convolution rank (1 for ditto_point)

    std::optional<ConditioningHead> cond_head_;
    std::optional<Conv> stem_;
    std::vector<LevelBlocks> enc_;
    std::vector<Conv> down_;  // levels-1 strided convs
    std::optional<ConditionedResBlock> mid1_, mid2_;
    std::optional<AttentionBlock> mid_sp_, mid_ch_;
    std::vector<GateBlock> gates_;  // per level (ditto_gate only)
    std::vector<LevelBlocks> dec_;
    std::vector<UpsampleNearest> up_nn_;
    std::vector<Conv> up_conv_;  // levels-1
    std::optional<GroupNorm> out_gn_;
    SiLU out_act_;
    std::optional<Conv> out_conv_;

    std::vector<Param*> params_;

    // forward caches
    std::vector<Tensor> skips_;
    Tensor gvec_, dgvec_;
    std::vector<std::size_t> x0_shape_;
    std::size_t point_n_ = 0, point_pad_ = 0;
    bool point_path_ = false;
};

/// Deterministic construction (build_model in the artifact's terminology).
std::unique_ptr<Model> build_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace ditto::nn
