/// Neural-network building blocks with hand-written forward/backward passes.
///
/// Layers cache what their backward pass needs, so a layer instance is used
/// by exactly one forward/backward pair at a time. All math is double
/// precision; parameters are snapped to the float32 grid at initialization
/// (and by the optimizer after each step) so checkpoints round-trip
/// bit-exactly.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ditto/rng.hpp"
#include "ditto/tensor.hpp"

namespace ditto::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(shape) {}
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual void collect(std::vector<Param*>& out) = 0;
};

/// Round every element to its nearest float32 value.
void snap_f32(Tensor& t);
/// Fill with N(0, std^2) draws, then snap to float32.
void init_normal(Tensor& t, Rng& rng, double std);

// ---------------------------------------------------------------------------
// Dense layer: (B, in) -> (B, out)
// ---------------------------------------------------------------------------
class Linear : public Layer {
public:
    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
           bool zero_init = false);

    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>& out) override;

    Param w;  // (out, in)
    Param b;  // (out)

private:
    std::size_t in_, out_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// d-dimensional convolution, kernel 1 or 3, stride 1 or 2, zero padding
// (k-1)/2. Input (B, Cin, S1[, S2[, S3]]).
// ---------------------------------------------------------------------------
class Conv : public Layer {
public:
    Conv(const std::string& name, int rank, std::size_t cin, std::size_t cout, int kernel,
         int stride, Rng& rng, bool zero_init = false);

    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>& out) override;

    Param w;  // (cout, cin * k^rank)
    Param b;  // (cout)

    std::size_t cin() const { return cin_; }
    std::size_t cout() const { return cout_; }

private:
    void build_tables(const std::vector<std::size_t>& spatial);
    Tensor forward_direct(Tensor x);
    Tensor backward_direct(const Tensor& gy);

    int rank_, k_, stride_;
    std::size_t cin_, cout_, taps_;
    std::size_t batch_ = 0;
    std::vector<std::size_t> in_spatial_, out_spatial_;
    std::size_t n_in_ = 0, n_out_ = 0;
    bool direct_ = false;  // large planes use the direct kernels
    // Per-tap input offsets (tap-major), -1 in the padding fringe.
    std::vector<std::ptrdiff_t> tap_offset_;
    Tensor patches_;  // im2col cache (cin*taps, batch*n_out), GEMM path
    Tensor ygemm_;    // GEMM scratch (batch*n_out, cout)
    Tensor x_;        // cached input, direct path
};

// ---------------------------------------------------------------------------
// Group normalization over (channels/groups, spatial) per sample.
// ---------------------------------------------------------------------------
class GroupNorm : public Layer {
public:
    GroupNorm(const std::string& name, std::size_t channels, int groups_requested);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>& out) override;

    Param gamma;  // (C)
    Param beta;   // (C)
    int groups;

    static int resolve_groups(std::size_t channels, int requested);

private:
    std::size_t channels_;
    Tensor xhat_;
    std::vector<double> inv_std_;
    std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------
class SiLU : public Layer {
public:
    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>&) override {}

private:
    Tensor x_;
};

class GELU : public Layer {
public:
    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>&) override {}

private:
    Tensor x_;
};

// ---------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling (no parameters).
// ---------------------------------------------------------------------------
class UpsampleNearest {
public:
    explicit UpsampleNearest(int rank) : rank_(rank) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    int rank_;
    std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Scaled dot-product attention over flattened feature maps.
//
// spatial mode: tokens are pixels (token width = channels), the attention
// matrix is n_pixels x n_pixels. channel mode: tokens are channels (token
// width = pixels), the matrix is n_channels x n_channels. Row-wise softmax
// is applied to Q K^T / sqrt(d) unless `softmax` is false, which reproduces
// the literal linear form.
// ---------------------------------------------------------------------------
enum class AttnMode { spatial, channel };

class AttentionCore {
public:
    AttentionCore(AttnMode mode, bool softmax) : mode_(mode), softmax_(softmax) {}

    /// q, k, v: (B, C, N). Returns (B, C, N).
    Tensor forward(Tensor q, Tensor k, Tensor v);
    /// Returns gradients for q, k, v.
    void backward(const Tensor& go, Tensor& gq, Tensor& gk, Tensor& gv);

private:
    AttnMode mode_;
    bool softmax_;
    Tensor q_, k_, v_, attn_;  // attn rows cached post-softmax
};

/// Stateless helper for tests and one-off evaluation.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, AttnMode mode,
                      bool softmax);

class AttentionBlock : public Layer {
public:
    AttentionBlock(const std::string& name, std::size_t channels, AttnMode mode,
                   bool softmax, int norm_groups, Rng& rng);

    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>& out) override;

private:
    std::size_t channels_;
    GroupNorm norm_;
    Conv to_q_, to_k_, to_v_, proj_;  // 1x1 convs; proj is zero-initialized
    AttentionCore core_;
    std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Conditioned residual block: two conv-normalize-activate stages; after the
// first stage features are scaled channel-wise by (1 + s), where s is this
// block's affine projection of the shared conditioning vector. s = 0 reduces
// the block to an unconditioned residual block.
// ---------------------------------------------------------------------------
class ConditionedResBlock : public Layer {
public:
    ConditionedResBlock(const std::string& name, int rank, std::size_t cin, std::size_t cout,
                        std::size_t cond_width, int norm_groups, bool cond_residual,
                        Rng& rng);

    /// g: shared conditioning features (B, cond_width), or nullptr when the
    /// block is unconditioned.
    Tensor forward(Tensor x, const Tensor* g);
    /// dg accumulates the gradient w.r.t. g (same shape), when conditioned.
    Tensor backward(const Tensor& gy, Tensor* dg);
    void collect(std::vector<Param*>& out) override;

    std::size_t cout() const { return conv1_.cout(); }
    bool conditioned() const { return cond_proj_.has_value(); }

    // Test hook: bypass activations and norms to expose the linear structure.
    bool test_linear_mode = false;

private:
    Conv conv1_;
    GroupNorm gn1_;
    SiLU act1_;
    Conv conv2_;
    GroupNorm gn2_;
    SiLU act2_;
    std::optional<Conv> skip_;
    std::optional<Linear> cond_proj_;
    bool cond_residual_;

    Tensor h_pre_scale_, scale_;  // caches for the conditioning backward
};

// ---------------------------------------------------------------------------
// Gate block for the skip connections (ditto_gate): a residual conv block
// whose final convolution is zero-initialized, so a freshly built gate is
// exactly the identity.
// ---------------------------------------------------------------------------
class GateBlock : public Layer {
public:
    GateBlock(const std::string& name, int rank, std::size_t channels, int norm_groups,
              Rng& rng);

    Tensor forward(Tensor x);
    Tensor backward(const Tensor& gy);
    void collect(std::vector<Param*>& out) override;

private:
    Conv conv1_;
    GroupNorm gn_;
    SiLU act_;
    Conv conv2_;
};

}  // namespace ditto::nn
