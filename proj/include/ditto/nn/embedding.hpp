/// Sinusoidal scalar embedding and the shared conditioning head.
///
/// embed_scalar maps a nonnegative scalar t to interleaved features:
/// index 2i holds sin(t / 10000^(2i/d_emb)), index 2i+1 the matching cosine.
/// The head is affine -> GELU -> affine; each conditioned block then applies
/// its own learned projection to its channel width (see ConditionedResBlock).
#pragma once

#include <vector>

#include "ditto/nn/layers.hpp"
#include "ditto/tensor.hpp"

namespace ditto::nn {

struct EmbeddingSpec {
    int d_emb = 32;       // embedding width, must be even
    int mlp_hidden = 128; // hidden width of the conditioning head

    void validate() const;
};

/// Embed one scalar; throws on negative or non-finite input.
std::vector<double> embed_scalar(double t, int d_emb);

/// Embed a batch of scalars into (B, d_emb).
Tensor embed_batch(const std::vector<double>& ts, int d_emb);

class ConditioningHead : public Layer {
public:
    ConditioningHead(const std::string& name, const EmbeddingSpec& spec, Rng& rng);

    /// e: (B, d_emb) -> shared conditioning features (B, mlp_hidden).
    Tensor forward(const Tensor& e);
    Tensor backward(const Tensor& gh);
    void collect(std::vector<Param*>& out) override;

    int out_width() const { return spec_.mlp_hidden; }

private:
    EmbeddingSpec spec_;
    Linear l1_;
    GELU gelu_;
    Linear l2_;
};

}  // namespace ditto::nn
