#include "ditto/nn/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace ditto::nn {

void EmbeddingSpec::validate() const {
    if (d_emb < 2 || d_emb % 2 != 0)
        throw std::invalid_argument("EmbeddingSpec: d_emb must be even and >= 2");
    if (mlp_hidden < 2)
        throw std::invalid_argument("EmbeddingSpec: mlp_hidden must be >= 2");
}

std::vector<double> embed_scalar(double t, int d_emb) {
    if (!(t >= 0.0) || !std::isfinite(t))
        throw std::invalid_argument("embed_scalar: scalar must be finite and >= 0");
    if (d_emb < 2 || d_emb % 2 != 0)
        throw std::invalid_argument("embed_scalar: d_emb must be even and >= 2");
    std::vector<double> e(static_cast<std::size_t>(d_emb));
    for (int i = 0; i < d_emb / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(d_emb));
        e[static_cast<std::size_t>(2 * i)] = std::sin(t * freq);
        e[static_cast<std::size_t>(2 * i) + 1] = std::cos(t * freq);
    }
    return e;
}

Tensor embed_batch(const std::vector<double>& ts, int d_emb) {
    Tensor e({ts.size(), static_cast<std::size_t>(d_emb)});
    for (std::size_t b = 0; b < ts.size(); ++b) {
        const auto row = embed_scalar(ts[b], d_emb);
        for (std::size_t j = 0; j < row.size(); ++j) e.at(b, j) = row[j];
    }
    return e;
}

ConditioningHead::ConditioningHead(const std::string& name, const EmbeddingSpec& spec,
                                   Rng& rng)
    : spec_(spec),
      l1_(name + ".l1", static_cast<std::size_t>(spec.d_emb),
          static_cast<std::size_t>(spec.mlp_hidden), rng),
      l2_(name + ".l2", static_cast<std::size_t>(spec.mlp_hidden),
          static_cast<std::size_t>(spec.mlp_hidden), rng) {
    spec.validate();
}

Tensor ConditioningHead::forward(const Tensor& e) {
    Tensor h = l1_.forward(e);
    h = gelu_.forward(h);
    return l2_.forward(h);
}

Tensor ConditioningHead::backward(const Tensor& gh) {
    Tensor g = l2_.backward(gh);
    g = gelu_.backward(g);
    return l1_.backward(g);
}

void ConditioningHead::collect(std::vector<Param*>& out) {
    l1_.collect(out);
    l2_.collect(out);
}

}  // namespace ditto::nn
