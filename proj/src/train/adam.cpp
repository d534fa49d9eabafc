#include "ditto/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ditto::train {

void OptimizerConfig::validate() const {
    if (lr0 <= 0.0) throw std::invalid_argument("OptimizerConfig: lr0 must be positive");
    if (epochs < 1) throw std::invalid_argument("OptimizerConfig: epochs must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("OptimizerConfig: batch_size must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("OptimizerConfig: betas must lie in [0, 1)");
    if (clip_norm < 0.0)
        throw std::invalid_argument("OptimizerConfig: clip_norm must be >= 0");
}

Adam::Adam(std::vector<nn::Param*>& params, const OptimizerConfig& cfg)
    : params_(params), cfg_(cfg) {
    cfg.validate();
    for (const auto* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step(double lr) {
    // Ordered reduction for the global norm keeps runs bit-reproducible.
    double sq = 0.0;
    for (const auto* p : params_)
        for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
    last_norm_ = std::sqrt(sq);
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0 && last_norm_ > cfg_.clip_norm)
        scale = cfg_.clip_norm / last_norm_;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = scale * p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] = static_cast<double>(static_cast<float>(
                p.value[i] - lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps)));
        }
    }
}

}  // namespace ditto::train
