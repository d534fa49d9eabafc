/// Adam optimizer with global-norm gradient clipping. After every step the
/// parameters are snapped back to the float32 grid so checkpoints stay
/// bit-exact round-trips.
#pragma once

#include <cstdint>
#include <vector>

#include "ditto/nn/layers.hpp"

namespace ditto::train {

struct OptimizerConfig {
    double lr0 = 1e-3;
    int epochs = 100;
    int batch_size = 32;
    int total_steps = 0;  // 0: derived from epochs * steps-per-epoch
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;  // 0 disables clipping
    std::uint64_t seed = 0;

    void validate() const;
};

class Adam {
public:
    Adam(std::vector<nn::Param*>& params, const OptimizerConfig& cfg);

    /// Clips gradients (global norm), applies one Adam update at the given
    /// learning rate, and snaps parameters to float32.
    void step(double lr);

    int steps_taken() const { return t_; }
    /// Global gradient norm before clipping on the last step.
    double last_grad_norm() const { return last_norm_; }

private:
    std::vector<nn::Param*>& params_;
    OptimizerConfig cfg_;
    std::vector<Tensor> m_, v_;
    int t_ = 0;
    double last_norm_ = 0.0;
};

}  // namespace ditto::train
