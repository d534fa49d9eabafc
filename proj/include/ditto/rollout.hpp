/// Inference and evaluation: continuous-time queries, bundled autoregressive
/// rollouts, zero-shot temporal super-resolution, extrapolation error curves,
/// and noise-robustness sweeps.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ditto/dataset.hpp"
#include "ditto/nn/model.hpp"

namespace ditto::rollout {

struct EvalRow {
    std::string scenario;
    std::string variant;
    std::string axis;    // "nt_test", "step", "gamma", ...
    double axis_value;
    double mean;
    double stddev;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

/// ||truth - pred||_2 / ||truth||_2. Rejects zero-norm truth.
double rel_l2_error(const Tensor& pred, const Tensor& truth);

/// Single continuous-time query (no time stepping). t may be any
/// nonnegative real, not restricted to training timestamps.
Tensor query(nn::Model& model, const Tensor& x0, double t);

struct RolloutConfig {
    int lf = 1;            // leap size
    int horizon = 1;       // total steps to produce
    int train_horizon = 0; // informational: last step seen in training
    double dt = 1.0;       // physical step between consecutive outputs
    bool condition_on_offset = true;

    void validate() const;
};

struct RolloutResult {
    Tensor states;  // (horizon+1, spatial...), states[0] = x0
    int feedback_steps = 0;          // bundle iterations = ceil(horizon/lf)
    std::optional<int> truncated_at; // first non-finite step, if any
};

/// Iterate: query offsets dt..lf*dt from the current state, emit all
/// intermediate predictions, feed the lf-th prediction back.
RolloutResult rollout_bundled(nn::Model& model, const Tensor& x0, const RolloutConfig& cfg);

/// Temporal super-resolution protocol. fine_refs hold the reference
/// trajectories at the finest resolution; each requested N_t must divide it.
/// DiTTO variants are queried directly at the snapshot times; the baseline
/// U-Net (whose forward ignores the scalar) is rolled out one step at a time
/// at the test resolution.
EvalReport eval_superresolution(nn::Model& model, const std::vector<Trajectory>& fine_refs,
                                const std::vector<int>& nt_tests,
                                const std::string& scenario);

/// Per-step relative-L2 error curve, mean +- std over reference trajectories.
/// References must extend to cfg.horizon.
EvalReport eval_extrapolation(nn::Model& model, const std::vector<Trajectory>& refs,
                              const RolloutConfig& cfg, const std::string& scenario);

/// Noise robustness: gamma-scaled Gaussian noise on the test inputs only,
/// clean targets, averaged over `n_seeds` independent noise draws.
EvalReport noise_sweep(nn::Model& model, const std::vector<Trajectory>& refs,
                       const std::vector<double>& gammas, double sigma_d,
                       std::uint64_t seed, int n_seeds, const std::string& scenario);

}  // namespace ditto::rollout
