/// Proper orthogonal decomposition reducer and the reduced-order forecasting
/// pipeline: decompose a gridded scalar time series into r modal
/// coefficients, train a 1-D conditioned operator on coefficient windows with
/// temporal bundling, roll out beyond the training horizon, and lift back to
/// field space for scoring.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "ditto/nn/model.hpp"
#include "ditto/rollout.hpp"
#include "ditto/tensor.hpp"
#include "ditto/train/adam.hpp"
#include "ditto/train/loss.hpp"

namespace ditto::pod {

struct PodBasis {
    Tensor mean;                      // (space)
    Tensor modes;                     // (r, space), orthonormal rows
    std::vector<double> eigenvalues;  // nonincreasing energies (squared singular values)

    std::size_t r() const { return modes.empty() ? 0 : modes.dim(0); }
    std::size_t space() const { return mean.size(); }
};

/// Snapshot-method POD of a (time x space) matrix: mean-center over time,
/// eigendecompose the Gram matrix, keep the top-r spatial structures.
/// If r exceeds the numerical rank it is reduced with a warning on stderr.
PodBasis compute_pod(const Tensor& snapshots, int r);

/// Coefficients of (field - mean) in the modal basis.
Tensor project(const PodBasis& basis, const Tensor& field);
/// mean + sum_i c_i * mode_i.
Tensor lift(const PodBasis& basis, const Tensor& coeffs);

/// Basis container I/O (same manifest + raw float32 conventions as datasets).
void save_basis(const PodBasis& basis, const std::filesystem::path& dir);
PodBasis load_basis(const std::filesystem::path& dir);

struct PodPipelineConfig {
    int r = 5;
    int lf = 365;
    int train_steps = 0;  // snapshots 0..train_steps form the training region
    double val_fraction = 0.2;  // tail fraction of training windows used for validation
    nn::ModelConfig model;      // grid/dimension are overridden to {r}
    train::OptimizerConfig opt;
    train::LossConfig loss;
    std::uint64_t seed = 0;
};

struct PodPipelineResult {
    PodBasis basis;
    std::unique_ptr<nn::Model> model;
    rollout::EvalReport report;   // field-space rel-L2 per extrapolated step
    double mean_extrapolation_error = 0.0;
    std::size_t n_windows = 0;    // training sub-trajectories (n_train_snapshots - lf)
};

/// series: (time x space) scalar field history. The basis is computed on the
/// training region only; the model is trained on coefficient windows of
/// length lf and rolled out from the end of the training region to the end
/// of the series.
PodPipelineResult pod_pipeline(const Tensor& series, const PodPipelineConfig& cfg);

}  // namespace ditto::pod
