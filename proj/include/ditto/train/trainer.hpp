/// The training loop: strategy-driven sample construction, Adam with cosine
/// decay, per-epoch train/val history, best-validation checkpoint retention.
/// Fully deterministic under a fixed seed (ordered reductions throughout).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ditto/dataset.hpp"
#include "ditto/nn/model.hpp"
#include "ditto/train/adam.hpp"
#include "ditto/train/loss.hpp"
#include "ditto/train/schedule.hpp"

namespace ditto::train {

enum class Strategy { full, subsampled, bundled };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TrainingSchedule {
    Strategy strategy = Strategy::full;
    double alpha = 1.0;             // subsampled (and optionally bundled) draw fraction
    int lf = 1;                     // bundled look-forward window
    bool condition_on_offset = true;
    int train_horizon = 0;          // bundled: cap on steps seen in training (0 = all)
    int max_val_samples = 2048;     // validation subset cap (fixed draw across epochs)

    void validate() const;
};

struct EpochStats {
    int epoch;
    double train_loss;
    double val_loss;
    double lr;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val = 0.0;
    bool aborted = false;  // non-finite loss encountered; best params restored
};

/// One supervised sample: input snapshot `input_step` of trajectory `traj`,
/// target snapshot `target_step`, conditioning scalar `scalar`.
struct SampleRef {
    std::size_t traj;
    int input_step;
    int target_step;
    double scalar;
};

/// Sample lists for one epoch (exposed for the schedule identity tests).
std::vector<SampleRef> build_epoch_samples(const DatasetBundle& bundle, Split split,
                                           const TrainingSchedule& sched,
                                           std::uint64_t seed, int epoch);

/// Trains in place; on return the model holds the best-validation parameters.
TrainResult train(nn::Model& model, const DatasetBundle& bundle,
                  const TrainingSchedule& sched, const LossConfig& loss_cfg,
                  const OptimizerConfig& opt);

/// Mean relative-L2 loss of the model over a sample list (forward only).
double evaluate_samples(nn::Model& model, const DatasetBundle& bundle,
                        const std::vector<SampleRef>& samples, double eps, int batch_size);

}  // namespace ditto::train
