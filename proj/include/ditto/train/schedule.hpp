/// Training schedules: per-epoch sub-sampling (the fast "-s" variant),
/// temporal bundling, and the cosine learning-rate decay.
#pragma once

#include <cstdint>
#include <vector>

#include "ditto/pde.hpp"

namespace ditto::train {

/// Uniform-without-replacement per-trajectory index subsets S_m of {1..T},
/// with sum |S_m| = llround(alpha*M*T) and sizes balanced within +-1. Fresh
/// draws are obtained by passing a per-epoch seed.
std::vector<std::vector<int>> subsample_epoch(int M, int T, double alpha,
                                              std::uint64_t seed);

struct BundlingConfig {
    int lf = 1;   // look-forward window
    int nt = 1;   // training horizon in steps
    bool condition_on_offset = true;

    void validate() const;
};

/// One bundled sub-trajectory: input state x_start with targets
/// x_{start+1} .. x_{start+lf}, conditioned on offsets dt .. lf*dt.
struct SubTrajectory {
    int start = 0;
    int lf = 0;
};

/// Split a horizon of nt steps into nt - lf + 1 sub-trajectories.
std::vector<SubTrajectory> make_bundled_pairs(int nt, int lf);

/// lr0 * (1 + cos(pi * step / total)) / 2.
double cosine_lr(int step, int total, double lr0);

}  // namespace ditto::train
