/// Dataset assembly: trajectory bundles with splits and seed provenance,
/// supervised pair indexing, noise injection, and the on-disk container
/// (manifest.json + one raw little-endian float32 file per trajectory).
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ditto/pde.hpp"
#include "ditto/tensor.hpp"

namespace ditto {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetBundle {
    PdeConfig config;
    std::vector<Trajectory> trajectories;
    std::vector<Split> split;          // per trajectory
    std::vector<std::uint64_t> seeds;  // per trajectory

    std::size_t size() const { return trajectories.size(); }
    std::vector<std::size_t> indices_of(Split s) const;
    void validate() const;
};

/// Generate `count` trajectories for the config, one independent GRF or
/// source-center draw per trajectory (seed mixed from `seed` and the
/// trajectory index). `jobs` > 1 fans trajectories out across threads;
/// results are identical to the serial run.
DatasetBundle generate_dataset(const PdeConfig& config, int count, std::uint64_t seed,
                               int jobs = 1);

/// Re-run the solver for selected trajectories at a different snapshot count
/// (same seeds, same initial conditions).
std::vector<Trajectory> regenerate_at_resolution(const DatasetBundle& bundle,
                                                 const std::vector<std::size_t>& which,
                                                 int n_steps);

/// Initial condition for trajectory `index` of a generation run.
Tensor initial_condition(const PdeConfig& config, std::uint64_t run_seed,
                         std::size_t index, std::uint64_t* out_seed = nullptr);

/// Trajectory-level random split. Ratios must sum to 1 (1e-9); deterministic
/// under seed. Rejects when fewer trajectories than nonzero ratio buckets.
void split_dataset(DatasetBundle& bundle, const std::array<double, 3>& ratios,
                   std::uint64_t seed);

/// Supervised pairs X = {(x_0^m, t_n)}, Y = {x_n^m}, n = 1..T (t_0 excluded).
struct PairSet {
    const DatasetBundle* bundle = nullptr;
    struct Item {
        std::size_t traj;  // m
        std::size_t step;  // n, in 1..T
    };
    std::vector<Item> items;

    std::size_t size() const { return items.size(); }
    const double* input(std::size_t i) const {
        return bundle->trajectories[items[i].traj].snapshot(0);
    }
    const double* target(std::size_t i) const {
        return bundle->trajectories[items[i].traj].snapshot(items[i].step);
    }
    double time(std::size_t i) const {
        return bundle->trajectories[items[i].traj].times[items[i].step];
    }
};

PairSet assemble_pairs(const DatasetBundle& bundle,
                       std::optional<Split> only = std::nullopt);

/// Standard deviation over every element of every trajectory in a split
/// (single scalar; the reduction runs over all axes).
double dataset_std(const DatasetBundle& bundle, Split split);

struct NoiseConfig {
    double gamma = 0.0;    // noise level as a fraction of sigma_d
    double sigma_d = 1.0;  // dataset standard deviation
    std::uint64_t seed = 0;

    void validate() const;
};

/// x -> x + gamma * N(0, sigma_d^2), i.i.d. per element. gamma = 0 returns
/// the input bit-identically (no RNG draws). `stream` selects an independent
/// noise stream (e.g. the trajectory id) so concatenating datasets commutes
/// with noising.
Tensor inject_noise(const Tensor& fields, const NoiseConfig& cfg, std::uint64_t stream = 0);

/// Container I/O. The directory holds manifest.json plus traj_NNNN.f32 files,
/// shape (T+1, n1[, n2[, n3]]) row-major. Writes are atomic.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_dataset(const std::filesystem::path& dir);

}  // namespace ditto
