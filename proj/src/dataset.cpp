#include "ditto/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "ditto/grf.hpp"
#include "ditto/io.hpp"
#include "ditto/rng.hpp"

namespace ditto {

using json = nlohmann::json;

namespace {
constexpr int kDatasetSchemaVersion = 1;
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw std::invalid_argument("unknown split tag: " + s);
}

std::vector<std::size_t> DatasetBundle::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

void DatasetBundle::validate() const {
    if (trajectories.size() != split.size() || trajectories.size() != seeds.size())
        throw std::invalid_argument("DatasetBundle: per-trajectory arrays out of sync");
    for (const auto& t : trajectories) t.validate();
    if (trajectories.empty()) return;
    const auto& t0 = trajectories.front();
    for (const auto& t : trajectories) {
        if (t.times != t0.times)
            throw std::invalid_argument("DatasetBundle: trajectories disagree on times");
        if (t.fields.shape() != t0.fields.shape())
            throw std::invalid_argument("DatasetBundle: trajectories disagree on grid");
    }
}

Tensor initial_condition(const PdeConfig& config, std::uint64_t run_seed,
                         std::size_t index, std::uint64_t* out_seed) {
    const std::uint64_t seed = mix_seed(run_seed, index);
    if (out_seed) *out_seed = seed;

    switch (config.kind) {
        case PdeKind::burgers: {
            GrfSpec spec{1, 625.0, 5.0, 2.0, config.grid[0]};
            return sample_grf(spec, seed);
        }
        case PdeKind::navier_stokes: {
            // N(0, 7^{3/2} (-Lap + 49 I)^{-5/2})
            GrfSpec spec{2, std::pow(7.0, 1.5), 7.0, 2.5, config.grid[0]};
            return sample_grf(spec, seed);
        }
        case PdeKind::wave2d:
        case PdeKind::wave3d: {
            // Gaussian source centered on an interior node drawn uniformly.
            const auto axes = make_grid_axes(config);
            Rng rng(seed);
            std::vector<double> center;
            for (const auto& ax : axes) {
                const std::size_t interior = ax.size() - 2;
                center.push_back(ax[1 + rng.below(interior)]);
            }
            return gaussian_source(center, axes);
        }
    }
    throw std::logic_error("initial_condition: unreachable");
}

namespace {

Trajectory solve_for(const PdeConfig& config, const Tensor& ic) {
    switch (config.kind) {
        case PdeKind::burgers: return solve_burgers(config, ic);
        case PdeKind::navier_stokes: return solve_navier_stokes(config, ic);
        case PdeKind::wave2d:
        case PdeKind::wave3d: return solve_wave(config, ic);
    }
    throw std::logic_error("solve_for: unreachable");
}

}  // namespace

DatasetBundle generate_dataset(const PdeConfig& config, int count, std::uint64_t seed,
                               int jobs) {
    config.validate();
    if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
    jobs = std::max(1, jobs);

    DatasetBundle bundle;
    bundle.config = config;
    bundle.trajectories.resize(static_cast<std::size_t>(count));
    bundle.seeds.resize(static_cast<std::size_t>(count));
    bundle.split.assign(static_cast<std::size_t>(count), Split::train);

    // Each (seed, index) job is independent; workers write disjoint slots so
    // the merged bundle is identical to a serial run.
    const auto worker = [&](int w) {
        for (int i = w; i < count; i += jobs) {
            const auto idx = static_cast<std::size_t>(i);
            std::uint64_t traj_seed = 0;
            const Tensor ic = initial_condition(config, seed, idx, &traj_seed);
            Trajectory t = solve_for(config, ic);
            t.seed = traj_seed;
            bundle.trajectories[idx] = std::move(t);
            bundle.seeds[idx] = traj_seed;
        }
    };

    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }
    return bundle;
}

std::vector<Trajectory> regenerate_at_resolution(const DatasetBundle& bundle,
                                                 const std::vector<std::size_t>& which,
                                                 int n_steps) {
    PdeConfig fine = bundle.config;
    fine.n_steps = n_steps;
    std::vector<Trajectory> out;
    out.reserve(which.size());
    for (std::size_t m : which) {
        const auto& full_shape = bundle.trajectories.at(m).fields.shape();
        Tensor ic(std::vector<std::size_t>(full_shape.begin() + 1, full_shape.end()));
        std::copy(bundle.trajectories[m].snapshot(0),
                  bundle.trajectories[m].snapshot(0) + bundle.trajectories[m].field_size(),
                  ic.data());
        Trajectory t = solve_for(fine, ic);
        t.seed = bundle.seeds[m];
        out.push_back(std::move(t));
    }
    return out;
}

void split_dataset(DatasetBundle& bundle, const std::array<double, 3>& ratios,
                   std::uint64_t seed) {
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw std::invalid_argument("split_dataset: negative ratio");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: ratios must sum to 1");

    const std::size_t m = bundle.size();
    std::size_t nonzero = 0;
    for (double r : ratios)
        if (r > 0.0) ++nonzero;
    if (m < nonzero)
        throw std::invalid_argument("split_dataset: fewer trajectories than split buckets");

    // Cumulative rounding makes the counts sum to m exactly (80:10:10 of 1000
    // gives 800/100/100).
    std::array<std::size_t, 3> counts{};
    double acc = 0.0;
    std::size_t taken = 0;
    for (int b = 0; b < 3; ++b) {
        acc += ratios[static_cast<std::size_t>(b)];
        const auto upto = static_cast<std::size_t>(std::llround(acc * static_cast<double>(m)));
        counts[static_cast<std::size_t>(b)] = upto - taken;
        taken = upto;
    }
    // Every nonzero-ratio bucket gets at least one trajectory.
    for (int b = 0; b < 3; ++b) {
        if (ratios[static_cast<std::size_t>(b)] > 0.0 && counts[static_cast<std::size_t>(b)] == 0) {
            const auto big = static_cast<std::size_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            --counts[big];
            ++counts[static_cast<std::size_t>(b)];
        }
    }

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x51));
    rng.shuffle(order);

    bundle.split.assign(m, Split::train);
    std::size_t pos = 0;
    const Split tags[3] = {Split::train, Split::val, Split::test};
    for (int b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < counts[static_cast<std::size_t>(b)]; ++i)
            bundle.split[order[pos++]] = tags[b];
}

PairSet assemble_pairs(const DatasetBundle& bundle, std::optional<Split> only) {
    bundle.validate();
    PairSet ps;
    ps.bundle = &bundle;
    const std::size_t t_steps = bundle.trajectories.empty()
                                    ? 0
                                    : bundle.trajectories.front().n_snapshots() - 1;
    for (std::size_t m = 0; m < bundle.size(); ++m) {
        if (only && bundle.split[m] != *only) continue;
        for (std::size_t n = 1; n <= t_steps; ++n) ps.items.push_back({m, n});
    }
    return ps;
}

double dataset_std(const DatasetBundle& bundle, Split split) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < bundle.size(); ++m) {
        if (bundle.split[m] != split) continue;
        const Tensor& f = bundle.trajectories[m].fields;
        for (std::size_t i = 0; i < f.size(); ++i) sum += f[i];
        count += f.size();
    }
    if (count == 0) throw std::invalid_argument("dataset_std: empty split");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t m = 0; m < bundle.size(); ++m) {
        if (bundle.split[m] != split) continue;
        const Tensor& f = bundle.trajectories[m].fields;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double d = f[i] - mean;
            ss += d * d;
        }
    }
    return std::sqrt(ss / static_cast<double>(count));
}

void NoiseConfig::validate() const {
    if (gamma < 0.0) throw std::invalid_argument("NoiseConfig: gamma must be >= 0");
    if (sigma_d < 0.0) throw std::invalid_argument("NoiseConfig: sigma_d must be >= 0");
}

Tensor inject_noise(const Tensor& fields, const NoiseConfig& cfg, std::uint64_t stream) {
    cfg.validate();
    Tensor out = fields;
    if (cfg.gamma == 0.0) return out;
    Rng rng(mix_seed(cfg.seed, stream));
    const double sd = cfg.gamma * cfg.sigma_d;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sd * rng.gaussian();
    return out;
}

void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    std::filesystem::create_directories(dir);

    json manifest;
    manifest["schema_version"] = kDatasetSchemaVersion;
    manifest["kind"] = to_string(bundle.config.kind);
    manifest["viscosity"] = bundle.config.viscosity;
    manifest["t_final"] = bundle.config.t_final;
    manifest["n_steps"] = bundle.config.n_steps;
    manifest["grid"] = bundle.config.grid;
    manifest["forcing_id"] = bundle.config.forcing_id;
    manifest["wave_speed_id"] = bundle.config.wave_speed_id;
    manifest["cfl_safety"] = bundle.config.cfl_safety;
    if (!bundle.trajectories.empty())
        manifest["times"] = bundle.trajectories.front().times;

    json trajs = json::array();
    for (std::size_t m = 0; m < bundle.size(); ++m) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%05zu.f32", m);
        const auto payload = tensor_to_f32(bundle.trajectories[m].fields);
        atomic_write(dir / name, payload);
        json t;
        t["file"] = name;
        t["split"] = to_string(bundle.split[m]);
        t["seed"] = bundle.seeds[m];
        t["shape"] = bundle.trajectories[m].fields.shape();
        t["checksum"] = fnv1a(payload.data(), payload.size());
        trajs.push_back(std::move(t));
    }
    manifest["trajectories"] = std::move(trajs);
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetBundle load_dataset(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text(dir / "manifest.json"));
    if (manifest.at("schema_version").get<int>() != kDatasetSchemaVersion)
        throw std::runtime_error(
            "load_dataset: unsupported schema version " +
            std::to_string(manifest.at("schema_version").get<int>()) + " (expected " +
            std::to_string(kDatasetSchemaVersion) + "); regenerate the dataset");

    DatasetBundle bundle;
    bundle.config.kind = pde_kind_from_string(manifest.at("kind").get<std::string>());
    bundle.config.viscosity = manifest.at("viscosity").get<double>();
    bundle.config.t_final = manifest.at("t_final").get<double>();
    bundle.config.n_steps = manifest.at("n_steps").get<int>();
    bundle.config.grid = manifest.at("grid").get<std::vector<int>>();
    bundle.config.forcing_id = manifest.at("forcing_id").get<std::string>();
    bundle.config.wave_speed_id = manifest.at("wave_speed_id").get<std::string>();
    bundle.config.cfl_safety = manifest.at("cfl_safety").get<double>();

    const auto times = manifest.at("times").get<std::vector<double>>();
    const auto axes = make_grid_axes(bundle.config);

    for (const auto& t : manifest.at("trajectories")) {
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        const auto payload = read_bytes(dir / t.at("file").get<std::string>());
        if (t.contains("checksum") &&
            t.at("checksum").get<std::uint64_t>() != fnv1a(payload.data(), payload.size()))
            throw std::runtime_error("load_dataset: checksum mismatch for " +
                                     t.at("file").get<std::string>());
        Trajectory traj;
        traj.fields = tensor_from_f32(payload, shape);
        traj.times = times;
        traj.grid_axes = axes;
        traj.seed = t.at("seed").get<std::uint64_t>();
        bundle.trajectories.push_back(std::move(traj));
        bundle.split.push_back(split_from_string(t.at("split").get<std::string>()));
        bundle.seeds.push_back(t.at("seed").get<std::uint64_t>());
    }
    bundle.validate();
    return bundle;
}

}  // namespace ditto
