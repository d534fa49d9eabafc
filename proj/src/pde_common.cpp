#include "ditto/pde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ditto {

std::string to_string(PdeKind k) {
    switch (k) {
        case PdeKind::burgers: return "burgers";
        case PdeKind::navier_stokes: return "ns";
        case PdeKind::wave2d: return "wave2d";
        case PdeKind::wave3d: return "wave3d";
    }
    return "?";
}

PdeKind pde_kind_from_string(const std::string& s) {
    if (s == "burgers") return PdeKind::burgers;
    if (s == "ns" || s == "navier_stokes") return PdeKind::navier_stokes;
    if (s == "wave2d") return PdeKind::wave2d;
    if (s == "wave3d") return PdeKind::wave3d;
    throw std::invalid_argument("unknown PDE kind: " + s);
}

void PdeConfig::validate() const {
    if (t_final <= 0.0) throw std::invalid_argument("PdeConfig: t_final must be positive");
    if (n_steps < 1) throw std::invalid_argument("PdeConfig: n_steps must be >= 1");
    if (viscosity < 0.0) throw std::invalid_argument("PdeConfig: viscosity must be >= 0");
    if (cfl_safety <= 0.0 || cfl_safety > 1.0)
        throw std::invalid_argument("PdeConfig: cfl_safety must be in (0,1]");
    const int want_dim = kind == PdeKind::burgers        ? 1
                         : kind == PdeKind::navier_stokes ? 2
                         : kind == PdeKind::wave2d        ? 2
                                                          : 3;
    if (dimension() != want_dim)
        throw std::invalid_argument("PdeConfig: grid rank does not match PDE kind");
    for (int n : grid)
        if (n < 4) throw std::invalid_argument("PdeConfig: grid extents must be >= 4");
}

void Trajectory::validate() const {
    if (times.empty()) throw std::invalid_argument("Trajectory: no snapshots");
    if (times.front() != 0.0)
        throw std::invalid_argument("Trajectory: first time must be exactly 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("Trajectory: times must be strictly increasing");
    if (fields.rank() < 2 || fields.dim(0) != times.size())
        throw std::invalid_argument("Trajectory: field tensor shape mismatch");
    if (!fields.all_finite())
        throw std::invalid_argument("Trajectory: field contains NaN/Inf");
}

std::vector<std::vector<double>> make_grid_axes(const PdeConfig& config) {
    const bool wave = config.kind == PdeKind::wave2d || config.kind == PdeKind::wave3d;
    std::vector<std::vector<double>> axes;
    for (int n : config.grid) {
        std::vector<double> x(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] =
                wave ? std::numbers::pi * i / (n - 1) : static_cast<double>(i) / n;
        }
        axes.push_back(std::move(x));
    }
    return axes;
}

Tensor gaussian_source(const std::vector<double>& center,
                       const std::vector<std::vector<double>>& grid_axes) {
    if (center.size() != grid_axes.size())
        throw std::invalid_argument("gaussian_source: center rank mismatch");
    // The center must be a grid node.
    for (std::size_t a = 0; a < center.size(); ++a) {
        bool on_grid = false;
        for (double x : grid_axes[a])
            if (std::abs(x - center[a]) < 1e-9) { on_grid = true; break; }
        if (!on_grid)
            throw std::invalid_argument("gaussian_source: center is not a grid node");
    }

    std::vector<std::size_t> shape;
    for (const auto& ax : grid_axes) shape.push_back(ax.size());
    Tensor f(shape);

    const std::size_t d = grid_axes.size();
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t lin = 0; lin < f.size(); ++lin) {
        double r2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double dx = grid_axes[a][idx[a]] - center[a];
            r2 += dx * dx;
        }
        f[lin] = std::exp(-r2 / 10.0);
        for (std::size_t a = d; a-- > 0;) {
            if (++idx[a] < grid_axes[a].size()) break;
            idx[a] = 0;
        }
    }
    return f;
}

Tensor wave_speed_field(const PdeConfig& config) {
    const auto axes = make_grid_axes(config);
    std::vector<std::size_t> shape;
    for (const auto& ax : axes) shape.push_back(ax.size());
    Tensor c(shape);

    const bool unit = config.wave_speed_id == "unit";
    if (!unit && config.wave_speed_id != "paper")
        throw std::invalid_argument("unknown wave_speed_id: " + config.wave_speed_id);

    if (config.kind == PdeKind::wave2d) {
        for (std::size_t i = 0; i < shape[0]; ++i)
            for (std::size_t j = 0; j < shape[1]; ++j)
                c.at(i, j) = unit ? 1.0 : 1.0 + std::sin(axes[0][i]) * std::sin(axes[1][j]);
    } else if (config.kind == PdeKind::wave3d) {
        const std::size_t nz = shape[2];
        for (std::size_t i = 0; i < shape[0]; ++i)
            for (std::size_t j = 0; j < shape[1]; ++j)
                for (std::size_t k = 0; k < nz; ++k)
                    c.at(i, j, k) = unit ? 1.0
                                         : 1.0 + std::sin(2.0 * axes[0][i]) *
                                                     std::sin(axes[1][j]) *
                                                     std::sin(axes[2][k]);
    } else {
        throw std::invalid_argument("wave_speed_field: config is not a wave problem");
    }
    return c;
}

}  // namespace ditto
