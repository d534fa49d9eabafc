#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ditto/pde.hpp"

namespace ditto {

namespace {

constexpr int kMaxSubsteps = 1 << 20;  // per snapshot interval

struct WaveGrid {
    int d;
    int n[3] = {1, 1, 1};
    double h;

    std::size_t size() const {
        return static_cast<std::size_t>(n[0]) * n[1] * n[2];
    }
    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n[1] + j) * n[2] + k;
    }
    bool boundary(int i, int j, int k) const {
        if (i == 0 || i == n[0] - 1 || j == 0 || j == n[1] - 1) return true;
        return d == 3 && (k == 0 || k == n[2] - 1);
    }
};

}  // namespace

Trajectory solve_wave(const PdeConfig& config, const Tensor& u0) {
    config.validate();
    const bool is3d = config.kind == PdeKind::wave3d;
    if (config.kind != PdeKind::wave2d && !is3d)
        throw std::invalid_argument("solve_wave: config kind mismatch");

    WaveGrid g;
    g.d = is3d ? 3 : 2;
    for (int a = 0; a < g.d; ++a) g.n[a] = config.grid[static_cast<std::size_t>(a)];
    for (int a = 1; a < g.d; ++a)
        if (g.n[a] != g.n[0])
            throw std::invalid_argument("solve_wave: grid must be cubic");
    g.h = std::numbers::pi / (g.n[0] - 1);

    std::vector<std::size_t> shape;
    for (int a = 0; a < g.d; ++a) shape.push_back(static_cast<std::size_t>(g.n[a]));
    if (u0.shape() != shape)
        throw std::invalid_argument("solve_wave: initial field shape mismatch");
    if (!u0.all_finite()) throw std::invalid_argument("solve_wave: non-finite input");

    const Tensor c = wave_speed_field(config);
    double c_max = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) c_max = std::max(c_max, c[i]);

    const int T = config.n_steps;
    const double dt_snap = config.t_final / T;
    // Leapfrog stability: dt <= h / (c_max * sqrt(d)); one fixed dt for the
    // whole run so the two-level scheme stays consistent across snapshots.
    const double dt_stable = config.cfl_safety * g.h / (c_max * std::sqrt(double(g.d)));
    const int substeps = static_cast<int>(std::ceil(dt_snap / dt_stable));
    if (substeps > kMaxSubsteps)
        throw std::invalid_argument(
            "solve_wave: grid too coarse for CFL at cfl_safety=" +
            std::to_string(config.cfl_safety) + "; would need " +
            std::to_string(substeps) + " substeps per snapshot");
    const double dt = dt_snap / substeps;
    const double r = dt * dt / (g.h * g.h);

    Trajectory traj;
    traj.grid_axes = make_grid_axes(config);
    traj.times.resize(static_cast<std::size_t>(T) + 1);
    shape.insert(shape.begin(), static_cast<std::size_t>(T) + 1);
    traj.fields = Tensor(shape);

    const std::size_t nfield = g.size();
    std::vector<double> prev(nfield), cur(nfield), next(nfield);

    // Homogeneous Dirichlet walls are enforced on every stored snapshot,
    // including t=0 (the IC is projected onto the boundary condition).
    for (std::size_t i = 0; i < nfield; ++i) cur[i] = u0[i];
    for (int i = 0; i < g.n[0]; ++i)
        for (int j = 0; j < g.n[1]; ++j)
            for (int k = 0; k < g.n[2]; ++k)
                if (g.boundary(i, j, k)) cur[g.idx(i, j, k)] = 0.0;

    const auto laplacian_step = [&](const std::vector<double>& um1,
                                    const std::vector<double>& u, double scale,
                                    std::vector<double>& out) {
        const int kk = g.d == 3 ? 1 : 0;  // z-neighbors only in 3D
        for (int i = 1; i < g.n[0] - 1; ++i) {
            for (int j = 1; j < g.n[1] - 1; ++j) {
                const int k_lo = g.d == 3 ? 1 : 0;
                const int k_hi = g.d == 3 ? g.n[2] - 1 : 1;
                for (int k = k_lo; k < k_hi; ++k) {
                    const std::size_t p = g.idx(i, j, k);
                    double lap = u[g.idx(i - 1, j, k)] + u[g.idx(i + 1, j, k)] +
                                 u[g.idx(i, j - 1, k)] + u[g.idx(i, j + 1, k)] -
                                 2.0 * g.d * u[p];
                    if (kk) lap += u[p - 1] + u[p + 1];
                    out[p] = 2.0 * u[p] - um1[p] + scale * r * c[p] * c[p] * lap;
                }
            }
        }
    };

    std::copy(cur.begin(), cur.end(), traj.fields.data());
    traj.times[0] = 0.0;

    // First step from u_t(.,0) = 0: u^1 = u^0 + dt^2/2 c^2 Lap(u^0).
    bool first = true;
    for (int snap = 1; snap <= T; ++snap) {
        for (int s = 0; s < substeps; ++s) {
            next.assign(nfield, 0.0);
            if (first) {
                // "um1 = u" turns 2u - um1 into u; halve the Laplacian weight.
                laplacian_step(cur, cur, 0.5, next);
                first = false;
            } else {
                laplacian_step(prev, cur, 1.0, next);
            }
            std::swap(prev, cur);
            std::swap(cur, next);
        }
        double* out = traj.fields.data() + static_cast<std::size_t>(snap) * nfield;
        std::copy(cur.begin(), cur.end(), out);
        traj.times[static_cast<std::size_t>(snap)] = dt_snap * snap;
        for (std::size_t i = 0; i < nfield; ++i)
            if (!std::isfinite(out[i]))
                throw std::runtime_error("solve_wave: non-finite field at t=" +
                                         std::to_string(traj.times[snap]));
    }
    return traj;
}

}  // namespace ditto
