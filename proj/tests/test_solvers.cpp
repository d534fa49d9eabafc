#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "ditto/pde.hpp"

using namespace ditto;

namespace {

double rel_l2(const double* a, const double* b, std::size_t n) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

double spatial_mean(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s / static_cast<double>(n);
}

Tensor sine_ic_1d(int n) {
    Tensor u({static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i)
        u[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * i / n);
    return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// Burgers
// ---------------------------------------------------------------------------

TEST_CASE("burgers: constant initial condition is an exact solution") {
    PdeConfig cfg;
    cfg.kind = PdeKind::burgers;
    cfg.viscosity = 0.01;
    cfg.t_final = 1.0;
    cfg.n_steps = 10;
    cfg.grid = {64};
    Tensor u0({64});
    u0.fill(0.75);
    const Trajectory traj = solve_burgers(cfg, u0);
    for (std::size_t s = 0; s < traj.n_snapshots(); ++s)
        for (std::size_t i = 0; i < traj.field_size(); ++i)
            CHECK(traj.snapshot(s)[i] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("burgers: spatial mean is conserved") {
    PdeConfig cfg;
    cfg.kind = PdeKind::burgers;
    cfg.viscosity = 0.01;
    cfg.t_final = 1.0;
    cfg.n_steps = 20;
    cfg.grid = {128};
    Tensor u0 = sine_ic_1d(128);
    for (std::size_t i = 0; i < u0.size(); ++i) u0[i] += 0.3;
    const Trajectory traj = solve_burgers(cfg, u0);
    const double m0 = spatial_mean(traj.snapshot(0), traj.field_size());
    for (std::size_t s = 1; s < traj.n_snapshots(); ++s)
        CHECK(std::abs(spatial_mean(traj.snapshot(s), traj.field_size()) - m0) < 1e-10);
}

TEST_CASE("burgers: self-convergence against a 4x-finer reference") {
    PdeConfig coarse;
    coarse.kind = PdeKind::burgers;
    coarse.viscosity = 0.01;
    coarse.t_final = 0.5;
    coarse.n_steps = 1;
    coarse.grid = {128};

    PdeConfig fine = coarse;
    fine.grid = {512};
    fine.cfl_safety = coarse.cfl_safety / 4.0;  // 4x finer substeps as well

    const Trajectory tc = solve_burgers(coarse, sine_ic_1d(128));
    const Trajectory tf = solve_burgers(fine, sine_ic_1d(512));

    std::vector<double> fine_at_coarse(128);
    for (int i = 0; i < 128; ++i)
        fine_at_coarse[static_cast<std::size_t>(i)] = tf.snapshot(1)[4 * i];
    CHECK(rel_l2(tc.snapshot(1), fine_at_coarse.data(), 128) < 1e-3);
}

TEST_CASE("burgers: deterministic and input-validating") {
    PdeConfig cfg;
    cfg.kind = PdeKind::burgers;
    cfg.viscosity = 0.01;
    cfg.t_final = 0.2;
    cfg.n_steps = 4;
    cfg.grid = {64};
    const Tensor u0 = sine_ic_1d(64);
    const Trajectory a = solve_burgers(cfg, u0);
    const Trajectory b = solve_burgers(cfg, u0);
    for (std::size_t i = 0; i < a.fields.size(); ++i) CHECK(a.fields[i] == b.fields[i]);

    cfg.viscosity = 0.0;
    CHECK_THROWS(solve_burgers(cfg, u0));
    cfg.viscosity = 0.01;
    CHECK_THROWS(solve_burgers(cfg, Tensor({32})));  // wrong grid
}

// ---------------------------------------------------------------------------
// Navier-Stokes
// ---------------------------------------------------------------------------

namespace {

Tensor taylor_green_ic(int n) {
    Tensor w({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            w.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                std::sin(two_pi * i / n) * std::sin(two_pi * j / n);
    return w;
}

}  // namespace

TEST_CASE("navier-stokes: Taylor-Green vortex decays at exp(-8 pi^2 nu t)") {
    PdeConfig cfg;
    cfg.kind = PdeKind::navier_stokes;
    cfg.viscosity = 1e-3;
    cfg.t_final = 1.0;
    cfg.n_steps = 4;
    cfg.grid = {64, 64};
    cfg.forcing_id = "none";

    const Tensor w0 = taylor_green_ic(64);
    const Trajectory traj = solve_navier_stokes(cfg, w0);

    const double decay = std::exp(-8.0 * std::numbers::pi * std::numbers::pi *
                                  cfg.viscosity * cfg.t_final);
    std::vector<double> expect(w0.size());
    for (std::size_t i = 0; i < w0.size(); ++i) expect[i] = w0[i] * decay;
    CHECK(rel_l2(traj.snapshot(4), expect.data(), w0.size()) < 1e-2);
}

TEST_CASE("navier-stokes: zero-mean forcing keeps mean vorticity at zero") {
    PdeConfig cfg;
    cfg.kind = PdeKind::navier_stokes;
    cfg.viscosity = 1e-3;
    cfg.t_final = 2.0;
    cfg.n_steps = 4;
    cfg.grid = {32, 32};
    cfg.forcing_id = "paper";  // zero-mean by construction

    const Tensor w0 = taylor_green_ic(32);
    const Trajectory traj = solve_navier_stokes(cfg, w0);
    for (std::size_t s = 0; s < traj.n_snapshots(); ++s)
        CHECK(std::abs(spatial_mean(traj.snapshot(s), traj.field_size())) < 1e-10);
}

TEST_CASE("navier-stokes: paper setup trajectory shape" * doctest::skip(false)) {
    // nu = 1e-3, T = 50, t_final = 50, 64x64 -> (51, 64, 64).
    PdeConfig cfg;
    cfg.kind = PdeKind::navier_stokes;
    cfg.viscosity = 1e-3;
    cfg.t_final = 50.0;
    cfg.n_steps = 50;
    cfg.grid = {64, 64};

    const Trajectory traj = solve_navier_stokes(cfg, taylor_green_ic(64));
    REQUIRE(traj.fields.rank() == 3);
    CHECK(traj.fields.dim(0) == 51);
    CHECK(traj.fields.dim(1) == 64);
    CHECK(traj.fields.dim(2) == 64);
}

// ---------------------------------------------------------------------------
// Wave
// ---------------------------------------------------------------------------

namespace {

PdeConfig wave_cfg_2d(int n, int steps = 20, double t_final = 2.0) {
    PdeConfig cfg;
    cfg.kind = PdeKind::wave2d;
    cfg.t_final = t_final;
    cfg.n_steps = steps;
    cfg.grid = {n, n};
    cfg.wave_speed_id = "unit";
    return cfg;
}

Tensor sine_ic_2d(const PdeConfig& cfg) {
    const auto axes = make_grid_axes(cfg);
    const std::size_t n = axes[0].size();
    Tensor u({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            u.at(i, j) = std::sin(axes[0][i]) * std::sin(axes[1][j]);
    return u;
}

double wave_sov_error(int n, double t_final) {
    // Separation of variables for c == 1: u = sin(x) sin(y) cos(sqrt(2) t).
    PdeConfig cfg = wave_cfg_2d(n, 10, t_final);
    const Tensor u0 = sine_ic_2d(cfg);
    const Trajectory traj = solve_wave(cfg, u0);
    const double amp = std::cos(std::sqrt(2.0) * t_final);
    std::vector<double> expect(u0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) expect[i] = u0[i] * amp;
    return rel_l2(traj.snapshot(traj.n_snapshots() - 1), expect.data(), u0.size());
}

}  // namespace

TEST_CASE("wave: separation-of-variables oracle at t=2, 64x64") {
    CHECK(wave_sov_error(64, 2.0) < 1e-2);
}

TEST_CASE("wave: finite-difference scheme shows second-order convergence") {
    // Halving h (and dt, tied through CFL) should shrink the error ~4x.
    const double e1 = wave_sov_error(17, 1.0);
    const double e2 = wave_sov_error(33, 1.0);
    const double e3 = wave_sov_error(65, 1.0);
    const double p12 = std::log2(e1 / e2);
    const double p23 = std::log2(e2 / e3);
    CHECK(p12 > 1.8);
    CHECK(p12 < 2.2);
    CHECK(p23 > 1.8);
    CHECK(p23 < 2.2);
}

TEST_CASE("wave: discrete energy drift below 1% for c == 1") {
    PdeConfig cfg = wave_cfg_2d(64, 40, 2.0);
    const Tensor u0 = sine_ic_2d(cfg);
    const Trajectory traj = solve_wave(cfg, u0);

    const std::size_t n = traj.grid_axes[0].size();
    const double h = traj.grid_axes[0][1] - traj.grid_axes[0][0];
    const auto at = [&](std::size_t s, std::size_t i, std::size_t j) {
        return traj.snapshot(s)[i * n + j];
    };
    // Energy at snapshot s: kinetic from a centered time difference at the
    // nodes, elastic from edge-midpoint gradients so the whole domain
    // (including the boundary strips, where the slope is largest) is covered.
    const auto energy = [&](std::size_t s) {
        const double dt2 = traj.times[s + 1] - traj.times[s - 1];
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double ut = (at(s + 1, i, j) - at(s - 1, i, j)) / dt2;
                e += 0.5 * ut * ut;
            }
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double ux = (at(s, i + 1, j) - at(s, i, j)) / h;
                e += 0.5 * ux * ux;
            }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j + 1 < n; ++j) {
                const double uy = (at(s, i, j + 1) - at(s, i, j)) / h;
                e += 0.5 * uy * uy;
            }
        return e * h * h;
    };

    const double e_ref = energy(1);
    for (std::size_t s = 2; s + 1 < traj.n_snapshots(); ++s)
        CHECK(std::abs(energy(s) - e_ref) / e_ref < 0.01);
}

TEST_CASE("wave: paper grid sizes produce the right shapes") {
    PdeConfig cfg2 = wave_cfg_2d(64, 5, 2.0);
    cfg2.wave_speed_id = "paper";
    const auto axes2 = make_grid_axes(cfg2);
    Tensor src2 = gaussian_source({axes2[0][10], axes2[1][20]}, axes2);
    const Trajectory t2 = solve_wave(cfg2, src2);
    CHECK(t2.fields.dim(1) == 64);
    CHECK(t2.fields.dim(2) == 64);

    PdeConfig cfg3;
    cfg3.kind = PdeKind::wave3d;
    cfg3.t_final = 2.0;
    cfg3.n_steps = 4;
    cfg3.grid = {32, 32, 32};
    cfg3.wave_speed_id = "paper";
    const auto axes3 = make_grid_axes(cfg3);
    Tensor src3 = gaussian_source({axes3[0][8], axes3[1][16], axes3[2][24]}, axes3);
    const Trajectory t3 = solve_wave(cfg3, src3);
    REQUIRE(t3.fields.rank() == 4);
    CHECK(t3.fields.dim(1) == 32);
    CHECK(t3.fields.dim(2) == 32);
    CHECK(t3.fields.dim(3) == 32);
}

TEST_CASE("wave: impossible CFL budget is rejected with the substep count") {
    PdeConfig cfg = wave_cfg_2d(16, 1, 1e7);
    CHECK_THROWS_WITH_AS(solve_wave(cfg, Tensor({16, 16})),
                         doctest::Contains("substeps"), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Gaussian source
// ---------------------------------------------------------------------------

TEST_CASE("gaussian source: closed-form values") {
    // Custom axes place one node exactly at squared distance 10.
    const std::vector<std::vector<double>> axes = {{0.0, std::sqrt(10.0)}, {0.0, 1.0}};
    const Tensor f = gaussian_source({0.0, 0.0}, axes);
    CHECK(f.at(0, 0) == doctest::Approx(1.0));                  // exponent 0
    CHECK(f.at(1, 0) == doctest::Approx(std::exp(-1.0)));       // |x-xc|^2 = 10
    CHECK(f.at(0, 1) == doctest::Approx(std::exp(-0.1)));

    CHECK_THROWS(gaussian_source({0.5, 0.0}, axes));  // off-grid center
}

TEST_CASE("gaussian source: grid symmetry maps to field symmetry") {
    PdeConfig cfg = wave_cfg_2d(32, 1, 1.0);
    const auto axes = make_grid_axes(cfg);
    const std::size_t n = axes[0].size();
    const Tensor a = gaussian_source({axes[0][5], axes[1][7]}, axes);
    const Tensor b = gaussian_source({axes[0][n - 6], axes[1][7]}, axes);
    // Mirror in x: a(i, j) == b(n-1-i, j).
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(a.at(i, j) == doctest::Approx(b.at(n - 1 - i, j)).epsilon(1e-12));
}
