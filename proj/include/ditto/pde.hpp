/// Reference PDE solvers used to synthesize training data:
///   - 1D viscous Burgers, pseudospectral, integrating-factor RK4
///   - 2D incompressible Navier-Stokes (vorticity form), pseudospectral,
///     Heun step with Crank-Nicolson viscosity
///   - 2D/3D acoustic wave equation, central differences + leapfrog
///
/// All solvers are deterministic functions of (config, initial field) and
/// store T+1 equispaced snapshots including t=0. Internal substeps are chosen
/// from a CFL bound and are decoupled from the snapshot count.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ditto/tensor.hpp"

namespace ditto {

enum class PdeKind { burgers, navier_stokes, wave2d, wave3d };

std::string to_string(PdeKind k);
PdeKind pde_kind_from_string(const std::string& s);

struct PdeConfig {
    PdeKind kind = PdeKind::burgers;
    double viscosity = 0.01;   // Burgers / NS
    double t_final = 1.0;
    int n_steps = 50;          // stored snapshots T (T+1 including t=0)
    std::vector<int> grid = {128};  // nodes per axis
    std::string forcing_id = "paper";     // NS: "paper" | "none"
    std::string wave_speed_id = "paper";  // wave: "paper" | "unit"
    double cfl_safety = 0.5;

    int dimension() const { return static_cast<int>(grid.size()); }
    void validate() const;
};

struct Trajectory {
    std::vector<std::vector<double>> grid_axes;  // coordinates per axis
    std::vector<double> times;                   // T+1, times[0] == 0
    Tensor fields;                               // (T+1, n1[, n2[, n3]])
    std::uint64_t seed = 0;                      // RNG provenance

    std::size_t n_snapshots() const { return times.size(); }
    std::size_t field_size() const {
        return fields.size() / (times.empty() ? 1 : times.size());
    }
    const double* snapshot(std::size_t n) const { return fields.data() + n * field_size(); }
    double* snapshot(std::size_t n) { return fields.data() + n * field_size(); }

    void validate() const;
};

/// Burgers: u_t + (u^2/2)_x = nu * u_xx on [0,1), periodic.
Trajectory solve_burgers(const PdeConfig& config, const Tensor& u0);

/// Navier-Stokes vorticity: w_t + u . grad(w) = nu * Lap(w) + f on [0,1)^2,
/// periodic; velocity recovered through the streamfunction Poisson solve.
/// forcing_id "paper": f = 0.1 (sin(2 pi (x+y)) + cos(2 pi (x+y))).
Trajectory solve_navier_stokes(const PdeConfig& config, const Tensor& w0);

/// Acoustic wave: u_tt = c(x)^2 Lap(u) on [0,pi]^d, homogeneous Dirichlet,
/// u_t(.,0) = 0. wave_speed_id "paper": c = 1 + sin(x)sin(y) in 2D,
/// c = 1 + sin(2x)sin(y)sin(z) in 3D.
Trajectory solve_wave(const PdeConfig& config, const Tensor& u0);

/// Grid coordinate arrays for a config (periodic: x_i = i/n on [0,1);
/// wave: x_i = i*pi/(n-1) on [0,pi] including both boundaries).
std::vector<std::vector<double>> make_grid_axes(const PdeConfig& config);

/// Gaussian source exp(-|x - x_c|^2 / 10) evaluated on the wave grid.
/// The center must coincide with a grid node.
Tensor gaussian_source(const std::vector<double>& center,
                       const std::vector<std::vector<double>>& grid_axes);

/// Wave speed field for a config ("paper" or "unit").
Tensor wave_speed_field(const PdeConfig& config);

}  // namespace ditto
