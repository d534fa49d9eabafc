#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ditto/fft.hpp"
#include "ditto/pde.hpp"

namespace ditto {

namespace {

using cx = std::complex<double>;

struct BurgersWorkspace {
    Fft fft;
    int n;
    std::vector<double> k_phys;   // angular wavenumber per retained mode
    std::vector<double> dealias;  // 2/3-rule mask
    std::vector<double> u_phys, w_phys;
    std::vector<cx> w_hat, stage, k1, k2, k3, k4;

    explicit BurgersWorkspace(int n_)
        : fft({n_}), n(n_) {
        const std::size_t m = fft.n_spec();
        k_phys.resize(m);
        dealias.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            k_phys[i] = 2.0 * std::numbers::pi * static_cast<double>(i);
            dealias[i] = (3 * i <= static_cast<std::size_t>(n)) ? 1.0 : 0.0;
        }
        u_phys.resize(fft.n_real());
        w_phys.resize(fft.n_real());
        w_hat.resize(m);
        stage.resize(m);
        k1.resize(m); k2.resize(m); k3.resize(m); k4.resize(m);
    }

    // NL(u_hat) = -i k/2 * dealias(FFT(u^2)), evaluated pseudospectrally.
    void nonlinear(const std::vector<cx>& u_hat, std::vector<cx>& out) {
        fft.inverse(u_hat.data(), u_phys.data());
        for (std::size_t i = 0; i < u_phys.size(); ++i) w_phys[i] = u_phys[i] * u_phys[i];
        fft.forward(w_phys.data(), w_hat.data());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = cx(0.0, -0.5 * k_phys[i]) * (dealias[i] * w_hat[i]);
    }

    double max_abs_u(const std::vector<cx>& u_hat) {
        fft.inverse(u_hat.data(), u_phys.data());
        double m = 0.0;
        for (double v : u_phys) m = std::max(m, std::abs(v));
        return m;
    }
};

}  // namespace

Trajectory solve_burgers(const PdeConfig& config, const Tensor& u0) {
    config.validate();
    if (config.kind != PdeKind::burgers)
        throw std::invalid_argument("solve_burgers: config kind mismatch");
    if (config.viscosity <= 0.0)
        throw std::invalid_argument("solve_burgers: viscosity must be positive");
    const int n = config.grid[0];
    if (u0.rank() != 1 || u0.dim(0) != static_cast<std::size_t>(n))
        throw std::invalid_argument("solve_burgers: initial field shape mismatch");
    if (!u0.all_finite()) throw std::invalid_argument("solve_burgers: non-finite input");

    BurgersWorkspace ws(n);
    const std::size_t m = ws.w_hat.size();
    std::vector<cx> u_hat(m);
    ws.fft.forward(u0.data(), u_hat.data());
    for (std::size_t i = 0; i < m; ++i) u_hat[i] *= ws.dealias[i];

    const int T = config.n_steps;
    const double dt_snap = config.t_final / T;
    const double dx = 1.0 / n;
    const double nu = config.viscosity;

    Trajectory traj;
    traj.grid_axes = make_grid_axes(config);
    traj.times.resize(static_cast<std::size_t>(T) + 1);
    traj.fields = Tensor({static_cast<std::size_t>(T) + 1, static_cast<std::size_t>(n)});

    // Snapshot 0 is the (dealiased) initial condition the solver evolves.
    ws.fft.inverse(u_hat.data(), traj.fields.data());
    traj.times[0] = 0.0;

    std::vector<cx> e_half(m), e_full(m);
    for (int snap = 1; snap <= T; ++snap) {
        // Viscosity is handled exactly by the integrating factor, so only the
        // advective CFL constrains the substep.
        const double umax = ws.max_abs_u(u_hat);
        const double dt_cfl = config.cfl_safety * dx / std::max(umax, 1e-12);
        const int substeps = std::max(1, static_cast<int>(std::ceil(dt_snap / dt_cfl)));
        const double dt = dt_snap / substeps;

        for (std::size_t i = 0; i < m; ++i) {
            const double a = nu * ws.k_phys[i] * ws.k_phys[i];
            e_half[i] = std::exp(-0.5 * a * dt);
            e_full[i] = std::exp(-a * dt);
        }

        for (int s = 0; s < substeps; ++s) {
            // Integrating-factor RK4 on v = exp(nu k^2 t) u_hat.
            ws.nonlinear(u_hat, ws.k1);
            for (std::size_t i = 0; i < m; ++i)
                ws.stage[i] = e_half[i] * (u_hat[i] + 0.5 * dt * ws.k1[i]);
            ws.nonlinear(ws.stage, ws.k2);
            for (std::size_t i = 0; i < m; ++i)
                ws.stage[i] = e_half[i] * u_hat[i] + 0.5 * dt * ws.k2[i];
            ws.nonlinear(ws.stage, ws.k3);
            for (std::size_t i = 0; i < m; ++i)
                ws.stage[i] = e_full[i] * u_hat[i] + dt * e_half[i] * ws.k3[i];
            ws.nonlinear(ws.stage, ws.k4);
            for (std::size_t i = 0; i < m; ++i)
                u_hat[i] = e_full[i] * u_hat[i] +
                           dt / 6.0 *
                               (e_full[i] * ws.k1[i] + 2.0 * e_half[i] * (ws.k2[i] + ws.k3[i]) +
                                ws.k4[i]);
        }

        double* out = traj.fields.data() + static_cast<std::size_t>(snap) * n;
        ws.fft.inverse(u_hat.data(), out);
        traj.times[static_cast<std::size_t>(snap)] = dt_snap * snap;
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(out[i]))
                throw std::runtime_error("solve_burgers: non-finite field at t=" +
                                         std::to_string(traj.times[snap]) + " (substeps=" +
                                         std::to_string(substeps) + ")");
    }
    return traj;
}

}  // namespace ditto
