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

/// Pseudospectral state for the vorticity equation on [0,1)^2.
/// Half-spectrum layout: kx runs over all n rows (signed), ky over 0..n/2.
struct NsWorkspace {
    Fft fft;
    int n;
    std::size_t m;                 // spectrum size
    std::vector<double> kx, ky;    // angular wavenumbers
    std::vector<double> inv_ksq;   // 1/|k|^2, zero at k=0
    std::vector<double> dealias;
    std::vector<cx> psi, tmp_hat, nl_hat;
    std::vector<double> u, v, wx, wy, nl, w_phys;

    explicit NsWorkspace(int n_) : fft({n_, n_}), n(n_), m(fft.n_spec()) {
        const int half = n / 2 + 1;
        kx.resize(m);
        ky.resize(m);
        inv_ksq.resize(m);
        dealias.resize(m);
        const double two_pi = 2.0 * std::numbers::pi;
        for (int i = 0; i < n; ++i) {
            const int mi = i <= n / 2 ? i : i - n;
            for (int j = 0; j < half; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i * half + j);
                kx[idx] = two_pi * mi;
                ky[idx] = two_pi * j;
                const double ksq = kx[idx] * kx[idx] + ky[idx] * ky[idx];
                inv_ksq[idx] = ksq > 0.0 ? 1.0 / ksq : 0.0;
                dealias[idx] =
                    (3 * std::abs(mi) <= n && 3 * j <= n) ? 1.0 : 0.0;
            }
        }
        psi.resize(m);
        tmp_hat.resize(m);
        nl_hat.resize(m);
        const std::size_t nr = fft.n_real();
        u.resize(nr); v.resize(nr); wx.resize(nr); wy.resize(nr);
        nl.resize(nr); w_phys.resize(nr);
    }

    /// nl_hat <- dealias(FFT(u . grad w)); also refreshes u, v in physical
    /// space for CFL queries. Velocity: u = d(psi)/dy, v = -d(psi)/dx with
    /// psi = w / |k|^2.
    void nonlinear(const std::vector<cx>& w_hat) {
        for (std::size_t i = 0; i < m; ++i) psi[i] = w_hat[i] * inv_ksq[i];
        for (std::size_t i = 0; i < m; ++i) tmp_hat[i] = cx(0, 1) * ky[i] * psi[i];
        fft.inverse(tmp_hat.data(), u.data());
        for (std::size_t i = 0; i < m; ++i) tmp_hat[i] = cx(0, -1) * kx[i] * psi[i];
        fft.inverse(tmp_hat.data(), v.data());
        for (std::size_t i = 0; i < m; ++i) tmp_hat[i] = cx(0, 1) * kx[i] * w_hat[i];
        fft.inverse(tmp_hat.data(), wx.data());
        for (std::size_t i = 0; i < m; ++i) tmp_hat[i] = cx(0, 1) * ky[i] * w_hat[i];
        fft.inverse(tmp_hat.data(), wy.data());
        for (std::size_t i = 0; i < u.size(); ++i) nl[i] = u[i] * wx[i] + v[i] * wy[i];
        fft.forward(nl.data(), nl_hat.data());
        for (std::size_t i = 0; i < m; ++i) nl_hat[i] *= dealias[i];
    }

    double max_speed() const {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            s = std::max(s, std::max(std::abs(u[i]), std::abs(v[i])));
        return s;
    }
};

Tensor paper_forcing(int n) {
    Tensor f({static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = static_cast<double>(i) / n;
            const double y = static_cast<double>(j) / n;
            f.at(i, j) = 0.1 * (std::sin(two_pi * (x + y)) + std::cos(two_pi * (x + y)));
        }
    return f;
}

}  // namespace

Trajectory solve_navier_stokes(const PdeConfig& config, const Tensor& w0) {
    config.validate();
    if (config.kind != PdeKind::navier_stokes)
        throw std::invalid_argument("solve_navier_stokes: config kind mismatch");
    if (config.viscosity <= 0.0)
        throw std::invalid_argument("solve_navier_stokes: viscosity must be positive");
    const int n = config.grid[0];
    if (config.grid[1] != n)
        throw std::invalid_argument("solve_navier_stokes: grid must be square");
    if (w0.rank() != 2 || w0.dim(0) != static_cast<std::size_t>(n) ||
        w0.dim(1) != static_cast<std::size_t>(n))
        throw std::invalid_argument("solve_navier_stokes: initial field shape mismatch");
    if (!w0.all_finite())
        throw std::invalid_argument("solve_navier_stokes: non-finite input");

    NsWorkspace ws(n);
    const std::size_t m = ws.m;
    std::vector<cx> w_hat(m), f_hat(m, cx(0, 0));
    ws.fft.forward(w0.data(), w_hat.data());
    for (std::size_t i = 0; i < m; ++i) w_hat[i] *= ws.dealias[i];

    if (config.forcing_id == "paper") {
        const Tensor f = paper_forcing(n);
        ws.fft.forward(f.data(), f_hat.data());
    } else if (config.forcing_id != "none") {
        throw std::invalid_argument("unknown forcing_id: " + config.forcing_id);
    }

    const int T = config.n_steps;
    const double dt_snap = config.t_final / T;
    const double dx = 1.0 / n;
    const double nu = config.viscosity;

    Trajectory traj;
    traj.grid_axes = make_grid_axes(config);
    traj.times.resize(static_cast<std::size_t>(T) + 1);
    traj.fields = Tensor({static_cast<std::size_t>(T) + 1, static_cast<std::size_t>(n),
                          static_cast<std::size_t>(n)});
    ws.fft.inverse(w_hat.data(), traj.fields.data());
    traj.times[0] = 0.0;

    std::vector<cx> n1(m), w_star(m);

    for (int snap = 1; snap <= T; ++snap) {
        // Advective CFL from the current velocity; the viscous term is
        // unconditionally stable under Crank-Nicolson. dt is also capped at
        // dx/4 to keep the explicit advection accurate in slow regions.
        ws.nonlinear(w_hat);
        const double speed = std::max(ws.max_speed(), 1e-12);
        const double dt_cfl = std::min(config.cfl_safety * dx / speed, 0.25 * dx);
        const int substeps = std::max(1, static_cast<int>(std::ceil(dt_snap / dt_cfl)));
        const double dt = dt_snap / substeps;

        for (int s = 0; s < substeps; ++s) {
            // Heun predictor/corrector on advection+forcing, CN on viscosity.
            ws.nonlinear(w_hat);
            n1 = ws.nl_hat;
            for (std::size_t i = 0; i < m; ++i) {
                const double ksq = ws.kx[i] * ws.kx[i] + ws.ky[i] * ws.ky[i];
                const double a = 0.5 * nu * dt * ksq;
                w_star[i] = ((1.0 - a) * w_hat[i] + dt * (f_hat[i] - n1[i])) / (1.0 + a);
            }
            ws.nonlinear(w_star);
            for (std::size_t i = 0; i < m; ++i) {
                const double ksq = ws.kx[i] * ws.kx[i] + ws.ky[i] * ws.ky[i];
                const double a = 0.5 * nu * dt * ksq;
                w_hat[i] = ((1.0 - a) * w_hat[i] +
                            0.5 * dt * (2.0 * f_hat[i] - n1[i] - ws.nl_hat[i])) /
                           (1.0 + a);
            }
        }

        double* out = traj.fields.data() + static_cast<std::size_t>(snap) * ws.fft.n_real();
        ws.fft.inverse(w_hat.data(), out);
        traj.times[static_cast<std::size_t>(snap)] = dt_snap * snap;
        for (std::size_t i = 0; i < ws.fft.n_real(); ++i)
            if (!std::isfinite(out[i]))
                throw std::runtime_error(
                    "solve_navier_stokes: non-finite vorticity at t=" +
                    std::to_string(traj.times[snap]) +
                    " (snapshot " + std::to_string(snap) + ", substeps=" +
                    std::to_string(substeps) + ")");
    }
    return traj;
}

}  // namespace ditto
