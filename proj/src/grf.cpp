#include "ditto/grf.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ditto/fft.hpp"
#include "ditto/rng.hpp"

namespace ditto {

void GrfSpec::validate() const {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("GrfSpec: dimension must be 1 or 2");
    if (sigma <= 0.0) throw std::invalid_argument("GrfSpec: sigma must be positive");
    if (tau <= 0.0) throw std::invalid_argument("GrfSpec: tau must be positive");
    if (alpha_exp <= 0.5 * dimension)
        throw std::invalid_argument(
            "GrfSpec: alpha_exp must exceed dimension/2 (divergent variance)");
    if (grid_points < 4) throw std::invalid_argument("GrfSpec: grid_points must be >= 4");
    if (grid_points % 2 != 0)
        throw std::invalid_argument("GrfSpec: grid_points must be even");
}

double grf_mode_variance(const GrfSpec& spec, double k_sq) {
    const double two_pi = 2.0 * std::numbers::pi;
    return spec.sigma * std::pow(two_pi * two_pi * k_sq + spec.tau * spec.tau,
                                 -spec.alpha_exp);
}

// The full complex spectrum W is filled with independent complex Gaussians of
// variance 2*lambda_k, and the field is Re(IDFT(W)). The true coefficient of
// mode k is then (W_k + conj(W_-k))/2, giving exactly variance lambda_k per
// mode with the Hermitian symmetry of a real field.
Tensor sample_grf(const GrfSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int n = spec.grid_points;
    std::vector<int> dims(static_cast<std::size_t>(spec.dimension), n);
    Fft fft(dims);

    Rng rng(seed);
    std::vector<std::complex<double>> w(fft.n_real());
    const auto signed_mode = [n](int i) { return i <= n / 2 ? i : i - n; };

    if (spec.dimension == 1) {
        for (int i = 0; i < n; ++i) {
            const double m = signed_mode(i);
            const double sd = std::sqrt(grf_mode_variance(spec, m * m));
            w[static_cast<std::size_t>(i)] =
                std::complex<double>(rng.gaussian(), rng.gaussian()) * sd;
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const double mi = signed_mode(i);
            for (int j = 0; j < n; ++j) {
                const double mj = signed_mode(j);
                const double sd = std::sqrt(grf_mode_variance(spec, mi * mi + mj * mj));
                w[static_cast<std::size_t>(i * n + j)] =
                    std::complex<double>(rng.gaussian(), rng.gaussian()) * sd;
            }
        }
    }

    std::vector<std::complex<double>> u(fft.n_real());
    fft.inverse_c2c(w.data(), u.data());

    std::vector<std::size_t> shape(static_cast<std::size_t>(spec.dimension),
                                   static_cast<std::size_t>(n));
    Tensor field(shape);
    for (std::size_t i = 0; i < u.size(); ++i) field[i] = u[i].real();
    return field;
}

}  // namespace ditto
