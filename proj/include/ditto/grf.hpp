/// Gaussian random fields on the periodic unit torus, sampled spectrally.
///
/// The covariance operator is sigma * (-Laplacian + tau^2 I)^(-alpha), so the
/// Fourier coefficient of integer mode k has variance
///     lambda_k = sigma * ((2*pi*|k|)^2 + tau^2)^(-alpha).
#pragma once

#include <cstdint>

#include "ditto/tensor.hpp"

namespace ditto {

struct GrfSpec {
    int dimension = 1;       // 1 or 2
    double sigma = 625.0;    // covariance scale
    double tau = 5.0;        // inverse length (tau^2 appears in the operator)
    double alpha_exp = 2.0;  // covariance decay exponent
    int grid_points = 128;   // nodes per axis

    void validate() const;
};

/// Variance of the Fourier coefficient for squared integer mode magnitude
/// |k|^2 = k_sq.
double grf_mode_variance(const GrfSpec& spec, double k_sq);

/// Draw one field on the periodic grid [0,1)^d. Deterministic in (spec, seed).
Tensor sample_grf(const GrfSpec& spec, std::uint64_t seed);

}  // namespace ditto
