/// Thin RAII wrapper around FFTW plans for the transforms the solvers and
/// the GRF sampler need. One Fft object per grid shape. Instances are not
/// thread-safe (they own scratch buffers); use one per worker. Plan
/// creation/destruction is serialized globally as FFTW requires.
#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace ditto {

class Fft {
public:
    /// dims: real-space grid extents, slowest axis first (1 to 3 axes).
    explicit Fft(std::vector<int> dims);
    ~Fft();

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    const std::vector<int>& dims() const { return dims_; }
    /// Number of real-space points.
    std::size_t n_real() const { return n_real_; }
    /// Number of complex coefficients in the r2c half-spectrum layout
    /// (last axis truncated to n/2+1).
    std::size_t n_spec() const { return n_spec_; }

    /// Real -> half spectrum, normalized so coefficients are Fourier-series
    /// amplitudes (forward DFT divided by the point count).
    void forward(const double* in, std::complex<double>* out) const;

    /// Half spectrum -> real, inverse of forward (no extra scaling).
    void inverse(const std::complex<double>* in, double* out) const;

    /// Full-spectrum unnormalized inverse c2c transform (sum over all modes).
    /// Used by the GRF sampler, which fills the full spectrum itself.
    void inverse_c2c(const std::complex<double>* in, std::complex<double>* out) const;

private:
    struct Impl;
    std::vector<int> dims_;
    std::size_t n_real_ = 0;
    std::size_t n_spec_ = 0;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ditto
