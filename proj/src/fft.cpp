#include "ditto/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace ditto {

namespace {
// FFTW plan creation/destruction is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct Fft::Impl {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
    fftw_plan c2c_inv = nullptr;
    double* real_buf = nullptr;
    fftw_complex* spec_buf = nullptr;
    fftw_complex* full_in = nullptr;
    fftw_complex* full_out = nullptr;
};

Fft::Fft(std::vector<int> dims) : dims_(std::move(dims)), impl_(new Impl) {
    if (dims_.empty() || dims_.size() > 3)
        throw std::invalid_argument("Fft: rank must be 1..3");
    n_real_ = 1;
    for (int d : dims_) {
        if (d < 2) throw std::invalid_argument("Fft: each extent must be >= 2");
        n_real_ *= static_cast<std::size_t>(d);
    }
    n_spec_ = n_real_ / static_cast<std::size_t>(dims_.back()) *
              (static_cast<std::size_t>(dims_.back()) / 2 + 1);

    std::lock_guard<std::mutex> lock(planner_mutex());
    impl_->real_buf = fftw_alloc_real(n_real_);
    impl_->spec_buf = fftw_alloc_complex(n_spec_);
    impl_->full_in = fftw_alloc_complex(n_real_);
    impl_->full_out = fftw_alloc_complex(n_real_);
    if (!impl_->real_buf || !impl_->spec_buf || !impl_->full_in || !impl_->full_out)
        throw std::runtime_error("Fft: allocation failed");

    const int rank = static_cast<int>(dims_.size());
    impl_->r2c = fftw_plan_dft_r2c(rank, dims_.data(), impl_->real_buf, impl_->spec_buf,
                                   FFTW_ESTIMATE);
    impl_->c2r = fftw_plan_dft_c2r(rank, dims_.data(), impl_->spec_buf, impl_->real_buf,
                                   FFTW_ESTIMATE);
    impl_->c2c_inv = fftw_plan_dft(rank, dims_.data(), impl_->full_in, impl_->full_out,
                                   FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!impl_->r2c || !impl_->c2r || !impl_->c2c_inv)
        throw std::runtime_error("Fft: plan creation failed");
}

Fft::~Fft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (impl_->r2c) fftw_destroy_plan(impl_->r2c);
    if (impl_->c2r) fftw_destroy_plan(impl_->c2r);
    if (impl_->c2c_inv) fftw_destroy_plan(impl_->c2c_inv);
    fftw_free(impl_->real_buf);
    fftw_free(impl_->spec_buf);
    fftw_free(impl_->full_in);
    fftw_free(impl_->full_out);
}

void Fft::forward(const double* in, std::complex<double>* out) const {
    std::memcpy(impl_->real_buf, in, n_real_ * sizeof(double));
    fftw_execute(impl_->r2c);
    const double scale = 1.0 / static_cast<double>(n_real_);
    const auto* s = reinterpret_cast<const std::complex<double>*>(impl_->spec_buf);
    for (std::size_t i = 0; i < n_spec_; ++i) out[i] = s[i] * scale;
}

void Fft::inverse(const std::complex<double>* in, double* out) const {
    std::memcpy(impl_->spec_buf, in, n_spec_ * sizeof(fftw_complex));
    fftw_execute(impl_->c2r);
    std::memcpy(out, impl_->real_buf, n_real_ * sizeof(double));
}

void Fft::inverse_c2c(const std::complex<double>* in, std::complex<double>* out) const {
    std::memcpy(impl_->full_in, in, n_real_ * sizeof(fftw_complex));
    fftw_execute(impl_->c2c_inv);
    std::memcpy(out, impl_->full_out, n_real_ * sizeof(fftw_complex));
}

}  // namespace ditto
