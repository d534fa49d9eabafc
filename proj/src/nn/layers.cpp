#include "ditto/nn/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ditto::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<Mat>;
using CMap = Eigen::Map<const Mat>;
using Idx = Eigen::Index;

void snap_f32(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(static_cast<float>(t[i]));
}

void init_normal(Tensor& t, Rng& rng, double std) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std * rng.gaussian();
    snap_f32(t);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               bool zero_init)
    : w(name + ".w", {out, in}), b(name + ".b", {out}), in_(in), out_(out) {
    if (!zero_init) init_normal(w.value, rng, 1.0 / std::sqrt(double(in)));
}

Tensor Linear::forward(Tensor x) {
    if (x.rank() != 2 || x.dim(1) != in_)
        throw std::invalid_argument("Linear " + w.name + ": bad input shape " +
                                    Tensor::shape_str(x.shape()));
    x_ = std::move(x);
    const Tensor& xr = x_;
    const std::size_t batch = xr.dim(0);
    Tensor y({batch, out_});
    CMap xm(xr.data(), Idx(batch), Idx(in_));
    CMap wm(w.value.data(), Idx(out_), Idx(in_));
    Map ym(y.data(), Idx(batch), Idx(out_));
    ym.noalias() = xm * wm.transpose();
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < out_; ++j) y.at(i, j) += b.value[j];
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    const std::size_t batch = x_.dim(0);
    CMap gym(gy.data(), Idx(batch), Idx(out_));
    CMap xm(x_.data(), Idx(batch), Idx(in_));
    CMap wm(w.value.data(), Idx(out_), Idx(in_));

    Map gwm(w.grad.data(), Idx(out_), Idx(in_));
    gwm.noalias() += gym.transpose() * xm;
    for (std::size_t j = 0; j < out_; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < batch; ++i) s += gy.at(i, j);
        b.grad[j] += s;
    }

    Tensor gx({batch, in_});
    Map gxm(gx.data(), Idx(batch), Idx(in_));
    gxm.noalias() = gym * wm;
    return gx;
}

void Linear::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

// ---------------------------------------------------------------------------
// Conv
// ---------------------------------------------------------------------------

Conv::Conv(const std::string& name, int rank, std::size_t cin, std::size_t cout, int kernel,
           int stride, Rng& rng, bool zero_init)
    : w(name + ".w", {cout, cin * static_cast<std::size_t>(std::pow(kernel, rank))}),
      b(name + ".b", {cout}),
      rank_(rank),
      k_(kernel),
      stride_(stride),
      cin_(cin),
      cout_(cout) {
    if (rank < 1 || rank > 3) throw std::invalid_argument("Conv: rank must be 1..3");
    if (kernel != 1 && kernel != 3) throw std::invalid_argument("Conv: kernel must be 1 or 3");
    if (stride != 1 && stride != 2) throw std::invalid_argument("Conv: stride must be 1 or 2");
    taps_ = 1;
    for (int a = 0; a < rank; ++a) taps_ *= static_cast<std::size_t>(kernel);
    if (!zero_init)
        init_normal(w.value, rng, 1.0 / std::sqrt(double(cin) * double(taps_)));
}

void Conv::build_tables(const std::vector<std::size_t>& spatial) {
    if (spatial == in_spatial_) return;
    in_spatial_ = spatial;
    const int pad = (k_ - 1) / 2;

    out_spatial_.clear();
    n_in_ = 1;
    n_out_ = 1;
    for (int a = 0; a < rank_; ++a) {
        const auto in = static_cast<std::ptrdiff_t>(spatial[static_cast<std::size_t>(a)]);
        const auto out = (in + 2 * pad - k_) / stride_ + 1;
        if (out < 1) throw std::invalid_argument("Conv: spatial extent too small");
        out_spatial_.push_back(static_cast<std::size_t>(out));
        n_in_ *= static_cast<std::size_t>(in);
        n_out_ *= static_cast<std::size_t>(out);
    }

    // Per-tap linear input offset for every output position, or -1 in the
    // zero-padding fringe. Tap-major so the im2col inner loop streams.
    tap_offset_.assign(taps_ * n_out_, -1);
    std::vector<std::ptrdiff_t> in_stride(static_cast<std::size_t>(rank_), 1);
    for (int a = rank_ - 2; a >= 0; --a)
        in_stride[static_cast<std::size_t>(a)] =
            in_stride[static_cast<std::size_t>(a) + 1] *
            static_cast<std::ptrdiff_t>(spatial[static_cast<std::size_t>(a) + 1]);

    std::vector<std::ptrdiff_t> opos(static_cast<std::size_t>(rank_), 0);
    for (std::size_t p = 0; p < n_out_; ++p) {
        for (std::size_t t = 0; t < taps_; ++t) {
            std::size_t tt = t;
            std::ptrdiff_t off = 0;
            bool inside = true;
            for (int a = rank_ - 1; a >= 0; --a) {
                const auto kk = static_cast<std::ptrdiff_t>(tt % static_cast<std::size_t>(k_));
                tt /= static_cast<std::size_t>(k_);
                const std::ptrdiff_t coord =
                    opos[static_cast<std::size_t>(a)] * stride_ - pad + kk;
                if (coord < 0 ||
                    coord >= static_cast<std::ptrdiff_t>(spatial[static_cast<std::size_t>(a)])) {
                    inside = false;
                    break;
                }
                off += coord * in_stride[static_cast<std::size_t>(a)];
            }
            if (inside) tap_offset_[t * n_out_ + p] = off;
        }
        for (int a = rank_ - 1; a >= 0; --a) {
            if (++opos[static_cast<std::size_t>(a)] <
                static_cast<std::ptrdiff_t>(out_spatial_[static_cast<std::size_t>(a)]))
                break;
            opos[static_cast<std::size_t>(a)] = 0;
        }
    }
}

namespace {

struct AxisRange {
    std::ptrdiff_t lo, hi;  // valid output index range [lo, hi)
};

// Output index i maps to input coordinate i*stride + (d - pad).
inline AxisRange axis_range(std::ptrdiff_t in, std::ptrdiff_t out, int stride, int pad,
                            int d) {
    const std::ptrdiff_t shift = d - pad;
    std::ptrdiff_t lo = 0;
    if (shift < 0) lo = (-shift + stride - 1) / stride;
    std::ptrdiff_t hi = std::min<std::ptrdiff_t>(out, (in - 1 - shift) / stride + 1);
    if (hi < lo) hi = lo;
    return {lo, hi};
}

struct ConvDims {
    int rank, k, stride, pad;
    std::ptrdiff_t in[3], out[3];
};

inline void tap_deltas_of(int rank, int k, std::size_t t, int* d) {
    for (int a = rank - 1; a >= 0; --a) {
        d[a] = static_cast<int>(t % static_cast<std::size_t>(k));
        t /= static_cast<std::size_t>(k);
    }
}

// y[p] (+)= w * x[src(p)] over the tap's valid region (one channel plane
// each); contiguous inner loops for stride 1.
template <bool kScatter>
inline void tap_shift(const ConvDims& cd, double wv, const double* xin, double* out,
                      const int* d) {
    const int s = cd.stride;
    if (cd.rank == 1) {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const std::ptrdiff_t base = r0.lo * s + d[0] - cd.pad;
        if constexpr (kScatter) {
            for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i)
                out[base + (i - r0.lo) * s] += wv * xin[i];
        } else {
            for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i)
                out[i] += wv * xin[base + (i - r0.lo) * s];
        }
    } else if (cd.rank == 2) {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const auto r1 = axis_range(cd.in[1], cd.out[1], s, cd.pad, d[1]);
        for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i) {
            const std::ptrdiff_t orow = i * cd.out[1];
            const std::ptrdiff_t irow =
                (i * s + d[0] - cd.pad) * cd.in[1] + r1.lo * s + d[1] - cd.pad;
            if constexpr (kScatter) {
                const double* g = xin + orow;
                double* xr = out + irow;
                if (s == 1)
                    for (std::ptrdiff_t j = r1.lo; j < r1.hi; ++j)
                        xr[j - r1.lo] += wv * g[j];
                else
                    for (std::ptrdiff_t j = r1.lo, q = 0; j < r1.hi; ++j, q += s)
                        xr[q] += wv * g[j];
            } else {
                double* yr = out + orow;
                const double* xr = xin + irow;
                if (s == 1)
                    for (std::ptrdiff_t j = r1.lo; j < r1.hi; ++j)
                        yr[j] += wv * xr[j - r1.lo];
                else
                    for (std::ptrdiff_t j = r1.lo, q = 0; j < r1.hi; ++j, q += s)
                        yr[j] += wv * xr[q];
            }
        }
    } else {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const auto r1 = axis_range(cd.in[1], cd.out[1], s, cd.pad, d[1]);
        const auto r2 = axis_range(cd.in[2], cd.out[2], s, cd.pad, d[2]);
        for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i) {
            for (std::ptrdiff_t j = r1.lo; j < r1.hi; ++j) {
                const std::ptrdiff_t orow = (i * cd.out[1] + j) * cd.out[2];
                const std::ptrdiff_t irow =
                    ((i * s + d[0] - cd.pad) * cd.in[1] + j * s + d[1] - cd.pad) * cd.in[2] +
                    r2.lo * s + d[2] - cd.pad;
                if constexpr (kScatter) {
                    const double* g = xin + orow;
                    double* xr = out + irow;
                    if (s == 1)
                        for (std::ptrdiff_t kz = r2.lo; kz < r2.hi; ++kz)
                            xr[kz - r2.lo] += wv * g[kz];
                    else
                        for (std::ptrdiff_t kz = r2.lo, q = 0; kz < r2.hi; ++kz, q += s)
                            xr[q] += wv * g[kz];
                } else {
                    double* yr = out + orow;
                    const double* xr = xin + irow;
                    if (s == 1)
                        for (std::ptrdiff_t kz = r2.lo; kz < r2.hi; ++kz)
                            yr[kz] += wv * xr[kz - r2.lo];
                    else
                        for (std::ptrdiff_t kz = r2.lo, q = 0; kz < r2.hi; ++kz, q += s)
                            yr[kz] += wv * xr[q];
                }
            }
        }
    }
}

// acc += sum over the tap's valid region of gy[p] * x[src(p)].
inline double tap_inner_sum(const ConvDims& cd, const double* gyp, const double* xp,
                            const int* d) {
    const int s = cd.stride;
    double acc = 0.0;
    if (cd.rank == 1) {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const double* xr = xp + r0.lo * s + d[0] - cd.pad;
        for (std::ptrdiff_t i = r0.lo, q = 0; i < r0.hi; ++i, q += s)
            acc += gyp[i] * xr[q];
    } else if (cd.rank == 2) {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const auto r1 = axis_range(cd.in[1], cd.out[1], s, cd.pad, d[1]);
        for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i) {
            const double* g = gyp + i * cd.out[1];
            const double* xr =
                xp + (i * s + d[0] - cd.pad) * cd.in[1] + r1.lo * s + d[1] - cd.pad;
            if (s == 1)
                for (std::ptrdiff_t j = r1.lo; j < r1.hi; ++j) acc += g[j] * xr[j - r1.lo];
            else
                for (std::ptrdiff_t j = r1.lo, q = 0; j < r1.hi; ++j, q += s)
                    acc += g[j] * xr[q];
        }
    } else {
        const auto r0 = axis_range(cd.in[0], cd.out[0], s, cd.pad, d[0]);
        const auto r1 = axis_range(cd.in[1], cd.out[1], s, cd.pad, d[1]);
        const auto r2 = axis_range(cd.in[2], cd.out[2], s, cd.pad, d[2]);
        for (std::ptrdiff_t i = r0.lo; i < r0.hi; ++i) {
            for (std::ptrdiff_t j = r1.lo; j < r1.hi; ++j) {
                const double* g = gyp + (i * cd.out[1] + j) * cd.out[2];
                const double* xr =
                    xp +
                    ((i * s + d[0] - cd.pad) * cd.in[1] + j * s + d[1] - cd.pad) * cd.in[2] +
                    r2.lo * s + d[2] - cd.pad;
                if (s == 1)
                    for (std::ptrdiff_t kz = r2.lo; kz < r2.hi; ++kz)
                        acc += g[kz] * xr[kz - r2.lo];
                else
                    for (std::ptrdiff_t kz = r2.lo, q = 0; kz < r2.hi; ++kz, q += s)
                        acc += g[kz] * xr[q];
            }
        }
    }
    return acc;
}

// Large planes favor the direct kernels (im2col expands data k^rank times);
// narrow 1-D planes amortize better through the GEMM path.
constexpr std::size_t kDirectPlaneThreshold = 512;

}  // namespace

Tensor Conv::forward(Tensor x) {
    if (x.rank() != static_cast<std::size_t>(rank_) + 2 || x.dim(1) != cin_)
        throw std::invalid_argument("Conv " + w.name + ": bad input shape " +
                                    Tensor::shape_str(x.shape()));
    build_tables(std::vector<std::size_t>(x.shape().begin() + 2, x.shape().end()));
    batch_ = x.dim(0);
    direct_ = taps_ > 1 && n_out_ >= kDirectPlaneThreshold;
    if (direct_) return forward_direct(std::move(x));
    const std::size_t batch = batch_;
    const std::size_t rows = cin_ * taps_;

    x_ = Tensor();  // GEMM path keeps patches instead of the input

    // im2col in (cin*taps, batch*n_out) layout: streaming writes, tap-major
    // offset table.
    patches_.ensure({rows, batch * n_out_});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        for (std::size_t ci = 0; ci < cin_; ++ci) {
            const double* src = x.data() + (bu * cin_ + ci) * n_in_;
            for (std::size_t t = 0; t < taps_; ++t) {
                double* dst = patches_.data() + (ci * taps_ + t) * (batch * n_out_) +
                              bu * n_out_;
                const std::ptrdiff_t* tab = tap_offset_.data() + t * n_out_;
                for (std::size_t p = 0; p < n_out_; ++p)
                    dst[p] = tab[p] >= 0 ? src[tab[p]] : 0.0;
            }
        }
    }

    // One GEMM in the (positions x channels) orientation, which is the fast
    // shape for narrow channel counts, then a bandwidth-only permute.
    ygemm_.ensure({batch * n_out_, cout_});
    {
        CMap pm(patches_.data(), Idx(rows), Idx(batch * n_out_));
        CMap wm(w.value.data(), Idx(cout_), Idx(rows));
        Map ym(ygemm_.data(), Idx(batch * n_out_), Idx(cout_));
        ym.noalias() = pm.transpose() * wm.transpose();
    }

    std::vector<std::size_t> yshape = {batch, cout_};
    yshape.insert(yshape.end(), out_spatial_.begin(), out_spatial_.end());
    Tensor y = Tensor::uninit(yshape);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        for (std::size_t co = 0; co < cout_; ++co) {
            const double* src = ygemm_.data() + bu * n_out_ * cout_ + co;
            const double bias = b.value[co];
            double* dst = y.data() + (bu * cout_ + co) * n_out_;
            for (std::size_t p = 0; p < n_out_; ++p) dst[p] = src[p * cout_] + bias;
        }
    }
    return y;
}

Tensor Conv::backward(const Tensor& gy) {
    if (direct_) return backward_direct(gy);
    const std::size_t batch = batch_;
    const std::size_t rows = cin_ * taps_;

    // gy permuted to (batch*n_out, cout) so both parameter and input
    // gradients are single GEMMs with fixed accumulation order.
    Tensor gyr = Tensor::uninit({batch * n_out_, cout_});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        for (std::size_t co = 0; co < cout_; ++co) {
            const double* src = gy.data() + (bu * cout_ + co) * n_out_;
            double* dst = gyr.data() + bu * n_out_ * cout_ + co;
            for (std::size_t p = 0; p < n_out_; ++p) dst[p * cout_] = src[p];
        }
    }

    {
        CMap gym(gyr.data(), Idx(batch * n_out_), Idx(cout_));
        CMap pm(patches_.data(), Idx(rows), Idx(batch * n_out_));
        Map gwm(w.grad.data(), Idx(cout_), Idx(rows));
        gwm.noalias() += gym.transpose() * pm.transpose();
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(cout_); ++co) {
        const auto cu = static_cast<std::size_t>(co);
        double acc = 0.0;
        const double* g = gyr.data() + cu;
        for (std::size_t i = 0; i < batch * n_out_; ++i) acc += g[i * cout_];
        b.grad[cu] += acc;
    }

    Tensor gpr = Tensor::uninit({batch * n_out_, rows});
    {
        CMap gym(gyr.data(), Idx(batch * n_out_), Idx(cout_));
        CMap wm(w.value.data(), Idx(cout_), Idx(rows));
        Map gpm(gpr.data(), Idx(batch * n_out_), Idx(rows));
        gpm.noalias() = gym * wm;
    }

    std::vector<std::size_t> xshape = {batch, cin_};
    xshape.insert(xshape.end(), in_spatial_.begin(), in_spatial_.end());
    Tensor gx(xshape);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        for (std::size_t ci = 0; ci < cin_; ++ci) {
            double* dst = gx.data() + (bu * cin_ + ci) * n_in_;
            for (std::size_t t = 0; t < taps_; ++t) {
                const std::ptrdiff_t* tab = tap_offset_.data() + t * n_out_;
                const double* src = gpr.data() + bu * n_out_ * rows + ci * taps_ + t;
                for (std::size_t p = 0; p < n_out_; ++p)
                    if (tab[p] >= 0) dst[tab[p]] += src[p * rows];
            }
        }
    }
    return gx;
}


Tensor Conv::forward_direct(Tensor x) {
    x_ = std::move(x);
    patches_ = Tensor();
    ygemm_ = Tensor();
    ConvDims cd{rank_, k_, stride_, (k_ - 1) / 2, {1, 1, 1}, {1, 1, 1}};
    for (int a = 0; a < rank_; ++a) {
        cd.in[a] = static_cast<std::ptrdiff_t>(in_spatial_[static_cast<std::size_t>(a)]);
        cd.out[a] = static_cast<std::ptrdiff_t>(out_spatial_[static_cast<std::size_t>(a)]);
    }

    std::vector<std::size_t> yshape = {batch_, cout_};
    yshape.insert(yshape.end(), out_spatial_.begin(), out_spatial_.end());
    Tensor y = Tensor::uninit(yshape);

#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch_); ++bi) {
        for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(cout_); ++co) {
            const auto bu = static_cast<std::size_t>(bi);
            const auto cu = static_cast<std::size_t>(co);
            double* yp = y.data() + (bu * cout_ + cu) * n_out_;
            const double bias = b.value[cu];
            for (std::size_t p = 0; p < n_out_; ++p) yp[p] = bias;
            int d[3];
            for (std::size_t ci = 0; ci < cin_; ++ci) {
                const double* xp = x_.data() + (bu * cin_ + ci) * n_in_;
                const double* wrow = w.value.data() + (cu * cin_ + ci) * taps_;
                for (std::size_t t = 0; t < taps_; ++t) {
                    tap_deltas_of(rank_, k_, t, d);
                    tap_shift<false>(cd, wrow[t], xp, yp, d);
                }
            }
        }
    }
    return y;
}

Tensor Conv::backward_direct(const Tensor& gy) {
    ConvDims cd{rank_, k_, stride_, (k_ - 1) / 2, {1, 1, 1}, {1, 1, 1}};
    for (int a = 0; a < rank_; ++a) {
        cd.in[a] = static_cast<std::ptrdiff_t>(in_spatial_[static_cast<std::size_t>(a)]);
        cd.out[a] = static_cast<std::ptrdiff_t>(out_spatial_[static_cast<std::size_t>(a)]);
    }
    const std::size_t batch = batch_;

    // Weight gradients: one owner thread per (co, ci); the gy/x plane pair is
    // reused across all taps, and the batch reduction stays ordered.
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(cout_); ++co) {
        for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(cin_); ++ci) {
            const auto cu = static_cast<std::size_t>(co);
            const auto cj = static_cast<std::size_t>(ci);
            double acc[27] = {0.0};
            int d[3];
            for (std::size_t bu = 0; bu < batch; ++bu) {
                const double* gyp = gy.data() + (bu * cout_ + cu) * n_out_;
                const double* xp = x_.data() + (bu * cin_ + cj) * n_in_;
                for (std::size_t t = 0; t < taps_; ++t) {
                    tap_deltas_of(rank_, k_, t, d);
                    acc[t] += tap_inner_sum(cd, gyp, xp, d);
                }
            }
            for (std::size_t t = 0; t < taps_; ++t)
                w.grad[(cu * cin_ + cj) * taps_ + t] += acc[t];
        }
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t co = 0; co < static_cast<std::ptrdiff_t>(cout_); ++co) {
        const auto cu = static_cast<std::size_t>(co);
        double acc = 0.0;
        for (std::size_t bu = 0; bu < batch; ++bu) {
            const double* gyp = gy.data() + (bu * cout_ + cu) * n_out_;
            for (std::size_t p = 0; p < n_out_; ++p) acc += gyp[p];
        }
        b.grad[cu] += acc;
    }

    std::vector<std::size_t> xshape = {batch, cin_};
    xshape.insert(xshape.end(), in_spatial_.begin(), in_spatial_.end());
    Tensor gx(xshape);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(cin_); ++ci) {
            const auto bu = static_cast<std::size_t>(bi);
            const auto cj = static_cast<std::size_t>(ci);
            double* gxp = gx.data() + (bu * cin_ + cj) * n_in_;
            int d[3];
            for (std::size_t cu = 0; cu < cout_; ++cu) {
                const double* gyp = gy.data() + (bu * cout_ + cu) * n_out_;
                const double* wrow = w.value.data() + (cu * cin_ + cj) * taps_;
                for (std::size_t t = 0; t < taps_; ++t) {
                    tap_deltas_of(rank_, k_, t, d);
                    tap_shift<true>(cd, wrow[t], gyp, gxp, d);
                }
            }
        }
    }
    return gx;
}

void Conv::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

// ---------------------------------------------------------------------------
// GroupNorm
// ---------------------------------------------------------------------------

int GroupNorm::resolve_groups(std::size_t channels, int requested) {
    int g = std::min<int>(requested, static_cast<int>(channels));
    while (g > 1 && channels % static_cast<std::size_t>(g) != 0) --g;
    return std::max(g, 1);
}

GroupNorm::GroupNorm(const std::string& name, std::size_t channels, int groups_requested)
    : gamma(name + ".g", {channels}),
      beta(name + ".b", {channels}),
      groups(resolve_groups(channels, groups_requested)),
      channels_(channels) {
    gamma.value.fill(1.0);
}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.rank() < 2 || x.dim(1) != channels_)
        throw std::invalid_argument("GroupNorm " + gamma.name + ": bad input shape");
    in_shape_ = x.shape();
    const std::size_t batch = x.dim(0);
    const std::size_t spatial = x.size() / (batch * channels_);
    const std::size_t gs = channels_ / static_cast<std::size_t>(groups);
    const std::size_t m = gs * spatial;
    constexpr double eps = 1e-5;

    xhat_.ensure(x.shape());
    inv_std_.assign(batch * static_cast<std::size_t>(groups), 0.0);
    Tensor y = Tensor::uninit(x.shape());

#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        for (std::ptrdiff_t gi = 0; gi < groups; ++gi) {
            const auto bu = static_cast<std::size_t>(bi);
            const auto gu = static_cast<std::size_t>(gi);
            const double* xs = x.data() + (bu * channels_ + gu * gs) * spatial;
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += xs[i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = xs[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std_[bu * static_cast<std::size_t>(groups) + gu] = is;

            double* xh = xhat_.data() + (bu * channels_ + gu * gs) * spatial;
            double* ys = y.data() + (bu * channels_ + gu * gs) * spatial;
            for (std::size_t c = 0; c < gs; ++c) {
                const double gc = gamma.value[gu * gs + c];
                const double bc = beta.value[gu * gs + c];
                for (std::size_t sp = 0; sp < spatial; ++sp) {
                    const std::size_t i = c * spatial + sp;
                    xh[i] = (xs[i] - mean) * is;
                    ys[i] = gc * xh[i] + bc;
                }
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    const std::size_t batch = in_shape_[0];
    const std::size_t spatial = gy.size() / (batch * channels_);
    const std::size_t gs = channels_ / static_cast<std::size_t>(groups);
    const std::size_t m = gs * spatial;

    Tensor gx = Tensor::uninit(gy.shape());
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        for (std::ptrdiff_t gi = 0; gi < groups; ++gi) {
            const auto bu = static_cast<std::size_t>(bi);
            const auto gu = static_cast<std::size_t>(gi);
            const double* gys = gy.data() + (bu * channels_ + gu * gs) * spatial;
            const double* xh = xhat_.data() + (bu * channels_ + gu * gs) * spatial;
            const double is = inv_std_[bu * static_cast<std::size_t>(groups) + gu];

            double sum1 = 0.0, sum2 = 0.0;
            for (std::size_t c = 0; c < gs; ++c) {
                const double gc = gamma.value[gu * gs + c];
                for (std::size_t sp = 0; sp < spatial; ++sp) {
                    const std::size_t i = c * spatial + sp;
                    const double dxh = gys[i] * gc;
                    sum1 += dxh;
                    sum2 += dxh * xh[i];
                }
            }
            double* gxs = gx.data() + (bu * channels_ + gu * gs) * spatial;
            for (std::size_t c = 0; c < gs; ++c) {
                const double gc = gamma.value[gu * gs + c];
                for (std::size_t sp = 0; sp < spatial; ++sp) {
                    const std::size_t i = c * spatial + sp;
                    const double dxh = gys[i] * gc;
                    gxs[i] = is * (dxh - (sum1 + xh[i] * sum2) / static_cast<double>(m));
                }
            }
        }
    }

    // Parameter gradients, ordered reduction over batch and space.
    for (std::size_t c = 0; c < channels_; ++c) {
        double dg = 0.0, db = 0.0;
        for (std::size_t bu = 0; bu < batch; ++bu) {
            const double* gys = gy.data() + (bu * channels_ + c) * spatial;
            const double* xh = xhat_.data() + (bu * channels_ + c) * spatial;
            for (std::size_t sp = 0; sp < spatial; ++sp) {
                dg += gys[sp] * xh[sp];
                db += gys[sp];
            }
        }
        gamma.grad[c] += dg;
        beta.grad[c] += db;
    }
    return gx;
}

void GroupNorm::collect(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tensor SiLU::forward(Tensor x) {
    x_ = std::move(x);
    Tensor y = Tensor::uninit(x_.shape());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] = x_[static_cast<std::size_t>(i)] *
                                         sigmoid(x_[static_cast<std::size_t>(i)]);
    return y;
}

Tensor SiLU::backward(const Tensor& gy) {
    Tensor gx = Tensor::uninit(gy.shape());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(gy.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double s = sigmoid(x_[i]);
        gx[i] = gy[i] * s * (1.0 + x_[i] * (1.0 - s));
    }
    return gx;
}

Tensor GELU::forward(Tensor x) {
    x_ = std::move(x);
    Tensor y = Tensor::uninit(x_.shape());
    for (std::size_t i = 0; i < x_.size(); ++i)
        y[i] = 0.5 * x_[i] * (1.0 + std::erf(x_[i] / std::numbers::sqrt2));
    return y;
}

Tensor GELU::backward(const Tensor& gy) {
    Tensor gx = Tensor::uninit(gy.shape());
    for (std::size_t i = 0; i < gy.size(); ++i) {
        const double phi_big = 0.5 * (1.0 + std::erf(x_[i] / std::numbers::sqrt2));
        const double phi_small =
            std::exp(-0.5 * x_[i] * x_[i]) / std::sqrt(2.0 * std::numbers::pi);
        gx[i] = gy[i] * (phi_big + x_[i] * phi_small);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// UpsampleNearest
// ---------------------------------------------------------------------------

Tensor UpsampleNearest::forward(const Tensor& x) {
    in_shape_ = x.shape();
    std::vector<std::size_t> yshape = {x.dim(0), x.dim(1)};
    for (int a = 0; a < rank_; ++a) yshape.push_back(x.dim(2 + static_cast<std::size_t>(a)) * 2);
    Tensor y = Tensor::uninit(yshape);

    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::size_t s1 = rank_ >= 1 ? x.dim(2) : 1;
    const std::size_t s2 = rank_ >= 2 ? x.dim(3) : 1;
    const std::size_t s3 = rank_ >= 3 ? x.dim(4) : 1;
    const std::size_t n_in = s1 * s2 * s3;
    const std::size_t n_out = n_in * (1u << rank_);

    for (std::size_t pl = 0; pl < planes; ++pl) {
        const double* src = x.data() + pl * n_in;
        double* dst = y.data() + pl * n_out;
        if (rank_ == 1) {
            for (std::size_t i = 0; i < s1; ++i) dst[2 * i] = dst[2 * i + 1] = src[i];
        } else if (rank_ == 2) {
            for (std::size_t i = 0; i < s1; ++i)
                for (std::size_t j = 0; j < s2; ++j) {
                    const double v = src[i * s2 + j];
                    const std::size_t base = 2 * i * 2 * s2 + 2 * j;
                    dst[base] = dst[base + 1] = v;
                    dst[base + 2 * s2] = dst[base + 2 * s2 + 1] = v;
                }
        } else {
            for (std::size_t i = 0; i < s1; ++i)
                for (std::size_t j = 0; j < s2; ++j)
                    for (std::size_t kz = 0; kz < s3; ++kz) {
                        const double v = src[(i * s2 + j) * s3 + kz];
                        for (int di = 0; di < 2; ++di)
                            for (int dj = 0; dj < 2; ++dj)
                                for (int dk = 0; dk < 2; ++dk)
                                    dst[((2 * i + static_cast<std::size_t>(di)) * 2 * s2 +
                                         (2 * j + static_cast<std::size_t>(dj))) *
                                            2 * s3 +
                                        2 * kz + static_cast<std::size_t>(dk)] = v;
                    }
        }
    }
    return y;
}

Tensor UpsampleNearest::backward(const Tensor& gy) {
    Tensor gx = Tensor::uninit(in_shape_);
    const std::size_t planes = in_shape_[0] * in_shape_[1];
    const std::size_t s1 = rank_ >= 1 ? in_shape_[2] : 1;
    const std::size_t s2 = rank_ >= 2 ? in_shape_[3] : 1;
    const std::size_t s3 = rank_ >= 3 ? in_shape_[4] : 1;
    const std::size_t n_in = s1 * s2 * s3;
    const std::size_t n_out = n_in * (1u << rank_);

    for (std::size_t pl = 0; pl < planes; ++pl) {
        const double* src = gy.data() + pl * n_out;
        double* dst = gx.data() + pl * n_in;
        if (rank_ == 1) {
            for (std::size_t i = 0; i < s1; ++i) dst[i] = src[2 * i] + src[2 * i + 1];
        } else if (rank_ == 2) {
            for (std::size_t i = 0; i < s1; ++i)
                for (std::size_t j = 0; j < s2; ++j) {
                    const std::size_t base = 2 * i * 2 * s2 + 2 * j;
                    dst[i * s2 + j] = src[base] + src[base + 1] + src[base + 2 * s2] +
                                      src[base + 2 * s2 + 1];
                }
        } else {
            for (std::size_t i = 0; i < s1; ++i)
                for (std::size_t j = 0; j < s2; ++j)
                    for (std::size_t kz = 0; kz < s3; ++kz) {
                        double acc = 0.0;
                        for (int di = 0; di < 2; ++di)
                            for (int dj = 0; dj < 2; ++dj)
                                for (int dk = 0; dk < 2; ++dk)
                                    acc += src[((2 * i + static_cast<std::size_t>(di)) * 2 * s2 +
                                                (2 * j + static_cast<std::size_t>(dj))) *
                                                   2 * s3 +
                                               2 * kz + static_cast<std::size_t>(dk)];
                        dst[(i * s2 + j) * s3 + kz] = acc;
                    }
        }
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

namespace {

void softmax_rows_inplace(Map m) {
    for (Idx r = 0; r < m.rows(); ++r) {
        double mx = m(r, 0);
        for (Idx c = 1; c < m.cols(); ++c) mx = std::max(mx, m(r, c));
        double sum = 0.0;
        for (Idx c = 0; c < m.cols(); ++c) {
            m(r, c) = std::exp(m(r, c) - mx);
            sum += m(r, c);
        }
        for (Idx c = 0; c < m.cols(); ++c) m(r, c) /= sum;
    }
}

// dS = A . (dA - rowwise_dot(dA, A))
void softmax_rows_backward(const CMap a, Map da) {
    for (Idx r = 0; r < a.rows(); ++r) {
        double dot = 0.0;
        for (Idx c = 0; c < a.cols(); ++c) dot += da(r, c) * a(r, c);
        for (Idx c = 0; c < a.cols(); ++c) da(r, c) = a(r, c) * (da(r, c) - dot);
    }
}

}  // namespace

Tensor AttentionCore::forward(Tensor q, Tensor k, Tensor v) {
    if (q.rank() != 3 || !q.same_shape(k) || !q.same_shape(v))
        throw std::invalid_argument("attention: q/k/v must share shape (B,C,N)");
    const std::size_t batch = q.dim(0), c = q.dim(1), n = q.dim(2);
    if (c == 0 || n == 0) throw std::invalid_argument("attention: token count is zero");
    q_ = std::move(q);
    k_ = std::move(k);
    v_ = std::move(v);

    const std::size_t r = mode_ == AttnMode::spatial ? n : c;  // token count
    const double scale =
        1.0 / std::sqrt(static_cast<double>(mode_ == AttnMode::spatial ? c : n));
    attn_.ensure({batch, r, r});
    Tensor o = Tensor::uninit(q_.shape());

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        CMap qm(q_.data() + bu * c * n, Idx(c), Idx(n));
        CMap km(k_.data() + bu * c * n, Idx(c), Idx(n));
        CMap vm(v_.data() + bu * c * n, Idx(c), Idx(n));
        Map am(attn_.data() + bu * r * r, Idx(r), Idx(r));
        Map om(o.data() + bu * c * n, Idx(c), Idx(n));
        if (mode_ == AttnMode::spatial) {
            am.noalias() = qm.transpose() * km * scale;  // (N,N)
            if (softmax_) softmax_rows_inplace(am);
            om.noalias() = vm * am.transpose();
        } else {
            am.noalias() = qm * km.transpose() * scale;  // (C,C)
            if (softmax_) softmax_rows_inplace(am);
            om.noalias() = am * vm;
        }
    }
    return o;
}

void AttentionCore::backward(const Tensor& go, Tensor& gq, Tensor& gk, Tensor& gv) {
    const std::size_t batch = q_.dim(0), c = q_.dim(1), n = q_.dim(2);
    const std::size_t r = mode_ == AttnMode::spatial ? n : c;
    const double scale =
        1.0 / std::sqrt(static_cast<double>(mode_ == AttnMode::spatial ? c : n));
    gq = Tensor::uninit(q_.shape());
    gk = Tensor::uninit(q_.shape());
    gv = Tensor::uninit(q_.shape());

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
        const auto bu = static_cast<std::size_t>(bi);
        CMap qm(q_.data() + bu * c * n, Idx(c), Idx(n));
        CMap km(k_.data() + bu * c * n, Idx(c), Idx(n));
        CMap vm(v_.data() + bu * c * n, Idx(c), Idx(n));
        CMap am(attn_.data() + bu * r * r, Idx(r), Idx(r));
        CMap gom(go.data() + bu * c * n, Idx(c), Idx(n));
        Map gqm(gq.data() + bu * c * n, Idx(c), Idx(n));
        Map gkm(gk.data() + bu * c * n, Idx(c), Idx(n));
        Map gvm(gv.data() + bu * c * n, Idx(c), Idx(n));

        Mat da(static_cast<Idx>(r), static_cast<Idx>(r));
        if (mode_ == AttnMode::spatial) {
            gvm.noalias() = gom * am;               // dV = dO A
            da.noalias() = gom.transpose() * vm;    // dA = dO^T V
            if (softmax_)
                softmax_rows_backward(CMap(am.data(), Idx(r), Idx(r)),
                                      Map(da.data(), Idx(r), Idx(r)));
            gqm.noalias() = km * da.transpose() * scale;  // dQ = K dS^T
            gkm.noalias() = qm * da * scale;              // dK = Q dS
        } else {
            gvm.noalias() = am.transpose() * gom;   // dV = A^T dO
            da.noalias() = gom * vm.transpose();    // dA = dO V^T
            if (softmax_)
                softmax_rows_backward(CMap(am.data(), Idx(r), Idx(r)),
                                      Map(da.data(), Idx(r), Idx(r)));
            gqm.noalias() = da * km * scale;              // dQ = dS K
            gkm.noalias() = da.transpose() * qm * scale;  // dK = dS^T Q
        }
    }
}

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, AttnMode mode,
                      bool softmax) {
    AttentionCore core(mode, softmax);
    return core.forward(q, k, v);
}

AttentionBlock::AttentionBlock(const std::string& name, std::size_t channels, AttnMode mode,
                               bool softmax, int norm_groups, Rng& rng)
    : channels_(channels),
      norm_(name + ".norm", channels, norm_groups),
      to_q_(name + ".q", 1, channels, channels, 1, 1, rng),
      to_k_(name + ".k", 1, channels, channels, 1, 1, rng),
      to_v_(name + ".v", 1, channels, channels, 1, 1, rng),
      proj_(name + ".proj", 1, channels, channels, 1, 1, rng, /*zero_init=*/true),
      core_(mode, softmax) {}

Tensor AttentionBlock::forward(Tensor x) {
    in_shape_ = x.shape();
    Tensor xn = std::move(x);
    const std::size_t n = xn.size() / (xn.dim(0) * channels_);
    xn.reshape({xn.dim(0), channels_, n});

    Tensor h = norm_.forward(xn);
    Tensor q = to_q_.forward(h);
    Tensor k = to_k_.forward(h);
    Tensor v = to_v_.forward(h);
    Tensor o = core_.forward(std::move(q), std::move(k), std::move(v));
    o = proj_.forward(o);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += xn[i];
    o.reshape(in_shape_);
    return o;
}

Tensor AttentionBlock::backward(const Tensor& gy) {
    Tensor g = gy;
    const std::size_t n = gy.size() / (gy.dim(0) * channels_);
    g.reshape({gy.dim(0), channels_, n});

    Tensor go = proj_.backward(g);
    Tensor gq, gk, gv;
    core_.backward(go, gq, gk, gv);
    Tensor gh = to_q_.backward(gq);
    {
        const Tensor gh_k = to_k_.backward(gk);
        const Tensor gh_v = to_v_.backward(gv);
        for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += gh_k[i] + gh_v[i];
    }
    Tensor gx = norm_.backward(gh);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];  // residual
    gx.reshape(in_shape_);
    return gx;
}

void AttentionBlock::collect(std::vector<Param*>& out) {
    norm_.collect(out);
    to_q_.collect(out);
    to_k_.collect(out);
    to_v_.collect(out);
    proj_.collect(out);
}

// ---------------------------------------------------------------------------
// ConditionedResBlock
// ---------------------------------------------------------------------------

ConditionedResBlock::ConditionedResBlock(const std::string& name, int rank, std::size_t cin,
                                         std::size_t cout, std::size_t cond_width,
                                         int norm_groups, bool cond_residual, Rng& rng)
    : conv1_(name + ".conv1", rank, cin, cout, 3, 1, rng),
      gn1_(name + ".gn1", cout, norm_groups),
      conv2_(name + ".conv2", rank, cout, cout, 3, 1, rng, /*zero_init=*/true),
      gn2_(name + ".gn2", cout, norm_groups),
      cond_residual_(cond_residual) {
    if (cin != cout) skip_.emplace(name + ".skip", rank, cin, cout, 1, 1, rng);
    if (cond_width > 0)
        cond_proj_.emplace(name + ".cond", cond_width, cout, rng, /*zero_init=*/true);
}

Tensor ConditionedResBlock::forward(Tensor x, const Tensor* g) {
    if (conditioned() && g == nullptr)
        throw std::invalid_argument("ConditionedResBlock: missing conditioning input");
    if (conditioned() && g->dim(0) != x.dim(0))
        throw std::invalid_argument("ConditionedResBlock: conditioning batch mismatch");
    Tensor h = conv1_.forward(x);
    if (!test_linear_mode) {
        h = gn1_.forward(h);
        h = act1_.forward(h);
    }

    if (conditioned()) {
        Tensor s = cond_proj_->forward(*g);  // (B, cout)
        if (s.dim(1) != h.dim(1))
            throw std::invalid_argument("ConditionedResBlock: channel mismatch");
        scale_ = s;
        const double base = cond_residual_ ? 1.0 : 0.0;
        for (std::size_t i = 0; i < scale_.size(); ++i) scale_[i] += base;
        h_pre_scale_ = h;
        const std::size_t batch = h.dim(0), c = h.dim(1);
        const std::size_t spatial = h.size() / (batch * c);
        for (std::size_t bu = 0; bu < batch; ++bu)
            for (std::size_t cu = 0; cu < c; ++cu) {
                double* p = h.data() + (bu * c + cu) * spatial;
                const double sc = scale_.at(bu, cu);
                for (std::size_t i = 0; i < spatial; ++i) p[i] *= sc;
            }
    }

    h = conv2_.forward(h);
    if (!test_linear_mode) {
        h = gn2_.forward(h);
        h = act2_.forward(h);
    }

    const Tensor sk = skip_ ? skip_->forward(x) : x;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += sk[i];
    return h;
}

Tensor ConditionedResBlock::backward(const Tensor& gy, Tensor* dg) {
    Tensor g2 = gy;
    if (!test_linear_mode) {
        g2 = act2_.backward(g2);
        g2 = gn2_.backward(g2);
    }
    g2 = conv2_.backward(g2);

    if (conditioned()) {
        const std::size_t batch = g2.dim(0), c = g2.dim(1);
        const std::size_t spatial = g2.size() / (batch * c);
        Tensor ds({batch, c});
        for (std::size_t bu = 0; bu < batch; ++bu)
            for (std::size_t cu = 0; cu < c; ++cu) {
                const double* gp = g2.data() + (bu * c + cu) * spatial;
                const double* hp = h_pre_scale_.data() + (bu * c + cu) * spatial;
                double acc = 0.0;
                for (std::size_t i = 0; i < spatial; ++i) acc += gp[i] * hp[i];
                ds.at(bu, cu) = acc;
                double* gm = g2.data() + (bu * c + cu) * spatial;
                const double sc = scale_.at(bu, cu);
                for (std::size_t i = 0; i < spatial; ++i) gm[i] *= sc;
            }
        const Tensor dgp = cond_proj_->backward(ds);
        if (dg)
            for (std::size_t i = 0; i < dg->size(); ++i) (*dg)[i] += dgp[i];
    }

    Tensor g1 = std::move(g2);
    if (!test_linear_mode) {
        g1 = act1_.backward(g1);
        g1 = gn1_.backward(g1);
    }
    Tensor gx = conv1_.backward(g1);

    if (skip_) {
        const Tensor gsk = skip_->backward(gy);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gsk[i];
    } else {
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    }
    return gx;
}

void ConditionedResBlock::collect(std::vector<Param*>& out) {
    conv1_.collect(out);
    gn1_.collect(out);
    conv2_.collect(out);
    gn2_.collect(out);
    if (skip_) skip_->collect(out);
    if (cond_proj_) cond_proj_->collect(out);
}

// ---------------------------------------------------------------------------
// GateBlock
// ---------------------------------------------------------------------------

GateBlock::GateBlock(const std::string& name, int rank, std::size_t channels, int norm_groups,
                     Rng& rng)
    : conv1_(name + ".conv1", rank, channels, channels, 3, 1, rng),
      gn_(name + ".gn", channels, norm_groups),
      conv2_(name + ".conv2", rank, channels, channels, 3, 1, rng, /*zero_init=*/true) {}

Tensor GateBlock::forward(Tensor x) {
    Tensor h = conv1_.forward(x);
    h = gn_.forward(h);
    h = act_.forward(h);
    h = conv2_.forward(h);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
    return h;
}

Tensor GateBlock::backward(const Tensor& gy) {
    Tensor g = conv2_.backward(gy);
    g = act_.backward(g);
    g = gn_.backward(g);
    Tensor gx = conv1_.backward(g);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    return gx;
}

void GateBlock::collect(std::vector<Param*>& out) {
    conv1_.collect(out);
    gn_.collect(out);
    conv2_.collect(out);
}

}  // namespace ditto::nn
