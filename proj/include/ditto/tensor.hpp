/// Dense row-major tensor of doubles with a small runtime shape.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ditto {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)),
          size_(numel_of(shape_)),
          data_(new double[size_]()) {}

    Tensor(std::initializer_list<std::size_t> shape)
        : Tensor(std::vector<std::size_t>(shape)) {}

    /// Allocation without the zero fill, for buffers that are fully
    /// overwritten immediately.
    static Tensor uninit(std::vector<std::size_t> shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.size_ = numel_of(t.shape_);
        t.data_ = std::make_unique_for_overwrite<double[]>(t.size_);
        return t;
    }

    Tensor(const Tensor& o) : shape_(o.shape_), size_(o.size_) {
        if (size_) {
            data_ = std::make_unique_for_overwrite<double[]>(size_);
            std::copy(o.data_.get(), o.data_.get() + size_, data_.get());
        }
    }
    Tensor& operator=(const Tensor& o) {
        if (this == &o) return *this;
        shape_ = o.shape_;
        if (size_ != o.size_) {
            size_ = o.size_;
            data_ = size_ ? std::make_unique_for_overwrite<double[]>(size_) : nullptr;
        }
        if (size_) std::copy(o.data_.get(), o.data_.get() + size_, data_.get());
        return *this;
    }
    Tensor(Tensor&&) noexcept = default;
    Tensor& operator=(Tensor&&) noexcept = default;

    /// Reuse the existing allocation when the element count matches;
    /// otherwise reallocate (uninitialized).
    void ensure(std::vector<std::size_t> shape) {
        const std::size_t n = numel_of(shape);
        if (n != size_) {
            size_ = n;
            data_ = std::make_unique_for_overwrite<double[]>(size_);
        }
        shape_ = std::move(shape);
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    double* data() { return data_.get(); }
    const double* data() const { return data_.get(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(double v) { std::fill(data_.get(), data_.get() + size_, v); }
    void zero() { fill(0.0); }

    /// Reinterpret the shape; element count must match.
    void reshape(std::vector<std::size_t> shape) {
        if (numel_of(shape) != size_)
            throw std::invalid_argument("Tensor::reshape: element count mismatch");
        shape_ = std::move(shape);
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (std::size_t i = 0; i < size_; ++i)
            if (!std::isfinite(data_[i])) return false;
        return true;
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::string r = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(s[i]);
        }
        return r + ")";
    }

private:
    std::vector<std::size_t> shape_;
    std::size_t size_ = 0;
    std::unique_ptr<double[]> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

}  // namespace ditto
