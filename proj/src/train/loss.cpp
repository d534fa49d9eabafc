#include "ditto/train/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace ditto::train {

void LossConfig::validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("LossConfig: epsilon must be positive");
}

namespace {

double loss_impl(const Tensor& pred, const Tensor& target, double eps, Tensor* gpred) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("relative_l2_loss: shape mismatch " +
                                    Tensor::shape_str(pred.shape()) + " vs " +
                                    Tensor::shape_str(target.shape()));
    if (pred.rank() < 1 || pred.dim(0) == 0)
        throw std::invalid_argument("relative_l2_loss: empty batch");

    const std::size_t batch = pred.dim(0);
    const std::size_t n = pred.size() / batch;
    double acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* p = pred.data() + b * n;
        const double* t = target.data() + b * n;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = p[i] - t[i];
            num += d * d;
            den += t[i] * t[i];
        }
        num = std::sqrt(num);
        den = eps + std::sqrt(den);
        acc += num / den;
        if (gpred) {
            double* g = gpred->data() + b * n;
            // Subgradient 0 at the kink pred == target.
            const double scale =
                num > 0.0 ? 1.0 / (num * den * static_cast<double>(batch)) : 0.0;
            for (std::size_t i = 0; i < n; ++i) g[i] = scale * (p[i] - t[i]);
        }
    }
    return acc / static_cast<double>(batch);
}

}  // namespace

double relative_l2_loss(const Tensor& pred, const Tensor& target, double eps) {
    return loss_impl(pred, target, eps, nullptr);
}

double relative_l2_loss_grad(const Tensor& pred, const Tensor& target, double eps,
                             Tensor& gpred) {
    gpred = Tensor(pred.shape());
    return loss_impl(pred, target, eps, &gpred);
}

}  // namespace ditto::train
