/// Mean relative-L2 training loss with a stabilized denominator.
#pragma once

#include "ditto/tensor.hpp"

namespace ditto::train {

struct LossConfig {
    double epsilon = 1e-8;

    void validate() const;
};

/// Mean over the leading (batch) axis of ||pred - target||_2 / (eps +
/// ||target||_2); per-sample fields are flattened. Shapes must match.
double relative_l2_loss(const Tensor& pred, const Tensor& target, double eps = 1e-8);

/// Same value, plus d(loss)/d(pred) in `gpred` (allocated to pred's shape).
double relative_l2_loss_grad(const Tensor& pred, const Tensor& target, double eps,
                             Tensor& gpred);

}  // namespace ditto::train
