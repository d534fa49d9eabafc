#include "ditto/train/schedule.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "ditto/rng.hpp"

namespace ditto::train {

std::vector<std::vector<int>> subsample_epoch(int M, int T, double alpha,
                                              std::uint64_t seed) {
    if (M < 1 || T < 1) throw std::invalid_argument("subsample_epoch: M, T must be >= 1");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("subsample_epoch: alpha must be in (0, 1]");
    const auto total = static_cast<long long>(
        std::llround(alpha * static_cast<double>(M) * static_cast<double>(T)));
    if (total < 1)
        throw std::invalid_argument("subsample_epoch: alpha*M*T rounds below one sample");

    Rng rng(mix_seed(seed, 0x5a11));

    // Balanced sizes: base everywhere, one extra for `rem` trajectories
    // chosen at random.
    const auto base = static_cast<int>(total / M);
    const auto rem = static_cast<int>(total % M);
    std::vector<int> sizes(static_cast<std::size_t>(M), base);
    std::vector<std::size_t> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int i = 0; i < rem; ++i) ++sizes[order[static_cast<std::size_t>(i)]];

    std::vector<std::vector<int>> subsets(static_cast<std::size_t>(M));
    std::vector<int> pool(static_cast<std::size_t>(T));
    for (std::size_t m = 0; m < subsets.size(); ++m) {
        const int want = sizes[m];
        if (want > T)
            throw std::invalid_argument("subsample_epoch: subset size exceeds T");
        if (want == T) {
            subsets[m].resize(static_cast<std::size_t>(T));
            std::iota(subsets[m].begin(), subsets[m].end(), 1);
            continue;
        }
        std::iota(pool.begin(), pool.end(), 1);  // indices 1..T
        // Partial Fisher-Yates: the first `want` entries are the draw.
        for (int i = 0; i < want; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           rng.below(static_cast<std::uint64_t>(T - i));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        subsets[m].assign(pool.begin(), pool.begin() + want);
        std::sort(subsets[m].begin(), subsets[m].end());
    }
    return subsets;
}

void BundlingConfig::validate() const {
    if (nt < 1) throw std::invalid_argument("BundlingConfig: nt must be >= 1");
    if (lf < 1 || lf > nt)
        throw std::invalid_argument("BundlingConfig: 1 <= lf <= nt required (lf=" +
                                    std::to_string(lf) + ", nt=" + std::to_string(nt) + ")");
}

std::vector<SubTrajectory> make_bundled_pairs(int nt, int lf) {
    BundlingConfig{lf, nt, true}.validate();
    std::vector<SubTrajectory> subs;
    subs.reserve(static_cast<std::size_t>(nt - lf + 1));
    for (int s = 0; s <= nt - lf; ++s) subs.push_back({s, lf});
    return subs;
}

double cosine_lr(int step, int total, double lr0) {
    if (total < 1) throw std::invalid_argument("cosine_lr: total must be >= 1");
    if (step < 0 || step > total)
        throw std::invalid_argument("cosine_lr: step out of [0, total]");
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total));
}

}  // namespace ditto::train
