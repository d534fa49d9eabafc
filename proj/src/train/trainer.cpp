#include "ditto/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ditto/rng.hpp"

namespace ditto::train {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::full: return "full";
        case Strategy::subsampled: return "subsampled";
        case Strategy::bundled: return "bundled";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "full") return Strategy::full;
    if (s == "subsampled") return Strategy::subsampled;
    if (s == "bundled") return Strategy::bundled;
    throw std::invalid_argument("unknown training strategy: " + s);
}

void TrainingSchedule::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("TrainingSchedule: alpha must be in (0, 1]");
    if (lf < 1) throw std::invalid_argument("TrainingSchedule: lf must be >= 1");
    if (train_horizon < 0)
        throw std::invalid_argument("TrainingSchedule: train_horizon must be >= 0");
    if (max_val_samples < 1)
        throw std::invalid_argument("TrainingSchedule: max_val_samples must be >= 1");
}

namespace {

int horizon_steps(const DatasetBundle& bundle, const TrainingSchedule& sched) {
    const int t_steps = static_cast<int>(bundle.trajectories.front().n_snapshots()) - 1;
    return sched.train_horizon > 0 ? std::min(sched.train_horizon, t_steps) : t_steps;
}

std::vector<SampleRef> all_bundled_samples(const DatasetBundle& bundle, Split split,
                                           const TrainingSchedule& sched) {
    const int nt = horizon_steps(bundle, sched);
    BundlingConfig{sched.lf, nt, sched.condition_on_offset}.validate();
    const auto& times = bundle.trajectories.front().times;
    std::vector<SampleRef> out;
    for (const std::size_t m : bundle.indices_of(split)) {
        for (int s = 0; s <= nt - sched.lf; ++s) {
            for (int j = 1; j <= sched.lf; ++j) {
                const double scalar = sched.condition_on_offset
                                          ? times[static_cast<std::size_t>(j)]
                                          : times[static_cast<std::size_t>(s + j)];
                out.push_back({m, s, s + j, scalar});
            }
        }
    }
    return out;
}

}  // namespace

std::vector<SampleRef> build_epoch_samples(const DatasetBundle& bundle, Split split,
                                           const TrainingSchedule& sched,
                                           std::uint64_t seed, int epoch) {
    sched.validate();
    if (bundle.trajectories.empty())
        throw std::invalid_argument("build_epoch_samples: empty bundle");
    const auto& times = bundle.trajectories.front().times;
    const auto traj_ids = bundle.indices_of(split);
    if (traj_ids.empty())
        throw std::invalid_argument("build_epoch_samples: empty split");
    const int t_steps = static_cast<int>(times.size()) - 1;

    std::vector<SampleRef> out;
    switch (sched.strategy) {
        case Strategy::full:
            for (const std::size_t m : traj_ids)
                for (int n = 1; n <= t_steps; ++n)
                    out.push_back({m, 0, n, times[static_cast<std::size_t>(n)]});
            break;
        case Strategy::subsampled: {
            const auto subsets =
                subsample_epoch(static_cast<int>(traj_ids.size()), t_steps, sched.alpha,
                                mix_seed(seed, static_cast<std::uint64_t>(epoch)));
            for (std::size_t i = 0; i < traj_ids.size(); ++i)
                for (const int n : subsets[i])
                    out.push_back({traj_ids[i], 0, n, times[static_cast<std::size_t>(n)]});
            break;
        }
        case Strategy::bundled: {
            out = all_bundled_samples(bundle, split, sched);
            if (sched.alpha < 1.0) {
                const auto want = static_cast<std::size_t>(std::max<long long>(
                    1, std::llround(sched.alpha * static_cast<double>(out.size()))));
                Rng rng(mix_seed(seed, 0xb0b0 + static_cast<std::uint64_t>(epoch)));
                for (std::size_t i = 0; i < want; ++i) {
                    const auto j = i + rng.below(out.size() - i);
                    std::swap(out[i], out[j]);
                }
                out.resize(want);
            }
            break;
        }
    }
    return out;
}

namespace {

void gather_batch(const DatasetBundle& bundle, const std::vector<SampleRef>& samples,
                  std::size_t begin, std::size_t end, Tensor& x, Tensor& y,
                  std::vector<double>& scalars) {
    const auto& shape = bundle.trajectories.front().fields.shape();
    std::vector<std::size_t> bshape = {end - begin};
    bshape.insert(bshape.end(), shape.begin() + 1, shape.end());
    x.ensure(bshape);
    y.ensure(bshape);
    scalars.resize(end - begin);
    const std::size_t n = bundle.trajectories.front().field_size();
    for (std::size_t i = begin; i < end; ++i) {
        const auto& s = samples[i];
        const auto& traj = bundle.trajectories[s.traj];
        std::copy(traj.snapshot(static_cast<std::size_t>(s.input_step)),
                  traj.snapshot(static_cast<std::size_t>(s.input_step)) + n,
                  x.data() + (i - begin) * n);
        std::copy(traj.snapshot(static_cast<std::size_t>(s.target_step)),
                  traj.snapshot(static_cast<std::size_t>(s.target_step)) + n,
                  y.data() + (i - begin) * n);
        scalars[i - begin] = s.scalar;
    }
}

}  // namespace

double evaluate_samples(nn::Model& model, const DatasetBundle& bundle,
                        const std::vector<SampleRef>& samples, double eps, int batch_size) {
    if (samples.empty()) throw std::invalid_argument("evaluate_samples: no samples");
    double acc = 0.0;
    Tensor x, y;
    std::vector<double> scalars;
    for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(batch_size)) {
        const std::size_t e = std::min(samples.size(), b + static_cast<std::size_t>(batch_size));
        gather_batch(bundle, samples, b, e, x, y, scalars);
        const Tensor pred = model.forward(x, scalars);
        acc += relative_l2_loss(pred, y, eps) * static_cast<double>(e - b);
    }
    return acc / static_cast<double>(samples.size());
}

TrainResult train(nn::Model& model, const DatasetBundle& bundle,
                  const TrainingSchedule& sched, const LossConfig& loss_cfg,
                  const OptimizerConfig& opt) {
    sched.validate();
    loss_cfg.validate();
    opt.validate();
    bundle.validate();
    if (bundle.indices_of(Split::train).empty())
        throw std::invalid_argument("train: empty train split");
    if (bundle.indices_of(Split::val).empty())
        throw std::invalid_argument("train: empty val split");

    // Fixed validation subset (same draw every epoch).
    TrainingSchedule val_sched = sched;
    val_sched.alpha = 1.0;
    std::vector<SampleRef> val_samples =
        build_epoch_samples(bundle, Split::val, val_sched, 0, 0);
    if (val_samples.size() > static_cast<std::size_t>(sched.max_val_samples)) {
        Rng rng(mix_seed(opt.seed, 0x77a1ULL));
        for (std::size_t i = 0; i < static_cast<std::size_t>(sched.max_val_samples); ++i) {
            const auto j = i + rng.below(val_samples.size() - i);
            std::swap(val_samples[i], val_samples[j]);
        }
        val_samples.resize(static_cast<std::size_t>(sched.max_val_samples));
    }

    const std::size_t per_epoch =
        build_epoch_samples(bundle, Split::train, sched, opt.seed, 0).size();
    const int steps_per_epoch = static_cast<int>(
        (per_epoch + static_cast<std::size_t>(opt.batch_size) - 1) /
        static_cast<std::size_t>(opt.batch_size));
    const int total_steps =
        opt.total_steps > 0 ? opt.total_steps : opt.epochs * steps_per_epoch;

    Adam adam(model.params(), opt);
    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params = model.snapshot_values();

    int global_step = 0;
    Tensor x, y, gpred;
    std::vector<double> scalars;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        auto samples = build_epoch_samples(bundle, Split::train, sched, opt.seed, epoch);
        Rng shuffle_rng(mix_seed(opt.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(samples);

        double train_acc = 0.0;
        const double lr_epoch = cosine_lr(std::min(global_step, total_steps), total_steps,
                                          opt.lr0);
        bool finite = true;
        for (std::size_t b = 0; b < samples.size() && finite;
             b += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t e =
                std::min(samples.size(), b + static_cast<std::size_t>(opt.batch_size));
            gather_batch(bundle, samples, b, e, x, y, scalars);
            const Tensor pred = model.forward(x, scalars);
            const double loss = relative_l2_loss_grad(pred, y, loss_cfg.epsilon, gpred);
            if (!std::isfinite(loss)) {
                finite = false;
                break;
            }
            model.zero_grad();
            model.backward(gpred);
            const double lr =
                cosine_lr(std::min(global_step, total_steps), total_steps, opt.lr0);
            adam.step(lr);
            ++global_step;
            train_acc += loss * static_cast<double>(e - b);
        }
        if (!finite) {
            model.restore_values(best_params);
            result.aborted = true;
            break;
        }

        const double train_loss = train_acc / static_cast<double>(samples.size());
        const double val_loss =
            evaluate_samples(model, bundle, val_samples, loss_cfg.epsilon, opt.batch_size);
        result.history.push_back({epoch, train_loss, val_loss, lr_epoch});
        if (val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            best_params = model.snapshot_values();
        }
    }

    model.restore_values(best_params);
    return result;
}

}  // namespace ditto::train
