#include "ditto/pod.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ditto/io.hpp"
#include "ditto/rng.hpp"
#include "ditto/train/schedule.hpp"

namespace ditto::pod {

using json = nlohmann::json;

PodBasis compute_pod(const Tensor& snapshots, int r) {
    if (snapshots.rank() != 2)
        throw std::invalid_argument("compute_pod: snapshots must be (time x space)");
    const std::size_t nt = snapshots.dim(0), ns = snapshots.dim(1);
    if (nt < 1 || ns < 1) throw std::invalid_argument("compute_pod: empty snapshot matrix");
    if (r < 1 || static_cast<std::size_t>(r) > std::min(nt, ns))
        throw std::invalid_argument("compute_pod: r must be in [1, min(time, space)]");

    PodBasis basis;
    basis.mean = Tensor({ns});
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t i = 0; i < ns; ++i) basis.mean[i] += snapshots.at(t, i);
    for (std::size_t i = 0; i < ns; ++i) basis.mean[i] /= static_cast<double>(nt);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat a(nt, ns);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t i = 0; i < ns; ++i) a(t, i) = snapshots.at(t, i) - basis.mean[i];

    // Snapshot method: eigendecompose the (time x time) Gram matrix.
    const Mat gram = a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("compute_pod: eigensolver failed");

    // Ascending order from Eigen; walk from the back.
    const auto& evals = eig.eigenvalues();
    const auto& evecs = eig.eigenvectors();
    const double tol = std::max(evals(evals.size() - 1), 0.0) * 1e-12;

    int usable = 0;
    for (Eigen::Index i = evals.size() - 1; i >= 0; --i)
        if (evals(i) > tol && usable < r) ++usable;
    if (usable < r) {
        std::cerr << "compute_pod: requested r=" << r << " exceeds numerical rank; reduced to "
                  << usable << "\n";
        r = usable;
    }
    if (r < 1) throw std::invalid_argument("compute_pod: snapshot matrix has rank 0");

    basis.modes = Tensor({static_cast<std::size_t>(r), ns});
    basis.eigenvalues.resize(static_cast<std::size_t>(r));
    for (int k = 0; k < r; ++k) {
        const Eigen::Index src = evals.size() - 1 - k;
        basis.eigenvalues[static_cast<std::size_t>(k)] = std::max(evals(src), 0.0);
        Eigen::VectorXd phi = a.transpose() * evecs.col(src);
        const double norm = phi.norm();
        if (norm > 0.0) phi /= norm;
        for (std::size_t i = 0; i < ns; ++i)
            basis.modes.at(static_cast<std::size_t>(k), i) = phi(static_cast<Eigen::Index>(i));
    }
    return basis;
}

Tensor project(const PodBasis& basis, const Tensor& field) {
    if (field.size() != basis.space())
        throw std::invalid_argument("project: field size does not match the basis");
    Tensor c({basis.r()});
    for (std::size_t k = 0; k < basis.r(); ++k) {
        double acc = 0.0;
        const double* mode = basis.modes.data() + k * basis.space();
        for (std::size_t i = 0; i < basis.space(); ++i)
            acc += mode[i] * (field[i] - basis.mean[i]);
        c[k] = acc;
    }
    return c;
}

Tensor lift(const PodBasis& basis, const Tensor& coeffs) {
    if (coeffs.size() != basis.r())
        throw std::invalid_argument("lift: coefficient count does not match the basis");
    Tensor f({basis.space()});
    for (std::size_t i = 0; i < basis.space(); ++i) f[i] = basis.mean[i];
    for (std::size_t k = 0; k < basis.r(); ++k) {
        const double* mode = basis.modes.data() + k * basis.space();
        for (std::size_t i = 0; i < basis.space(); ++i) f[i] += coeffs[k] * mode[i];
    }
    return f;
}

void save_basis(const PodBasis& basis, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto mean_bytes = tensor_to_f32(basis.mean);
    const auto mode_bytes = tensor_to_f32(basis.modes);
    json manifest;
    manifest["schema_version"] = 1;
    manifest["r"] = basis.r();
    manifest["space"] = basis.space();
    manifest["eigenvalues"] = basis.eigenvalues;
    manifest["mean_checksum"] = fnv1a(mean_bytes.data(), mean_bytes.size());
    manifest["modes_checksum"] = fnv1a(mode_bytes.data(), mode_bytes.size());
    atomic_write(dir / "mean.f32", mean_bytes);
    atomic_write(dir / "modes.f32", mode_bytes);
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

PodBasis load_basis(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text(dir / "manifest.json"));
    if (manifest.at("schema_version").get<int>() != 1)
        throw std::runtime_error("load_basis: unsupported schema version");
    const auto r = manifest.at("r").get<std::size_t>();
    const auto space = manifest.at("space").get<std::size_t>();
    const auto mean_bytes = read_bytes(dir / "mean.f32");
    const auto mode_bytes = read_bytes(dir / "modes.f32");
    if (manifest.at("mean_checksum").get<std::uint64_t>() !=
            fnv1a(mean_bytes.data(), mean_bytes.size()) ||
        manifest.at("modes_checksum").get<std::uint64_t>() !=
            fnv1a(mode_bytes.data(), mode_bytes.size()))
        throw std::runtime_error("load_basis: checksum mismatch");
    PodBasis basis;
    basis.mean = tensor_from_f32(mean_bytes, {space});
    basis.modes = tensor_from_f32(mode_bytes, {r, space});
    basis.eigenvalues = manifest.at("eigenvalues").get<std::vector<double>>();
    return basis;
}

PodPipelineResult pod_pipeline(const Tensor& series, const PodPipelineConfig& cfg) {
    if (series.rank() != 2)
        throw std::invalid_argument("pod_pipeline: series must be (time x space)");
    const int n_snap = static_cast<int>(series.dim(0));
    const std::size_t space = series.dim(1);
    if (cfg.train_steps < 1 || cfg.train_steps >= n_snap)
        throw std::invalid_argument(
            "pod_pipeline: train_steps must split the series (horizon exceeds reference)");
    const int n_train_snap = cfg.train_steps + 1;
    if (cfg.lf < 1 || cfg.lf >= n_train_snap)
        throw std::invalid_argument("pod_pipeline: lf must be below the training snapshots");

    PodPipelineResult res;

    // Basis from the training region only.
    Tensor train_block({static_cast<std::size_t>(n_train_snap), space});
    std::copy(series.data(), series.data() + train_block.size(), train_block.data());
    res.basis = compute_pod(train_block, cfg.r);
    const auto r = res.basis.r();

    // Coefficient series for every snapshot.
    Tensor coeffs({static_cast<std::size_t>(n_snap), r});
    for (int t = 0; t < n_snap; ++t) {
        Tensor field({space});
        std::copy(series.data() + static_cast<std::size_t>(t) * space,
                  series.data() + static_cast<std::size_t>(t + 1) * space, field.data());
        const Tensor c = project(res.basis, field);
        std::copy(c.data(), c.data() + r, coeffs.data() + static_cast<std::size_t>(t) * r);
    }

    // Training windows: starts 0 .. n_train_snap - lf - 1 (the final window is
    // excluded, matching the reduced-order pipeline's window count).
    const int n_windows = n_train_snap - cfg.lf;
    res.n_windows = static_cast<std::size_t>(n_windows);
    const int val_windows =
        std::max(1, static_cast<int>(std::llround(cfg.val_fraction * n_windows)));
    const int train_windows = n_windows - val_windows;
    if (train_windows < 1)
        throw std::invalid_argument("pod_pipeline: no training windows left after validation");

    struct WSample {
        int s, j;
    };
    std::vector<WSample> train_samples, val_samples;
    for (int s = 0; s < n_windows; ++s)
        for (int j = 1; j <= cfg.lf; ++j)
            (s < train_windows ? train_samples : val_samples).push_back({s, j});

    // Model over the coefficient vector as a 1-D field of length r.
    nn::ModelConfig mc = cfg.model;
    mc.dimension = 1;
    mc.grid = {static_cast<int>(r)};
    res.model = nn::build_model(mc, cfg.seed);

    train::Adam adam(res.model->params(), cfg.opt);
    const int steps_per_epoch = static_cast<int>(
        (train_samples.size() + static_cast<std::size_t>(cfg.opt.batch_size) - 1) /
        static_cast<std::size_t>(cfg.opt.batch_size));
    const int total_steps = cfg.opt.epochs * steps_per_epoch;

    const auto gather = [&](const std::vector<WSample>& samples, std::size_t b,
                            std::size_t e, Tensor& x, Tensor& y,
                            std::vector<double>& scalars) {
        x = Tensor({e - b, r});
        y = Tensor({e - b, r});
        scalars.resize(e - b);
        for (std::size_t i = b; i < e; ++i) {
            const auto& w = samples[i];
            std::copy(coeffs.data() + static_cast<std::size_t>(w.s) * r,
                      coeffs.data() + static_cast<std::size_t>(w.s + 1) * r,
                      x.data() + (i - b) * r);
            std::copy(coeffs.data() + static_cast<std::size_t>(w.s + w.j) * r,
                      coeffs.data() + static_cast<std::size_t>(w.s + w.j + 1) * r,
                      y.data() + (i - b) * r);
            scalars[i - b] = static_cast<double>(w.j);
        }
    };

    const auto eval_val = [&]() {
        double acc = 0.0;
        Tensor x, y;
        std::vector<double> sc;
        const auto bs = static_cast<std::size_t>(cfg.opt.batch_size);
        for (std::size_t b = 0; b < val_samples.size(); b += bs) {
            const std::size_t e = std::min(val_samples.size(), b + bs);
            gather(val_samples, b, e, x, y, sc);
            acc += train::relative_l2_loss(res.model->forward(x, sc), y,
                                           cfg.loss.epsilon) *
                   static_cast<double>(e - b);
        }
        return acc / static_cast<double>(val_samples.size());
    };

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params = res.model->snapshot_values();
    int global_step = 0;
    Tensor x, y, gpred;
    std::vector<double> scalars;
    for (int epoch = 0; epoch < cfg.opt.epochs; ++epoch) {
        auto samples = train_samples;
        Rng rng(mix_seed(cfg.seed, 0x90d + static_cast<std::uint64_t>(epoch)));
        rng.shuffle(samples);
        const auto bs = static_cast<std::size_t>(cfg.opt.batch_size);
        for (std::size_t b = 0; b < samples.size(); b += bs) {
            const std::size_t e = std::min(samples.size(), b + bs);
            gather(samples, b, e, x, y, scalars);
            const Tensor pred = res.model->forward(x, scalars);
            const double loss =
                train::relative_l2_loss_grad(pred, y, cfg.loss.epsilon, gpred);
            if (!std::isfinite(loss)) {
                res.model->restore_values(best_params);
                throw std::runtime_error("pod_pipeline: non-finite training loss");
            }
            res.model->zero_grad();
            res.model->backward(gpred);
            adam.step(train::cosine_lr(std::min(global_step, total_steps), total_steps,
                                       cfg.opt.lr0));
            ++global_step;
        }
        const double v = eval_val();
        if (v < best_val) {
            best_val = v;
            best_params = res.model->snapshot_values();
        }
    }
    res.model->restore_values(best_params);

    // Roll out from the end of the training region, lift, and score.
    const int horizon = n_snap - 1 - cfg.train_steps;
    rollout::RolloutConfig rc;
    rc.lf = std::min(cfg.lf, horizon);  // short horizons end on a partial bundle
    rc.horizon = horizon;
    rc.train_horizon = cfg.train_steps;
    rc.dt = 1.0;
    Tensor state({r});
    std::copy(coeffs.data() + static_cast<std::size_t>(cfg.train_steps) * r,
              coeffs.data() + static_cast<std::size_t>(cfg.train_steps + 1) * r,
              state.data());
    const auto rr = rollout_bundled(*res.model, state, rc);

    double err_acc = 0.0;
    int counted = 0;
    for (int k = 1; k <= horizon; ++k) {
        if (rr.truncated_at && k >= *rr.truncated_at) break;
        Tensor ck({r});
        std::copy(rr.states.data() + static_cast<std::size_t>(k) * r,
                  rr.states.data() + static_cast<std::size_t>(k + 1) * r, ck.data());
        const Tensor pred_field = lift(res.basis, ck);
        Tensor ref({space});
        std::copy(series.data() + static_cast<std::size_t>(cfg.train_steps + k) * space,
                  series.data() + static_cast<std::size_t>(cfg.train_steps + k + 1) * space,
                  ref.data());
        const double err = rollout::rel_l2_error(pred_field, ref);
        res.report.rows.push_back({"pod_pipeline", to_string(mc.variant), "step",
                                   static_cast<double>(k), err, 0.0});
        err_acc += err;
        ++counted;
    }
    res.mean_extrapolation_error = counted > 0 ? err_acc / counted : 1e300;
    return res;
}

}  // namespace ditto::pod
