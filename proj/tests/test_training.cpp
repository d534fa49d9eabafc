#include "doctest.h"

#include <cmath>
#include <numeric>
#include <set>

#include "ditto/train/adam.hpp"
#include "ditto/train/loss.hpp"
#include "ditto/train/schedule.hpp"
#include "ditto/train/trainer.hpp"
#include "grad_check.hpp"

using namespace ditto;
using namespace ditto::train;
using gradcheck::random_tensor;

// ---------------------------------------------------------------------------
// relative L2 loss
// ---------------------------------------------------------------------------

TEST_CASE("loss: closed-form values") {
    Tensor t = random_tensor({4, 10}, 1);
    SUBCASE("pred == target -> 0") {
        CHECK(relative_l2_loss(t, t, 1e-8) == 0.0);
    }
    SUBCASE("pred = 2 target -> 1 as eps -> 0") {
        Tensor p = t;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= 2.0;
        CHECK(relative_l2_loss(p, t, 1e-300) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero target: numerator / eps") {
        Tensor p({1, 2}), z({1, 2});
        p[0] = 1.0;
        p[1] = 0.0;
        CHECK(relative_l2_loss(p, z, 1e-8) == doctest::Approx(1e8).epsilon(1e-9));
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS(relative_l2_loss(Tensor({2, 3}), Tensor({3, 2}), 1e-8));
    }
    SUBCASE("positivity, zero iff equal") {
        Tensor p = t;
        p[5] += 1e-3;
        CHECK(relative_l2_loss(p, t, 1e-8) > 0.0);
    }
}

TEST_CASE("loss: gradient matches central finite differences") {
    Tensor target = random_tensor({3, 8}, 2);
    Tensor pred = random_tensor({3, 8}, 3);
    Tensor g;
    relative_l2_loss_grad(pred, target, 1e-8, g);
    const auto loss = [&] { return relative_l2_loss(pred, target, 1e-8); };
    const auto res = gradcheck::check_input(pred, g, loss);
    CHECK(res.checked == pred.size());
    CHECK(res.max_rel_err < 1e-6);
}

// ---------------------------------------------------------------------------
// sub-sampling schedule
// ---------------------------------------------------------------------------

TEST_CASE("subsample: alpha = 1 gives every index") {
    const auto subs = subsample_epoch(5, 7, 1.0, 9);
    for (const auto& s : subs) {
        REQUIRE(s.size() == 7);
        for (int i = 0; i < 7; ++i) CHECK(s[static_cast<std::size_t>(i)] == i + 1);
    }
}

TEST_CASE("subsample: totals are exact for the ablation alpha grid") {
    for (const double alpha : {0.05, 0.1, 0.2, 1.0}) {
        for (const auto& [m, t] : {std::pair{100, 50}, {32, 50}, {7, 13}}) {
            const auto subs = subsample_epoch(m, t, alpha, 123);
            std::size_t total = 0;
            std::size_t mn = 1u << 30, mx = 0;
            for (const auto& s : subs) {
                total += s.size();
                mn = std::min(mn, s.size());
                mx = std::max(mx, s.size());
                for (const int n : s) {
                    CHECK(n >= 1);
                    CHECK(n <= t);
                }
                CHECK(std::set<int>(s.begin(), s.end()).size() == s.size());
            }
            CHECK(total == static_cast<std::size_t>(std::llround(alpha * m * t)));
            CHECK(mx - mn <= 1);  // balanced within +-1
        }
    }
    // 5% of M=100, T=50 is 250 indices.
    const auto subs = subsample_epoch(100, 50, 0.05, 5);
    std::size_t total = 0;
    for (const auto& s : subs) total += s.size();
    CHECK(total == 250);
}

TEST_CASE("subsample: rejections and coverage") {
    CHECK_THROWS(subsample_epoch(2, 2, 0.01, 1));  // rounds below one sample
    CHECK_THROWS(subsample_epoch(2, 2, 1.5, 1));
    CHECK_THROWS(subsample_epoch(2, 2, 0.0, 1));

    // Coupon collector: alpha=0.1, T=50, 200 fresh epochs covers everything.
    const int m = 10, t = 50;
    std::vector<std::set<int>> seen(m);
    for (int epoch = 0; epoch < 200; ++epoch) {
        const auto subs = subsample_epoch(m, t, 0.1, 4242 + static_cast<std::uint64_t>(epoch));
        for (int mm = 0; mm < m; ++mm)
            for (const int n : subs[static_cast<std::size_t>(mm)])
                seen[static_cast<std::size_t>(mm)].insert(n);
    }
    for (const auto& s : seen) CHECK(s.size() == static_cast<std::size_t>(t));
}

TEST_CASE("subsample: unbiasedness of the sub-sampled loss") {
    // Frozen per-sample losses; the expectation over draws must match the
    // full mean within 3 sigma (Monte-Carlo over >= 1e3 draws).
    const int m = 8, t = 25;
    Rng rng(77);
    std::vector<std::vector<double>> sample_loss(m, std::vector<double>(t + 1, 0.0));
    double full = 0.0;
    for (int mm = 0; mm < m; ++mm)
        for (int n = 1; n <= t; ++n) {
            sample_loss[static_cast<std::size_t>(mm)][static_cast<std::size_t>(n)] =
                rng.uniform(0.1, 2.0);
            full += sample_loss[static_cast<std::size_t>(mm)][static_cast<std::size_t>(n)];
        }
    full /= m * t;

    const int draws = 2000;
    std::vector<double> means;
    for (int d = 0; d < draws; ++d) {
        const auto subs = subsample_epoch(m, t, 0.3, 900 + static_cast<std::uint64_t>(d));
        double acc = 0.0;
        std::size_t count = 0;
        for (int mm = 0; mm < m; ++mm)
            for (const int n : subs[static_cast<std::size_t>(mm)]) {
                acc += sample_loss[static_cast<std::size_t>(mm)][static_cast<std::size_t>(n)];
                ++count;
            }
        means.push_back(acc / static_cast<double>(count));
    }
    double mc_mean = 0.0;
    for (const double v : means) mc_mean += v;
    mc_mean /= draws;
    double mc_var = 0.0;
    for (const double v : means) mc_var += (v - mc_mean) * (v - mc_mean);
    mc_var /= draws - 1;
    const double se = std::sqrt(mc_var / draws);
    CHECK(std::abs(mc_mean - full) < 3.0 * se + 1e-12);
}

// ---------------------------------------------------------------------------
// bundling
// ---------------------------------------------------------------------------

TEST_CASE("bundling: sub-trajectory counts") {
    CHECK(make_bundled_pairs(100, 20).size() == 81);
    CHECK(make_bundled_pairs(100, 100).size() == 1);  // mapping strategy
    CHECK(make_bundled_pairs(100, 1).size() == 100);  // autoregressive strategy
    CHECK_THROWS(make_bundled_pairs(100, 101));
    CHECK_THROWS(make_bundled_pairs(100, 0));
}

TEST_CASE("bundling: boundary strategies produce exactly the classic pair sets") {
    // lf=1: every one-step pair (s -> s+1).
    {
        const auto subs = make_bundled_pairs(10, 1);
        std::set<std::pair<int, int>> pairs;
        for (const auto& st : subs)
            for (int j = 1; j <= st.lf; ++j) pairs.insert({st.start, st.start + j});
        std::set<std::pair<int, int>> expect;
        for (int s = 0; s < 10; ++s) expect.insert({s, s + 1});
        CHECK(pairs == expect);
    }
    // lf=nt: the single full mapping x_0 -> {x_1..x_nt}.
    {
        const auto subs = make_bundled_pairs(10, 10);
        REQUIRE(subs.size() == 1);
        std::set<std::pair<int, int>> pairs;
        for (int j = 1; j <= subs[0].lf; ++j) pairs.insert({subs[0].start, subs[0].start + j});
        std::set<std::pair<int, int>> expect;
        for (int n = 1; n <= 10; ++n) expect.insert({0, n});
        CHECK(pairs == expect);
    }
}

// ---------------------------------------------------------------------------
// cosine learning rate
// ---------------------------------------------------------------------------

TEST_CASE("cosine lr: endpoints and midpoint") {
    CHECK(cosine_lr(0, 100, 1e-3) == doctest::Approx(1e-3));
    CHECK(cosine_lr(100, 100, 1e-3) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_lr(50, 100, 1e-3) == doctest::Approx(5e-4));
    CHECK_THROWS(cosine_lr(0, 0, 1e-3));
    CHECK_THROWS(cosine_lr(-1, 10, 1e-3));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    Rng rng(5);
    nn::Linear lin("l", 4, 4, rng);
    std::vector<nn::Param*> ps;
    lin.collect(ps);
    const auto before = lin.w.value;
    OptimizerConfig cfg;
    Adam adam(ps, cfg);
    for (auto* p : ps) p->grad.zero();
    adam.step(1e-3);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(lin.w.value[i] == before[i]);
}

TEST_CASE("adam: clipping bounds the applied gradient norm") {
    Rng rng(6);
    nn::Linear lin("l", 8, 8, rng);
    std::vector<nn::Param*> ps;
    lin.collect(ps);
    for (auto* p : ps)
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] = 10.0;
    OptimizerConfig cfg;
    cfg.clip_norm = 1.0;
    Adam adam(ps, cfg);
    adam.step(1e-3);
    CHECK(adam.last_grad_norm() > 1.0);  // raw norm observed before clipping
}

// ---------------------------------------------------------------------------
// end-to-end training behavior on a tiny dataset
// ---------------------------------------------------------------------------

namespace {

DatasetBundle tiny_bundle(int count = 8, int t_steps = 6, int nx = 16) {
    PdeConfig cfg;
    cfg.kind = PdeKind::burgers;
    cfg.viscosity = 0.05;
    cfg.t_final = 0.5;
    cfg.n_steps = t_steps;
    cfg.grid = {nx};
    DatasetBundle b = generate_dataset(cfg, count, 31);
    split_dataset(b, {0.5, 0.25, 0.25}, 3);
    return b;
}

nn::ModelConfig tiny_model(int nx = 16) {
    nn::ModelConfig m;
    m.variant = nn::Variant::ditto;
    m.dimension = 1;
    m.grid = {nx};
    m.levels = 2;
    m.base_channels = 4;
    m.channel_mults = {1, 2};
    m.res_blocks_per_level = 1;
    m.attention_levels = {1};
    m.norm_groups = 4;
    m.d_emb = 8;
    m.mlp_hidden = 16;
    m.time_scale = 100.0;
    return m;
}

}  // namespace

TEST_CASE("train: reproducible histories, best-checkpoint retention") {
    const DatasetBundle bundle = tiny_bundle();
    TrainingSchedule sched;
    sched.strategy = Strategy::subsampled;
    sched.alpha = 0.5;
    OptimizerConfig opt;
    opt.epochs = 6;
    opt.batch_size = 8;
    opt.seed = 99;

    nn::Model m1(tiny_model(), 7);
    const auto r1 = train::train(m1, bundle, sched, LossConfig{}, opt);
    nn::Model m2(tiny_model(), 7);
    const auto r2 = train::train(m2, bundle, sched, LossConfig{}, opt);

    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
        CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
    }
    // Retained checkpoint has the minimum recorded validation loss.
    for (const auto& row : r1.history) CHECK(r1.best_val <= row.val_loss);
    // And the two models end bit-identical.
    for (std::size_t k = 0; k < m1.params().size(); ++k)
        for (std::size_t i = 0; i < m1.params()[k]->value.size(); ++i)
            CHECK(m1.params()[k]->value[i] == m2.params()[k]->value[i]);
}

TEST_CASE("train: alpha=1 sub-sampled epoch equals the full schedule") {
    const DatasetBundle bundle = tiny_bundle();
    TrainingSchedule full;
    full.strategy = Strategy::full;
    TrainingSchedule sub;
    sub.strategy = Strategy::subsampled;
    sub.alpha = 1.0;
    OptimizerConfig opt;
    opt.epochs = 2;
    opt.batch_size = 8;
    opt.seed = 55;

    nn::Model mf(tiny_model(), 11);
    const auto rf = train::train(mf, bundle, full, LossConfig{}, opt);
    nn::Model ms(tiny_model(), 11);
    const auto rs = train::train(ms, bundle, sub, LossConfig{}, opt);
    REQUIRE(rf.history.size() == rs.history.size());
    for (std::size_t i = 0; i < rf.history.size(); ++i)
        CHECK(std::abs(rf.history[i].train_loss - rs.history[i].train_loss) < 1e-6);
}

TEST_CASE("train: bundled sample construction conditions on the offset") {
    const DatasetBundle bundle = tiny_bundle(6, 6);
    TrainingSchedule sched;
    sched.strategy = Strategy::bundled;
    sched.lf = 2;
    sched.train_horizon = 4;
    const auto samples = build_epoch_samples(bundle, Split::train, sched, 1, 0);
    // 3 train trajectories, nt=4, lf=2 -> (4-2+1) starts x 2 offsets each.
    CHECK(samples.size() == 3 * 3 * 2);
    const double dt = bundle.trajectories.front().times[1];
    for (const auto& s : samples) {
        CHECK(s.target_step - s.input_step >= 1);
        CHECK(s.target_step - s.input_step <= 2);
        CHECK(s.scalar ==
              doctest::Approx(dt * (s.target_step - s.input_step)).epsilon(1e-12));
        CHECK(s.target_step <= 4);
    }
}

TEST_CASE("train: empty splits are rejected") {
    DatasetBundle bundle = tiny_bundle(4);
    for (auto& s : bundle.split) s = Split::train;  // no val left
    nn::Model m(tiny_model(), 1);
    OptimizerConfig opt;
    opt.epochs = 1;
    CHECK_THROWS(train::train(m, bundle, TrainingSchedule{}, LossConfig{}, opt));
}
