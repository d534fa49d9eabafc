#include "doctest.h"

#include <cmath>

#include "ditto/nn/embedding.hpp"
#include "ditto/nn/layers.hpp"
#include "grad_check.hpp"

using namespace ditto;
using namespace ditto::nn;
using gradcheck::ProbeLoss;
using gradcheck::random_tensor;

// ---------------------------------------------------------------------------
// Scalar embedding
// ---------------------------------------------------------------------------

TEST_CASE("embed_scalar: closed-form values") {
    SUBCASE("t = 0: sin slots are 0, cos slots are 1") {
        const auto e = embed_scalar(0.0, 8);
        for (std::size_t i = 0; i < e.size(); i += 2) {
            CHECK(e[i] == 0.0);
            CHECK(e[i + 1] == 1.0);
        }
    }
    SUBCASE("t = 1, d_emb = 4") {
        const auto e = embed_scalar(1.0, 4);
        CHECK(e[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
        CHECK(e[1] == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
        CHECK(e[2] == doctest::Approx(std::sin(0.01)).epsilon(1e-15));
        CHECK(e[3] == doctest::Approx(std::cos(0.01)).epsilon(1e-15));
    }
    SUBCASE("rejections") {
        CHECK_THROWS(embed_scalar(-0.5, 4));
        CHECK_THROWS(embed_scalar(std::nan(""), 4));
        CHECK_THROWS(embed_scalar(1.0, 5));
    }
}

TEST_CASE("embed_scalar: component-wise Lipschitz bound (frequencies <= 1)") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform(0.0, 200.0);
        const double delta = rng.uniform(1e-4, 2.0);
        const auto a = embed_scalar(t, 16);
        const auto b = embed_scalar(t + delta, 16);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(b[i] - a[i]) <= delta + 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Conditioning head
// ---------------------------------------------------------------------------

TEST_CASE("conditioning head: zero parameters -> output is the bias vectors") {
    Rng rng(5);
    ConditioningHead head("h", EmbeddingSpec{8, 16}, rng);
    std::vector<Param*> ps;
    head.collect(ps);
    for (auto* p : ps) p->value.zero();
    // set the second-layer bias to something recognizable
    ps[3]->value.fill(0.25);  // l2.b
    const Tensor e = embed_batch({0.3, 1.7}, 8);
    const Tensor g = head.forward(e);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.25));
}

TEST_CASE("conditioning head: gradient w.r.t. the embedding matches central FD") {
    Rng rng(7);
    ConditioningHead head("h", EmbeddingSpec{8, 16}, rng);
    Tensor e = random_tensor({3, 8}, 11);
    ProbeLoss probe({3, 16});

    head.forward(e);
    const Tensor ge = head.backward(probe.grad());

    const auto loss = [&] { return probe(head.forward(e)); };
    const auto res = gradcheck::check_input(e, ge, loss);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < 1e-4);
}

// ---------------------------------------------------------------------------
// Layer-by-layer parameter gradient checks (64-bit central differences)
// ---------------------------------------------------------------------------

namespace {

void zero_grads(std::vector<Param*>& ps) {
    for (auto* p : ps) p->grad.zero();
}

template <typename Fwd, typename Bwd>
void run_param_check(std::vector<Param*> ps, Fwd&& fwd, Bwd&& bwd, const ProbeLoss& probe,
                     double tol = 1e-4) {
    zero_grads(ps);
    fwd();
    bwd();
    const auto res = gradcheck::check_params(ps, [&] { return probe(fwd()); });
    CAPTURE(res.worst);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_err < tol);
}

}  // namespace

TEST_CASE("gradients: linear layer") {
    Rng rng(3);
    Linear lin("lin", 6, 5, rng);
    Tensor x = random_tensor({4, 6}, 21);
    ProbeLoss probe({4, 5});
    std::vector<Param*> ps;
    lin.collect(ps);
    run_param_check(
        ps, [&] { return lin.forward(x); }, [&] { lin.backward(probe.grad()); }, probe);
}

TEST_CASE("gradients: convolutions across rank, kernel, stride") {
    Rng rng(4);
    struct Case {
        int rank, k, stride;
        std::vector<std::size_t> shape;  // input (B, Cin, S...)
    };
    const std::vector<Case> cases = {
        {1, 3, 1, {2, 3, 12}},  {1, 3, 2, {2, 3, 12}},  {1, 1, 1, {2, 3, 12}},
        {2, 3, 1, {2, 2, 6, 6}}, {2, 3, 2, {2, 2, 6, 6}}, {3, 3, 1, {1, 2, 4, 4, 4}},
        {3, 3, 2, {1, 2, 4, 4, 4}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.rank);
        CAPTURE(c.stride);
        Conv conv("conv", c.rank, c.shape[1], 4, c.k, c.stride, rng);
        Tensor x = random_tensor(c.shape, 31 + static_cast<std::uint64_t>(c.rank));
        Tensor y = conv.forward(x);
        ProbeLoss probe(y.shape());
        std::vector<Param*> ps;
        conv.collect(ps);
        zero_grads(ps);
        conv.forward(x);
        const Tensor gx = conv.backward(probe.grad());
        const auto res = gradcheck::check_params(ps, [&] { return probe(conv.forward(x)); });
        CAPTURE(res.worst);
        CHECK(res.max_rel_err < 1e-4);
        const auto resx =
            gradcheck::check_input(x, gx, [&] { return probe(conv.forward(x)); });
        CHECK(resx.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradients: group norm") {
    GroupNorm gn("gn", 8, 4);
    Tensor x = random_tensor({2, 8, 10}, 41);
    ProbeLoss probe({2, 8, 10});
    std::vector<Param*> ps;
    gn.collect(ps);
    zero_grads(ps);
    gn.forward(x);
    const Tensor gx = gn.backward(probe.grad());
    const auto res = gradcheck::check_params(ps, [&] { return probe(gn.forward(x)); });
    CHECK(res.max_rel_err < 1e-4);
    const auto resx = gradcheck::check_input(x, gx, [&] { return probe(gn.forward(x)); });
    CHECK(resx.max_rel_err < 1e-4);
}

TEST_CASE("gradients: activations and upsampling") {
    SUBCASE("silu") {
        SiLU act;
        Tensor x = random_tensor({40}, 51);
        ProbeLoss probe({40});
        act.forward(x);
        const Tensor gx = act.backward(probe.grad());
        const auto res = gradcheck::check_input(x, gx, [&] { return probe(act.forward(x)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    SUBCASE("gelu") {
        GELU act;
        Tensor x = random_tensor({40}, 52);
        ProbeLoss probe({40});
        act.forward(x);
        const Tensor gx = act.backward(probe.grad());
        const auto res = gradcheck::check_input(x, gx, [&] { return probe(act.forward(x)); });
        CHECK(res.max_rel_err < 1e-4);
    }
    SUBCASE("nearest upsample, 2d") {
        UpsampleNearest up(2);
        Tensor x = random_tensor({2, 3, 4, 4}, 53);
        Tensor y = up.forward(x);
        CHECK(y.shape() == std::vector<std::size_t>{2, 3, 8, 8});
        ProbeLoss probe(y.shape());
        const Tensor gx = up.backward(probe.grad());
        const auto res = gradcheck::check_input(x, gx, [&] { return probe(up.forward(x)); });
        CHECK(res.max_rel_err < 1e-4);
    }
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

TEST_CASE("attention core: single token passes V through (softmax of one element)") {
    const Tensor q = random_tensor({1, 5, 1}, 61);
    const Tensor k = random_tensor({1, 5, 1}, 62);
    const Tensor v = random_tensor({1, 5, 1}, 63);
    const Tensor o = attention_core(q, k, v, AttnMode::spatial, true);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(o[i] == doctest::Approx(v[i]));
}

TEST_CASE("attention core: zero Q gives uniform weights -> mean of V rows") {
    const std::size_t c = 4, n = 7;
    Tensor q({1, c, n});  // zero
    const Tensor k = random_tensor({1, c, n}, 71);
    const Tensor v = random_tensor({1, c, n}, 72);

    SUBCASE("spatial: every output token is the token-mean of V") {
        const Tensor o = attention_core(q, k, v, AttnMode::spatial, true);
        for (std::size_t ci = 0; ci < c; ++ci) {
            double mean = 0.0;
            for (std::size_t j = 0; j < n; ++j) mean += v.at(0, ci, j);
            mean /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
                CHECK(o.at(0, ci, j) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
    SUBCASE("channel: every output row is the channel-mean of V") {
        const Tensor o = attention_core(q, k, v, AttnMode::channel, true);
        for (std::size_t j = 0; j < n; ++j) {
            double mean = 0.0;
            for (std::size_t ci = 0; ci < c; ++ci) mean += v.at(0, ci, j);
            mean /= static_cast<double>(c);
            for (std::size_t ci = 0; ci < c; ++ci)
                CHECK(o.at(0, ci, j) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention block: shape preserved, gradients correct, both modes") {
    for (const auto mode : {AttnMode::spatial, AttnMode::channel}) {
        for (const bool softmax : {true, false}) {
            CAPTURE(static_cast<int>(mode));
            CAPTURE(softmax);
            Rng rng(81);
            AttentionBlock blk("attn", 4, mode, softmax, 4, rng);
            // Randomize the zero-initialized projection so its gradient path
            // is exercised too.
            std::vector<Param*> ps;
            blk.collect(ps);
            for (auto* p : ps)
                if (p->value.size() && p->name.find("proj") != std::string::npos)
                    init_normal(p->value, rng, 0.3);

            Tensor x = random_tensor({2, 4, 9}, 82);
            Tensor y = blk.forward(x);
            CHECK(y.shape() == x.shape());

            ProbeLoss probe(y.shape());
            zero_grads(ps);
            blk.forward(x);
            const Tensor gx = blk.backward(probe.grad());
            const auto res =
                gradcheck::check_params(ps, [&] { return probe(blk.forward(x)); });
            CAPTURE(res.worst);
            CHECK(res.max_rel_err < 1e-4);
            const auto resx =
                gradcheck::check_input(x, gx, [&] { return probe(blk.forward(x)); });
            CHECK(resx.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("attention: zero tokens are rejected") {
    Tensor q({1, 3, 0});
    CHECK_THROWS(attention_core(q, q, q, AttnMode::spatial, true));
}

// ---------------------------------------------------------------------------
// Conditioned residual block
// ---------------------------------------------------------------------------

namespace {

ConditionedResBlock make_block(Rng& rng, std::size_t cin = 3, std::size_t cout = 4,
                               std::size_t cond = 6) {
    ConditionedResBlock blk("res", 2, cin, cout, cond, 4, true, rng);
    // Give the zero-initialized tails random values so every path carries
    // gradient signal.
    std::vector<Param*> ps;
    blk.collect(ps);
    for (auto* p : ps)
        if (p->name.find("conv2") != std::string::npos ||
            p->name.find("cond") != std::string::npos)
            init_normal(p->value, rng, 0.4);
    return blk;
}

}  // namespace

TEST_CASE("res block: s = 0 reduces to the unconditioned block") {
    Rng rng(91);
    ConditionedResBlock blk("res", 1, 4, 4, 6, 4, true, rng);
    // cond projection is zero-initialized, so s = 0 out of the box.
    Tensor x = random_tensor({2, 4, 8}, 92);
    Tensor g = random_tensor({2, 6}, 93);
    const Tensor with_cond = blk.forward(x, &g);

    Rng rng2(91);
    ConditionedResBlock plain("res", 1, 4, 4, 0, 4, true, rng2);
    const Tensor without = plain.forward(x, nullptr);
    REQUIRE(with_cond.size() == without.size());
    for (std::size_t i = 0; i < without.size(); ++i) CHECK(with_cond[i] == without[i]);
}

TEST_CASE("res block: output shape equals input shape") {
    Rng rng(94);
    ConditionedResBlock blk("res", 2, 4, 4, 6, 4, true, rng);
    Tensor x = random_tensor({3, 4, 6, 6}, 95);
    Tensor g = random_tensor({3, 6}, 96);
    CHECK(blk.forward(x, &g).shape() == x.shape());
    Tensor bad_g = random_tensor({2, 6}, 97);  // batch mismatch
    CHECK_THROWS(blk.forward(x, &bad_g));
}

TEST_CASE("res block: doubling (1+s) doubles the conditioning branch (linearized)") {
    Rng rng(98);
    ConditionedResBlock blk("res", 1, 3, 3, 4, 4, true, rng);
    blk.test_linear_mode = true;
    std::vector<Param*> ps;
    blk.collect(ps);
    // Drive s purely through the conditioning projection bias.
    Tensor* cond_w = nullptr;
    Tensor* cond_b = nullptr;
    for (auto* p : ps) {
        if (p->name == "res.cond.w") cond_w = &p->value;
        if (p->name == "res.cond.b") cond_b = &p->value;
        if (p->name == "res.conv2.w") init_normal(p->value, rng, 0.5);
    }
    REQUIRE(cond_w != nullptr);
    cond_w->zero();

    Tensor x = random_tensor({1, 3, 8}, 99);
    Tensor g = random_tensor({1, 4}, 100);

    const auto run_with_scale = [&](double s) {
        cond_b->fill(s);  // scale becomes (1 + s) everywhere
        return blk.forward(x, &g);
    };
    const Tensor base = run_with_scale(0.0);   // scale 1
    const Tensor one = run_with_scale(0.3);    // scale 1.3
    const Tensor two = run_with_scale(1.6);    // scale 2.6 = 2 * 1.3
    // contribution(s) := out(scale) - out(scale=0); doubling the scale must
    // double it in the linearized block.
    const Tensor zero = run_with_scale(-1.0);  // scale 0
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double c1 = one[i] - zero[i];
        const double c2 = two[i] - zero[i];
        CHECK(c2 == doctest::Approx(2.0 * c1).epsilon(1e-9));
    }
}

TEST_CASE("gradients: conditioned res block (params, input, conditioning)") {
    Rng rng(101);
    auto blk = make_block(rng);
    Tensor x = random_tensor({2, 3, 5, 5}, 102);
    Tensor g = random_tensor({2, 6}, 103);
    Tensor y = blk.forward(x, &g);
    ProbeLoss probe(y.shape());

    std::vector<Param*> ps;
    blk.collect(ps);
    zero_grads(ps);
    blk.forward(x, &g);
    Tensor dg({2, 6});
    const Tensor gx = blk.backward(probe.grad(), &dg);

    const auto loss = [&] { return probe(blk.forward(x, &g)); };
    const auto res = gradcheck::check_params(ps, loss);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(gradcheck::check_input(x, gx, loss).max_rel_err < 1e-4);
    CHECK(gradcheck::check_input(g, dg, loss).max_rel_err < 1e-4);
}

// ---------------------------------------------------------------------------
// Gate block
// ---------------------------------------------------------------------------

TEST_CASE("gate block: identity at initialization, correct gradients when live") {
    Rng rng(111);
    GateBlock gate("gate", 1, 3, 4, rng);
    Tensor x = random_tensor({2, 3, 8}, 112);
    const Tensor y = gate.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    std::vector<Param*> ps;
    gate.collect(ps);
    for (auto* p : ps)
        if (p->name.find("conv2") != std::string::npos) init_normal(p->value, rng, 0.4);

    ProbeLoss probe(x.shape());
    zero_grads(ps);
    gate.forward(x);
    const Tensor gx = gate.backward(probe.grad());
    const auto loss = [&] { return probe(gate.forward(x)); };
    CHECK(gradcheck::check_params(ps, loss).max_rel_err < 1e-4);
    CHECK(gradcheck::check_input(x, gx, loss).max_rel_err < 1e-4);
}
