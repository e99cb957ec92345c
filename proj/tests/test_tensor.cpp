#include <cmath>
#include <vector>

#include <doctest.h>

#include "gae/error.hpp"
#include "gae/gradcheck.hpp"
#include "gae/rng.hpp"
#include "gae/tensor.hpp"

using namespace gae;

namespace {

TensorPtr randn(const std::vector<std::int64_t>& shape, Rng& rng, bool req = true) {
    std::vector<double> d(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : d) {
        v = rng.normal();
    }
    return Tensor::from_data(shape, std::move(d), req);
}

} // namespace

TEST_CASE("conv2d: all-ones kernel counts valid taps") {
    auto x = Tensor::full({1, 1, 3, 3}, 1.0, true);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0, true);
    auto b = Tensor::zeros({1}, true);
    auto y = conv2d(x, w, b, 1, 1);
    CHECK(y->shape == std::vector<std::int64_t>{1, 1, 3, 3});
    CHECK(y->data[4] == doctest::Approx(9.0));  // center sees all 9 taps
    CHECK(y->data[0] == doctest::Approx(4.0));  // corner sees 4
    CHECK(y->data[1] == doctest::Approx(6.0));  // edge sees 6
}

TEST_CASE("conv2d: 1x1 identity kernel is identity") {
    Rng rng(7);
    auto x = randn({2, 1, 4, 4}, rng);
    auto w = Tensor::full({1, 1, 1, 1}, 1.0, true);
    auto b = Tensor::zeros({1}, true);
    auto y = conv2d(x, w, b, 1, 0);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(y->data[i] == doctest::Approx(x->data[i]));
    }
}

TEST_CASE("conv2d: weight gradient matches finite differences") {
    Rng rng(11);
    auto x = randn({2, 4, 8, 8}, rng);
    auto w = randn({3, 4, 3, 3}, rng);
    auto b = randn({3}, rng);
    const double err = finite_difference_check(
        [](const std::vector<TensorPtr>& in) { return mean_all(conv2d(in[0], in[1], in[2], 1, 1)); }, {x, w, b});
    CHECK(err < 1e-4);
}

TEST_CASE("conv2d: shape mismatch is a configuration error") {
    auto x = Tensor::zeros({1, 2, 4, 4});
    auto w = Tensor::zeros({1, 3, 3, 3});
    auto b = Tensor::zeros({1});
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 1), ConfigError);
}

TEST_CASE("fully_connected: identity weight, zero bias") {
    Rng rng(3);
    auto x = randn({2, 4}, rng);
    std::vector<double> eye(16, 0.0);
    for (int i = 0; i < 4; ++i) {
        eye[static_cast<std::size_t>(i * 4 + i)] = 1.0;
    }
    auto w = Tensor::from_data({4, 4}, eye, true);
    auto b = Tensor::zeros({4}, true);
    auto y = fully_connected(x, w, b);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(y->data[i] == doctest::Approx(x->data[i]));
    }
}

TEST_CASE("fully_connected: zero input yields bias broadcast") {
    Rng rng(5);
    auto x = Tensor::zeros({3, 4});
    auto w = randn({2, 4}, rng);
    auto b = randn({2}, rng);
    auto y = fully_connected(x, w, b);
    for (int n = 0; n < 3; ++n) {
        CHECK(y->data[static_cast<std::size_t>(n * 2)] == doctest::Approx(b->data[0]));
        CHECK(y->data[static_cast<std::size_t>(n * 2 + 1)] == doctest::Approx(b->data[1]));
    }
}

TEST_CASE("fully_connected: gradient check") {
    Rng rng(13);
    auto x = randn({2, 10}, rng);
    auto w = randn({5, 10}, rng);
    auto b = randn({5}, rng);
    const double err = finite_difference_check(
        [](const std::vector<TensorPtr>& in) { return mean_all(fully_connected(in[0], in[1], in[2])); }, {x, w, b});
    CHECK(err < 1e-4);
}

TEST_CASE("relu: definition and dead region") {
    auto x = Tensor::from_data({3}, {-1.0, 0.0, 2.0}, true);
    auto y = relu(x);
    CHECK(y->data == std::vector<double>{0.0, 0.0, 2.0});

    auto neg = Tensor::from_data({4}, {-1.0, -2.0, -0.5, -3.0}, true);
    auto loss = sum_all(relu(neg));
    loss->backward();
    CHECK(loss->item() == 0.0);
    for (const double g : neg->grad) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("relu: gradient is indicator(x>0) times upstream") {
    auto x = Tensor::from_data({4}, {-2.0, 0.5, 3.0, -0.7}, true);
    auto up = Tensor::from_data({4}, {2.0, 3.0, 4.0, 5.0}, false);
    auto loss = sum_all(mul(relu(x), up));
    loss->backward();
    CHECK(x->grad[0] == 0.0);
    CHECK(x->grad[1] == doctest::Approx(3.0));
    CHECK(x->grad[2] == doctest::Approx(4.0));
    CHECK(x->grad[3] == 0.0);
}

TEST_CASE("upsample_nearest2x: replication, inverse pair, gradient count") {
    auto x = Tensor::from_data({1, 1, 1, 1}, {2.5}, true);
    auto y = upsample_nearest2x(x);
    CHECK(y->shape == std::vector<std::int64_t>{1, 1, 2, 2});
    for (const double v : y->data) {
        CHECK(v == doctest::Approx(2.5));
    }

    Rng rng(17);
    auto z = randn({2, 3, 4, 4}, rng, false);
    auto back = avg_pool2x2(upsample_nearest2x(z));
    for (std::size_t i = 0; i < z->data.size(); ++i) {
        CHECK(back->data[i] == doctest::Approx(z->data[i]));
    }

    auto g = randn({1, 2, 3, 3}, rng, true);
    auto loss = sum_all(upsample_nearest2x(g));
    loss->backward();
    for (const double v : g->grad) {
        CHECK(v == doctest::Approx(4.0));
    }
}

TEST_CASE("concat_channels: zero-channel neutrality and slicing") {
    Rng rng(19);
    auto a = randn({2, 3, 4, 4}, rng);
    auto empty = Tensor::zeros({2, 0, 4, 4});
    auto same = concat_channels(a, empty);
    CHECK(same->shape == a->shape);
    for (std::size_t i = 0; i < a->data.size(); ++i) {
        CHECK(same->data[i] == a->data[i]);
    }

    auto b = randn({2, 2, 4, 4}, rng);
    auto cat = concat_channels(a, b);
    CHECK(cat->shape == std::vector<std::int64_t>{2, 5, 4, 4});
    // first Ca channels of each batch equal a exactly
    for (int n = 0; n < 2; ++n) {
        for (int i = 0; i < 3 * 16; ++i) {
            CHECK(cat->data[static_cast<std::size_t>(n * 5 * 16 + i)] ==
                  a->data[static_cast<std::size_t>(n * 3 * 16 + i)]);
        }
    }
}

TEST_CASE("concat_channels: gradient on b's channels never reaches a") {
    Rng rng(23);
    auto a = randn({1, 2, 3, 3}, rng);
    auto b = randn({1, 2, 3, 3}, rng);
    // projection is zero over a's channels, random over b's
    std::vector<double> p(4 * 9, 0.0);
    Rng prng(29);
    for (std::size_t i = 2 * 9; i < 4 * 9; ++i) {
        p[i] = prng.normal();
    }
    auto proj = Tensor::from_data({1, 4, 3, 3}, p, false);
    auto loss = sum_all(mul(concat_channels(a, b), proj));
    loss->backward();
    for (const double g : a->grad) {
        CHECK(g == 0.0);
    }
    bool any = false;
    for (const double g : b->grad) {
        any = any || g != 0.0;
    }
    CHECK(any);
}

TEST_CASE("elementwise_mul_broadcast: identity, annihilator, gradcheck") {
    Rng rng(31);
    auto f = randn({1, 3, 4, 4}, rng);
    auto ones = Tensor::full({1, 1, 4, 4}, 1.0, true);
    auto y = elementwise_mul_broadcast(f, ones);
    for (std::size_t i = 0; i < f->data.size(); ++i) {
        CHECK(y->data[i] == doctest::Approx(f->data[i]));
    }

    auto zeros = Tensor::zeros({1, 1, 4, 4}, true);
    auto z = elementwise_mul_broadcast(f, zeros);
    auto loss = sum_all(z);
    loss->backward();
    CHECK(loss->item() == 0.0);
    for (const double g : f->grad) {
        CHECK(g == 0.0);
    }

    auto f2 = randn({2, 3, 4, 4}, rng);
    auto m2 = randn({2, 1, 4, 4}, rng);
    const double err = finite_difference_check(
        [](const std::vector<TensorPtr>& in) { return mean_all(elementwise_mul_broadcast(in[0], in[1])); },
        {f2, m2});
    CHECK(err < 1e-4);
}

TEST_CASE("stop_gradient: forward identity, zero backward") {
    Rng rng(37);
    auto x = randn({3, 3}, rng);
    auto y = stop_gradient(x);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        CHECK(y->data[i] == x->data[i]);
    }
    CHECK_FALSE(y->requires_grad);

    auto x2 = randn({4}, rng);
    auto y2 = randn({4}, rng);
    auto loss = sum_all(mul(stop_gradient(x2), y2));
    x2->ensure_grad();
    loss->backward();
    for (const double g : x2->grad) {
        CHECK(g == 0.0);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(y2->grad[i] == doctest::Approx(x2->data[i]));
    }
}

TEST_CASE("cosine_similarity: self, orthogonal, degenerate, gradcheck") {
    auto a = Tensor::from_data({3}, {1.0, 2.0, -1.0}, true);
    auto a2 = Tensor::from_data({3}, {1.0, 2.0, -1.0}, true);
    CHECK(cosine_similarity(a, a2)->item() == doctest::Approx(1.0));

    auto e1 = Tensor::from_data({2}, {1.0, 0.0}, true);
    auto e2 = Tensor::from_data({2}, {0.0, 1.0}, true);
    CHECK(cosine_similarity(e1, e2)->item() == doctest::Approx(0.0));

    auto zero = Tensor::zeros({4}, true);
    auto other = Tensor::from_data({4}, {1.0, 1.0, 1.0, 1.0}, true);
    auto deg = cosine_similarity(zero, other);
    CHECK(deg->item() == 0.0);
    CHECK_FALSE(deg->requires_grad);

    Rng rng(41);
    auto u = randn({64}, rng);
    auto v = randn({64}, rng);
    const double err = finite_difference_check(
        [](const std::vector<TensorPtr>& in) { return cosine_similarity(in[0], in[1]); }, {u, v});
    CHECK(err < 1e-4);
}

TEST_CASE("cosine_similarity: output stays in [-1,1] over random pairs") {
    Rng rng(43);
    for (int i = 0; i < 50; ++i) {
        auto u = randn({16}, rng, false);
        auto v = randn({16}, rng, false);
        const double s = cosine_similarity(u, v)->item();
        CHECK(s >= -1.0 - 1e-9);
        CHECK(s <= 1.0 + 1e-9);
    }
}

TEST_CASE("softmax_cross_entropy: uniform logits, dominant logit, gradcheck") {
    auto z = Tensor::zeros({2, 4}, true);
    auto loss = softmax_cross_entropy(z, {0, 3});
    CHECK(loss->item() == doctest::Approx(std::log(4.0)));

    auto dom = Tensor::from_data({1, 3}, {50.0, 0.0, 0.0}, true);
    CHECK(softmax_cross_entropy(dom, {0})->item() == doctest::Approx(0.0).epsilon(1e-12));

    Rng rng(47);
    auto z2 = randn({3, 5}, rng);
    const double err = finite_difference_check(
        [](const std::vector<TensorPtr>& in) { return softmax_cross_entropy(in[0], {1, 4, 0}); }, {z2});
    CHECK(err < 1e-4);

    CHECK_THROWS_AS(softmax_cross_entropy(z, {0, 4}), DataError);
}

TEST_CASE("mse_loss: zero, unit offset, analytic gradient") {
    Rng rng(53);
    auto p = randn({2, 8}, rng);
    auto t = Tensor::from_data(p->shape, p->data, false);
    CHECK(mse_loss(p, t)->item() == doctest::Approx(0.0));

    std::vector<double> shifted = p->data;
    for (auto& v : shifted) {
        v += 1.0;
    }
    auto t2 = Tensor::from_data(p->shape, shifted, false);
    CHECK(mse_loss(p, t2)->item() == doctest::Approx(1.0));

    auto loss = mse_loss(p, t2);
    loss->backward();
    const double n = static_cast<double>(p->numel());
    for (std::size_t i = 0; i < p->data.size(); ++i) {
        CHECK(p->grad[i] == doctest::Approx(2.0 * (p->data[i] - t2->data[i]) / n));
    }
}

TEST_CASE("write_block: overwrite forward, split backward") {
    auto bank = Tensor::full({1, 2, 4, 4}, 1.0, true);
    auto block = Tensor::full({1, 2, 2, 2}, 5.0, true);
    auto out = write_block(bank, block, 1, 2);
    CHECK(out->data[static_cast<std::size_t>(1 * 4 + 2)] == 5.0);
    CHECK(out->data[static_cast<std::size_t>(2 * 4 + 3)] == 5.0);
    CHECK(out->data[0] == 1.0);

    auto loss = sum_all(out);
    loss->backward();
    // block cells route to block, the rest to bank; overwritten bank cells get 0
    double bank_sum = 0.0;
    for (const double g : bank->grad) {
        bank_sum += g;
    }
    CHECK(bank_sum == doctest::Approx(2.0 * (16 - 4)));
    for (const double g : block->grad) {
        CHECK(g == doctest::Approx(1.0));
    }

    CHECK_THROWS_AS(write_block(bank, block, 3, 3), std::logic_error);
}

TEST_CASE("fan-out accumulates gradients additively") {
    auto x = Tensor::from_data({3}, {1.0, -2.0, 3.0}, true);
    // loss = sum(x*x) + sum(3x): grad = 2x + 3
    auto loss = add(sum_all(mul(x, x)), sum_all(scale(x, 3.0)));
    loss->backward();
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(x->grad[i] == doctest::Approx(2.0 * x->data[i] + 3.0));
    }
}

TEST_CASE("gradcheck suite passes at 1e-4") {
    const auto results = run_gradcheck_suite(1234);
    for (const auto& r : results) {
        INFO(r.op, " max rel err ", r.max_rel_err);
        CHECK(r.max_rel_err < 1e-4);
    }
    CHECK(gradcheck_all_pass(results));
}

TEST_CASE("NoGradGuard suppresses graph recording") {
    Rng rng(59);
    auto x = randn({2, 2}, rng);
    NoGradGuard guard;
    auto y = mul(x, x);
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
}
