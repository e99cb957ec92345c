#include "gae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gae/rng.hpp"

namespace gae {

namespace {

TensorPtr random_tensor(const std::vector<std::int64_t>& shape, Rng& rng, bool requires_grad = true,
                        double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : d) {
        v = scale * rng.normal();
    }
    return Tensor::from_data(shape, std::move(d), requires_grad);
}

// Random projection tensor used to reduce non-scalar op outputs to a loss.
TensorPtr random_projection(const std::vector<std::int64_t>& shape, Rng& rng) {
    std::vector<double> d(static_cast<std::size_t>(numel_of(shape)));
    for (auto& v : d) {
        v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    }
    return Tensor::from_data(shape, std::move(d), false);
}

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

} // namespace

double finite_difference_check(const LossBuilder& build, std::vector<TensorPtr> inputs, double step) {
    // Analytic pass.
    auto loss = build(inputs);
    for (auto& in : inputs) {
        in->ensure_grad();
        in->zero_grad();
    }
    loss->backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& in : inputs) {
        analytic.push_back(in->grad);
    }

    double worst = 0.0;
    NoGradGuard no_grad;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t]->requires_grad) {
            continue;
        }
        auto& buf = inputs[t]->data;
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const double saved = buf[i];
            buf[i] = saved + step;
            const double up = build(inputs)->item();
            buf[i] = saved - step;
            const double down = build(inputs)->item();
            buf[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, rel_err(analytic[t][i], numeric));
        }
    }
    return worst;
}

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gradcheck"));
    std::vector<GradCheckResult> results;

    auto run = [&](const std::string& name, int instances, const std::function<double(Rng&)>& one) {
        GradCheckResult r;
        r.op = name;
        r.instances = instances;
        for (int i = 0; i < instances; ++i) {
            r.max_rel_err = std::max(r.max_rel_err, one(rng));
        }
        results.push_back(r);
    };

    run("add", 5, [](Rng& r) {
        auto a = random_tensor({3, 4}, r);
        auto b = random_tensor({3, 4}, r);
        auto proj = random_projection({3, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(add(in[0], in[1]), proj)); }, {a, b});
    });

    run("sub", 5, [](Rng& r) {
        auto a = random_tensor({2, 5}, r);
        auto b = random_tensor({2, 5}, r);
        auto proj = random_projection({2, 5}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(sub(in[0], in[1]), proj)); }, {a, b});
    });

    run("mul", 5, [](Rng& r) {
        auto a = random_tensor({4, 3}, r);
        auto b = random_tensor({4, 3}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(in[0], in[1])); }, {a, b});
    });

    run("scale", 5, [](Rng& r) {
        auto a = random_tensor({6}, r);
        const double c = r.uniform(-2.0, 2.0);
        return finite_difference_check(
            [&, c](const std::vector<TensorPtr>& in) { return sum_all(scale(in[0], c)); }, {a});
    });

    run("mean_all", 5, [](Rng& r) {
        auto a = random_tensor({3, 7}, r);
        return finite_difference_check([](const std::vector<TensorPtr>& in) { return mean_all(in[0]); }, {a});
    });

    run("relu", 5, [](Rng& r) {
        // Keep samples away from the kink at 0.
        auto a = random_tensor({3, 8}, r);
        for (auto& v : a->data) {
            if (std::abs(v) < 0.1) {
                v = v < 0 ? v - 0.2 : v + 0.2;
            }
        }
        auto proj = random_projection({3, 8}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(relu(in[0]), proj)); }, {a});
    });

    run("reshape", 5, [](Rng& r) {
        auto a = random_tensor({2, 6}, r);
        auto proj = random_projection({3, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(reshape(in[0], {3, 4}), proj)); }, {a});
    });

    run("conv2d_s1p1", 5, [](Rng& r) {
        auto x = random_tensor({2, 4, 8, 8}, r);
        auto w = random_tensor({3, 4, 3, 3}, r, true, 0.5);
        auto b = random_tensor({3}, r);
        auto proj = random_projection({2, 3, 8, 8}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(conv2d(in[0], in[1], in[2], 1, 1), proj)); },
            {x, w, b});
    });

    run("conv2d_s2p1", 5, [](Rng& r) {
        auto x = random_tensor({1, 3, 8, 8}, r);
        auto w = random_tensor({4, 3, 3, 3}, r, true, 0.5);
        auto b = random_tensor({4}, r);
        auto proj = random_projection({1, 4, 4, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(conv2d(in[0], in[1], in[2], 2, 1), proj)); },
            {x, w, b});
    });

    run("conv2d_k1", 5, [](Rng& r) {
        auto x = random_tensor({2, 5, 4, 4}, r);
        auto w = random_tensor({2, 5, 1, 1}, r);
        auto b = random_tensor({2}, r);
        auto proj = random_projection({2, 2, 4, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(conv2d(in[0], in[1], in[2], 1, 0), proj)); },
            {x, w, b});
    });

    run("fully_connected", 5, [](Rng& r) {
        auto x = random_tensor({2, 10}, r);
        auto w = random_tensor({6, 10}, r, true, 0.5);
        auto b = random_tensor({6}, r);
        auto proj = random_projection({2, 6}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) {
                return sum_all(mul(fully_connected(in[0], in[1], in[2]), proj));
            },
            {x, w, b});
    });

    run("upsample_nearest2x", 5, [](Rng& r) {
        auto x = random_tensor({2, 3, 4, 4}, r);
        auto proj = random_projection({2, 3, 8, 8}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(upsample_nearest2x(in[0]), proj)); }, {x});
    });

    run("avg_pool2x2", 5, [](Rng& r) {
        auto x = random_tensor({2, 3, 6, 6}, r);
        auto proj = random_projection({2, 3, 3, 3}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(avg_pool2x2(in[0]), proj)); }, {x});
    });

    run("global_avg_pool", 5, [](Rng& r) {
        auto x = random_tensor({2, 4, 5, 5}, r);
        auto proj = random_projection({2, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(global_avg_pool(in[0]), proj)); }, {x});
    });

    run("concat_channels", 5, [](Rng& r) {
        auto a = random_tensor({2, 3, 4, 4}, r);
        auto b = random_tensor({2, 2, 4, 4}, r);
        auto proj = random_projection({2, 5, 4, 4}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(concat_channels(in[0], in[1]), proj)); },
            {a, b});
    });

    run("slice_channels", 5, [](Rng& r) {
        auto x = random_tensor({2, 5, 3, 3}, r);
        auto proj = random_projection({2, 3, 3, 3}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) { return sum_all(mul(slice_channels(in[0], 1, 4), proj)); }, {x});
    });

    run("elementwise_mul_broadcast", 5, [](Rng& r) {
        auto f = random_tensor({2, 4, 5, 5}, r);
        auto m = random_tensor({2, 1, 5, 5}, r);
        auto proj = random_projection({2, 4, 5, 5}, r);
        return finite_difference_check(
            [&](const std::vector<TensorPtr>& in) {
                return sum_all(mul(elementwise_mul_broadcast(in[0], in[1]), proj));
            },
            {f, m});
    });

    run("write_block", 5, [](Rng& r) {
        auto bank = random_tensor({1, 3, 8, 8}, r);
        auto block = random_tensor({1, 3, 4, 4}, r);
        auto proj = random_projection({1, 3, 8, 8}, r);
        const std::int64_t r0 = static_cast<std::int64_t>(r.uniform_int(5));
        const std::int64_t c0 = static_cast<std::int64_t>(r.uniform_int(5));
        return finite_difference_check(
            [&, r0, c0](const std::vector<TensorPtr>& in) {
                return sum_all(mul(write_block(in[0], in[1], r0, c0), proj));
            },
            {bank, block});
    });

    run("cosine_similarity", 5, [](Rng& r) {
        auto a = random_tensor({64}, r);
        auto b = random_tensor({64}, r);
        return finite_difference_check(
            [](const std::vector<TensorPtr>& in) { return cosine_similarity(in[0], in[1]); }, {a, b});
    });

    run("mse_loss", 5, [](Rng& r) {
        auto p = random_tensor({3, 5}, r);
        auto t = random_tensor({3, 5}, r);
        return finite_difference_check([](const std::vector<TensorPtr>& in) { return mse_loss(in[0], in[1]); },
                                       {p, t});
    });

    run("softmax_cross_entropy", 5, [](Rng& r) {
        auto z = random_tensor({3, 5}, r);
        std::vector<std::int64_t> targets(3);
        for (auto& t : targets) {
            t = static_cast<std::int64_t>(r.uniform_int(5));
        }
        return finite_difference_check(
            [targets](const std::vector<TensorPtr>& in) { return softmax_cross_entropy(in[0], targets); }, {z});
    });

    run("softmax_cross_entropy_spatial", 5, [](Rng& r) {
        auto z = random_tensor({2, 4, 3, 3}, r);
        std::vector<std::int64_t> targets(2 * 9);
        for (auto& t : targets) {
            t = static_cast<std::int64_t>(r.uniform_int(4));
        }
        return finite_difference_check(
            [targets](const std::vector<TensorPtr>& in) { return softmax_cross_entropy_spatial(in[0], targets); },
            {z});
    });

    run("stop_gradient", 5, [](Rng& r) {
        // The gradient through stop_gradient must be exactly zero; report the
        // analytic gradient magnitude itself as the error.
        auto x = random_tensor({4, 4}, r);
        auto y = random_tensor({4, 4}, r);
        auto loss = sum_all(mul(stop_gradient(x), y));
        x->ensure_grad();
        y->ensure_grad();
        loss->backward();
        double worst = 0.0;
        for (const double g : x->grad) {
            worst = std::max(worst, std::abs(g));
        }
        for (std::size_t i = 0; i < y->grad.size(); ++i) {
            worst = std::max(worst, std::abs(y->grad[i] - x->data[i]));
        }
        return worst;
    });

    return results;
}

bool gradcheck_all_pass(const std::vector<GradCheckResult>& results, double tol) {
    return std::all_of(results.begin(), results.end(),
                       [tol](const GradCheckResult& r) { return r.max_rel_err < tol; });
}

} // namespace gae
