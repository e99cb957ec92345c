#include <cmath>

#include <doctest.h>

#include "gae/error.hpp"
#include "gae/losses.hpp"

using namespace gae;

namespace {

LevelFeatures features_from(const std::vector<double>& v1, const std::vector<double>& v2,
                            const std::vector<double>& v3, const std::vector<double>& vb, bool grad) {
    LevelFeatures f;
    f.level1 = Tensor::from_data({1, 1, 2, 2}, v1, grad);
    f.level2 = Tensor::from_data({1, 1, 2, 2}, v2, grad);
    f.level3 = Tensor::from_data({1, 1, 2, 2}, v3, grad);
    f.bottleneck = Tensor::from_data({1, 1, 2, 2}, vb, grad);
    return f;
}

} // namespace

TEST_CASE("contrastive_feature_loss: identical features give -4") {
    const std::vector<double> v{0.5, 1.0, -0.25, 2.0};
    auto f_c = features_from(v, v, v, v, true);
    auto f_i = features_from(v, v, v, v, false);
    CHECK(contrastive_feature_loss(f_c, f_i)->item() == doctest::Approx(-4.0));
}

TEST_CASE("contrastive_feature_loss: orthogonal features give 0") {
    const std::vector<double> a{1.0, 0.0, 1.0, 0.0};
    const std::vector<double> b{0.0, 1.0, 0.0, 1.0};
    auto f_c = features_from(a, a, a, a, true);
    auto f_i = features_from(b, b, b, b, false);
    CHECK(contrastive_feature_loss(f_c, f_i)->item() == doctest::Approx(0.0));
}

TEST_CASE("contrastive_feature_loss: bottleneck-only pair contributes one term") {
    LevelFeatures f_c, f_i;
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    f_c.bottleneck = Tensor::from_data({1, 1, 2, 2}, v, true);
    f_i.bottleneck = Tensor::from_data({1, 1, 2, 2}, v, false);
    CHECK(contrastive_feature_loss(f_c, f_i)->item() == doctest::Approx(-1.0));
}

TEST_CASE("contrastive_feature_loss: no gradient reaches the teacher side") {
    const std::vector<double> a{0.3, -0.4, 0.9, 0.1};
    const std::vector<double> b{0.7, 0.2, -0.5, 0.6};
    auto f_c = features_from(a, a, a, a, true);
    auto f_i = features_from(b, b, b, b, false);  // teacher is gradient-blocked
    auto loss = contrastive_feature_loss(f_c, f_i);
    loss->backward();
    CHECK(f_i.level1->grad.empty());
    double student_grad = 0.0;
    for (const double g : f_c.level1->grad) {
        student_grad += std::abs(g);
    }
    CHECK(student_grad > 0.0);
}

TEST_CASE("task_loss: perfect reconstruction is zero") {
    Scene scene;
    scene.height = 4;
    scene.width = 4;
    scene.image.assign(48, 0.25);
    auto output = Tensor::from_data({1, 3, 4, 4}, scene.image, true);
    CHECK(task_loss(output, scene, Task::Reconstruction)->item() == doctest::Approx(0.0));
}

TEST_CASE("task_loss: uniform segmentation logits over K=4 classes give ln 4") {
    Scene scene;
    scene.height = 2;
    scene.width = 2;
    scene.seg_labels = {0, 1, 2, 3};
    auto logits = Tensor::zeros({1, 4, 2, 2}, true);
    CHECK(task_loss(logits, scene, Task::Segmentation)->item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("task_loss: dominant-logit classification tends to zero loss") {
    Scene scene;
    scene.class_label = 2;
    auto logits = Tensor::from_data({1, 4}, {0.0, 0.0, 60.0, 0.0}, true);
    CHECK(task_loss(logits, scene, Task::Classification)->item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("task_loss: out-of-range label is a data error") {
    Scene scene;
    scene.class_label = 9;
    auto logits = Tensor::zeros({1, 4}, true);
    CHECK_THROWS_AS(task_loss(logits, scene, Task::Classification), DataError);
}

TEST_CASE("aggregate_overall: Eq. 2 at T=1 and degenerate cases") {
    auto l_fc = Tensor::scalar(-3.5, false);
    std::vector<TensorPtr> l_c{Tensor::scalar(0.25, false)};
    std::vector<TensorPtr> l_s{Tensor::scalar(0.5, false)};
    std::vector<TensorPtr> l_o{Tensor::scalar(1.0, false)};
    CHECK(aggregate_overall(l_fc, l_c, l_s, l_o, StepAgg::Mean)->item() == doctest::Approx(-3.5 + 0.25 + 0.5 + 1.0));

    // all-zero per-step losses leave only L_Fc
    std::vector<TensorPtr> zeros{Tensor::scalar(0.0, false), Tensor::scalar(0.0, false)};
    CHECK(aggregate_overall(l_fc, zeros, zeros, zeros, StepAgg::Mean)->item() == doctest::Approx(-3.5));
}

TEST_CASE("aggregate_overall: doubling per-step losses doubles the step part") {
    auto l_fc = Tensor::scalar(-2.0, false);
    auto mk = [](std::initializer_list<double> vals) {
        std::vector<TensorPtr> out;
        for (const double v : vals) {
            out.push_back(Tensor::scalar(v, false));
        }
        return out;
    };
    const double base = aggregate_overall(l_fc, mk({0.2, 0.4}), mk({0.1, 0.3}), mk({0.5, 0.7}), StepAgg::Mean)->item();
    const double doubled =
        aggregate_overall(l_fc, mk({0.4, 0.8}), mk({0.2, 0.6}), mk({1.0, 1.4}), StepAgg::Mean)->item();
    CHECK(doubled - (-2.0) == doctest::Approx(2.0 * (base - (-2.0))));
}

TEST_CASE("aggregate_overall: sum mode scales with T, mean mode does not") {
    std::vector<TensorPtr> l_o{Tensor::scalar(1.0, false), Tensor::scalar(1.0, false)};
    CHECK(aggregate_overall(nullptr, {}, {}, l_o, StepAgg::Mean)->item() == doctest::Approx(1.0));
    CHECK(aggregate_overall(nullptr, {}, {}, l_o, StepAgg::Sum)->item() == doctest::Approx(2.0));
}

TEST_CASE("loss_csv_line carries the breakdown fields") {
    LossBreakdown b;
    b.l_fc = -1.5;
    b.l_c = {0.5, 0.7};
    b.l_s = {0.1};
    b.l_o = {0.2, 0.4};
    b.l_overall = -0.3;
    const auto line = loss_csv_line(2, 17, b);
    CHECK(line.find("2,17,") == 0);
    CHECK(line.find("-1.5") != std::string::npos);
    CHECK(loss_csv_header() == "epoch,episode,l_fc,mean_l_c,mean_l_s,mean_l_o,l_overall");
}
