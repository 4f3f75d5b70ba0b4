#include <cmath>
#include <cstdint>
#include <vector>

#include "dcnet/layers.hpp"
#include "dcnet/losses.hpp"
#include "dcnet/rng.hpp"
#include "doctest.h"

using namespace dcnet;

namespace {

Tensor4<double> one_hot(int64_t b, int64_t M, const std::vector<int>& labels) {
    Tensor4<double> t(Shape4{b, 1, 1, M});
    for (int64_t i = 0; i < b; ++i) t.at(i, 0, 0, labels[size_t(i)]) = 1.0;
    return t;
}

double rel_err(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

// Direct scalar-sum evaluation of the loss formula, independent of the
// production accumulation.
double ce_oracle(const Tensor4<double>& probs, const Tensor4<double>& q) {
    const int64_t N = probs.shape().b, M = probs.shape().c;
    double acc = 0.0;
    for (int64_t n = 0; n < N; ++n)
        for (int64_t m = 0; m < M; ++m) {
            const double p = std::min(std::max(probs.at(n, 0, 0, m), 1e-12), 1.0 - 1e-12);
            acc += q.at(n, 0, 0, m) * std::log(p) +
                   (1.0 - q.at(n, 0, 0, m)) * std::log(1.0 - p);
        }
    return -acc / double(N * M);
}

}  // namespace

TEST_CASE("cross entropy of the uniform 2-class prediction is log 2") {
    // M=2, target [1,0], probs [0.5,0.5]:
    // L = -(1/2)[log .5 + log .5] = log 2, confirmed by the scalar-sum oracle.
    Tensor4<double> probs(Shape4{1, 1, 1, 2}, {0.5, 0.5});
    auto q = one_hot(1, 2, {0});
    CHECK(ce_oracle(probs, q) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    auto loss = cross_entropy(probs, q);
    CHECK(loss.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy vanishes at a perfect prediction and is nonnegative") {
    Tensor4<double> perfect(Shape4{2, 1, 1, 3}, {1, 0, 0, 0, 0, 1});
    auto q = one_hot(2, 3, {0, 2});
    auto loss = cross_entropy(perfect, q);
    CHECK(loss.value >= 0.0);
    CHECK(loss.value < 1e-10);

    Rng rng(41);
    for (int iter = 0; iter < 20; ++iter) {
        Tensor4<double> logits(Shape4{4, 1, 1, 5});
        for (int64_t i = 0; i < logits.size(); ++i)
            logits.data()[i] = rng.uniform(-4.0, 4.0);
        auto probs = softmax(logits);
        auto target = one_hot(4, 5, {int(rng.bounded(5)), int(rng.bounded(5)),
                                     int(rng.bounded(5)), int(rng.bounded(5))});
        CHECK(cross_entropy(probs, target).value >= 0.0);
    }
}

TEST_CASE("cross entropy value matches the scalar-sum oracle on random batches") {
    Rng rng(42);
    for (int iter = 0; iter < 10; ++iter) {
        const int64_t b = 1 + int64_t(rng.bounded(8));
        const int64_t M = 2 + int64_t(rng.bounded(9));
        Tensor4<double> logits(Shape4{b, 1, 1, M});
        for (int64_t i = 0; i < logits.size(); ++i)
            logits.data()[i] = rng.uniform(-3.0, 3.0);
        auto probs = softmax(logits);
        std::vector<int> labels;
        for (int64_t i = 0; i < b; ++i) labels.push_back(int(rng.bounded(uint64_t(M))));
        auto q = one_hot(b, M, labels);
        CHECK(cross_entropy(probs, q).value ==
              doctest::Approx(ce_oracle(probs, q)).epsilon(1e-12));
    }
}

TEST_CASE("fused softmax-CE gradient matches finite differences") {
    Rng rng(43);
    const double h = 1e-5;
    double worst = 0.0;
    for (int iter = 0; iter < 12; ++iter) {
        const int64_t b = 1 + int64_t(rng.bounded(8));
        const int64_t M = 2 + int64_t(rng.bounded(9));
        Tensor4<double> logits(Shape4{b, 1, 1, M});
        for (int64_t i = 0; i < logits.size(); ++i)
            logits.data()[i] = rng.uniform(-3.0, 3.0);
        std::vector<int> labels;
        for (int64_t i = 0; i < b; ++i) labels.push_back(int(rng.bounded(uint64_t(M))));
        auto q = one_hot(b, M, labels);

        auto analytic = cross_entropy(softmax(logits), q).grad;
        for (int64_t i = 0; i < logits.size(); ++i) {
            const double keep = logits.data()[i];
            logits.data()[i] = keep + h;
            const double up = cross_entropy(softmax(logits), q).value;
            logits.data()[i] = keep - h;
            const double dn = cross_entropy(softmax(logits), q).value;
            logits.data()[i] = keep;
            worst = std::max(worst, rel_err(analytic.data()[i], (up - dn) / (2 * h)));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("cross entropy input validation") {
    Tensor4<double> probs(Shape4{1, 1, 1, 2}, {0.5, 0.5});
    Tensor4<double> not_hot(Shape4{1, 1, 1, 2}, {0.5, 0.5});
    CHECK_THROWS_AS(cross_entropy(probs, not_hot), InputError);
    Tensor4<double> two_hot(Shape4{1, 1, 1, 2}, {1.0, 1.0});
    CHECK_THROWS_AS(cross_entropy(probs, two_hot), InputError);

    Tensor4<double> bad_probs(Shape4{1, 1, 1, 2}, {0.9, 0.3});
    Tensor4<double> q(Shape4{1, 1, 1, 2}, {1.0, 0.0});
    CHECK_THROWS_AS(cross_entropy(bad_probs, q), InputError);

    Tensor4<double> wrong_shape(Shape4{2, 1, 1, 2});
    CHECK_THROWS_AS(cross_entropy(probs, wrong_shape), ShapeError);
}

TEST_CASE("mse loss frozen examples") {
    Tensor4<double> same(Shape4{3, 1, 1, 1}, {1.0, -2.0, 0.5});
    auto zero = mse_loss(same, {1.0, -2.0, 0.5});
    CHECK(zero.value == 0.0);
    CHECK(sum(zero.grad) == 0.0);

    Tensor4<double> pred(Shape4{1, 1, 1, 1}, {0.0});
    auto l = mse_loss(pred, {1.0});
    CHECK(l.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(l.grad.data()[0] == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("mse residual scaling is quadratic") {
    Tensor4<double> p1(Shape4{2, 1, 1, 1}, {1.0, 2.0});
    Tensor4<double> p3(Shape4{2, 1, 1, 1}, {3.0, 6.0});
    const std::vector<double> t = {0.0, 0.0};
    CHECK(mse_loss(p3, t).value == doctest::Approx(9.0 * mse_loss(p1, t).value));
}

TEST_CASE("mse gradient matches finite differences") {
    Rng rng(44);
    const double h = 1e-6;
    Tensor4<double> pred(Shape4{5, 1, 1, 1});
    std::vector<double> targets;
    for (int64_t i = 0; i < 5; ++i) {
        pred.data()[i] = rng.uniform(-2.0, 2.0);
        targets.push_back(rng.uniform(-2.0, 2.0));
    }
    auto analytic = mse_loss(pred, targets).grad;
    for (int64_t i = 0; i < 5; ++i) {
        const double keep = pred.data()[i];
        pred.data()[i] = keep + h;
        const double up = mse_loss(pred, targets).value;
        pred.data()[i] = keep - h;
        const double dn = mse_loss(pred, targets).value;
        pred.data()[i] = keep;
        CHECK(rel_err(analytic.data()[i], (up - dn) / (2 * h)) < 1e-8);
    }
}

TEST_CASE("mse rejects mismatched lengths and shapes") {
    Tensor4<double> pred(Shape4{2, 1, 1, 1});
    CHECK_THROWS_AS(mse_loss(pred, std::vector<double>{1.0}), ShapeError);
    Tensor4<double> wide(Shape4{2, 1, 1, 3});
    CHECK_THROWS_AS(mse_loss(wide, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("top1 accuracy counting, ties, and validation") {
    Tensor4<double> probs(Shape4{4, 1, 1, 3},
                          {0.7, 0.2, 0.1,   //
                           0.1, 0.8, 0.1,   //
                           0.3, 0.3, 0.4,   //
                           0.5, 0.4, 0.1});
    CHECK(top1_accuracy(probs, {0, 1, 2, 0}) == 1.0);
    CHECK(top1_accuracy(probs, {1, 0, 0, 1}) == 0.0);
    CHECK(top1_accuracy(probs, {0, 1, 2, 1}) == 0.75);

    // Exact tie in row 0 goes to the lowest index.
    Tensor4<double> tie(Shape4{1, 1, 1, 3}, {0.4, 0.4, 0.2});
    CHECK(top1_accuracy(tie, {0}) == 1.0);
    CHECK(top1_accuracy(tie, {1}) == 0.0);

    CHECK_THROWS_AS(top1_accuracy(probs, {0, 1, 2, 3}), InputError);
    CHECK_THROWS_AS(top1_accuracy(probs, {0, 1, -1, 0}), InputError);
}

TEST_CASE("top1 accuracy is invariant under monotone transforms") {
    Rng rng(45);
    Tensor4<double> probs(Shape4{6, 1, 1, 4});
    for (int64_t i = 0; i < probs.size(); ++i) probs.data()[i] = rng.uniform(0.0, 1.0);
    std::vector<int> labels = {0, 1, 2, 3, 0, 1};
    const double base = top1_accuracy(probs, labels);
    Tensor4<double> warped(probs.shape());
    for (int64_t i = 0; i < probs.size(); ++i)
        warped.data()[i] = std::exp(3.0 * probs.data()[i]) - 0.5;
    CHECK(top1_accuracy(warped, labels) == base);
}

TEST_CASE("rmse examples and consistency with mse") {
    CHECK(rmse<double>({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse<double>({1, 1}, {0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(rmse<double>({1.0}, {1.0, 2.0}), ShapeError);

    Rng rng(46);
    Tensor4<double> pred(Shape4{7, 1, 1, 1});
    std::vector<double> p, t;
    for (int64_t i = 0; i < 7; ++i) {
        pred.data()[i] = rng.uniform(-1.0, 1.0);
        p.push_back(pred.data()[i]);
        t.push_back(rng.uniform(-1.0, 1.0));
    }
    const double r = rmse(p, t);
    CHECK(r * r == doctest::Approx(mse_loss(pred, t).value).epsilon(1e-12));
}
