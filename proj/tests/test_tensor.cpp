#include <cmath>
#include <cstdint>
#include <vector>

#include "dcnet/tensor.hpp"
#include "doctest.h"

using namespace dcnet;

TEST_CASE("offset walks the buffer in canonical row-major order") {
    // Enumerating (b,h,w,c) with c fastest must visit offsets 0,1,2,...
    Tensor4<float> t(Shape4{2, 3, 4, 5});
    int64_t expect = 0;
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 3; ++j)
            for (int64_t k = 0; k < 4; ++k)
                for (int64_t l = 0; l < 5; ++l) CHECK(t.offset(i, j, k, l) == expect++);
    CHECK(expect == t.size());
}

TEST_CASE("at round-trips distinct values per coordinate") {
    Tensor4<double> t(Shape4{2, 3, 4, 5});
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 3; ++j)
            for (int64_t k = 0; k < 4; ++k)
                for (int64_t l = 0; l < 5; ++l)
                    t.at(i, j, k, l) = double(1000 * i + 100 * j + 10 * k + l);
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 3; ++j)
            for (int64_t k = 0; k < 4; ++k)
                for (int64_t l = 0; l < 5; ++l)
                    CHECK(t.at(i, j, k, l) == double(1000 * i + 100 * j + 10 * k + l));
}

TEST_CASE("shape validation rejects non-positive dims and overflow") {
    CHECK_THROWS_AS(validate_shape(Shape4{0, 1, 1, 1}), ShapeError);
    CHECK_THROWS_AS(validate_shape(Shape4{1, -2, 1, 1}), ShapeError);
    CHECK_THROWS_AS(validate_shape(Shape4{1 << 20, 1 << 20, 1 << 20, 2}), ShapeError);
    CHECK_NOTHROW(validate_shape(Shape4{1, 1, 1, 1}));
}

TEST_CASE("construction from mismatched buffer throws") {
    std::vector<float> three(3, 1.0f);
    CHECK_THROWS_AS(Tensor4<float>(Shape4{2, 2, 1, 1}, three), ShapeError);
}

TEST_CASE("zeros and sum") {
    auto t = zeros<float>(Shape4{3, 2, 2, 2});
    CHECK(sum(t) == 0.0);
    t.at(2, 1, 1, 1) = 2.5f;
    t.at(0, 0, 0, 0) = -1.0f;
    CHECK(sum(t) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("axpy matches elementwise arithmetic and checks shapes") {
    Tensor4<double> x(Shape4{1, 2, 2, 1}, {1, 2, 3, 4});
    Tensor4<double> y(Shape4{1, 2, 2, 1}, {10, 20, 30, 40});
    auto out = axpy(2.0, x, y);
    CHECK(out.data()[0] == 12.0);
    CHECK(out.data()[1] == 24.0);
    CHECK(out.data()[2] == 36.0);
    CHECK(out.data()[3] == 48.0);

    Tensor4<double> bad(Shape4{1, 1, 4, 1});
    CHECK_THROWS_AS(axpy(1.0, x, bad), ShapeError);
}

TEST_CASE("all_finite flags inf and nan") {
    Tensor4<float> t(Shape4{1, 1, 1, 3});
    CHECK(t.all_finite());
    t.data()[1] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
    t.data()[1] = 0.0f;
    t.data()[2] = std::nanf("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("cast keeps values across precisions") {
    Tensor4<double> d(Shape4{1, 1, 1, 4}, {0.5, -1.25, 3.0, 0.0});
    auto f = d.cast<float>();
    for (int64_t i = 0; i < 4; ++i) CHECK(f.data()[i] == doctest::Approx(d.data()[i]));
    auto back = f.cast<double>();
    CHECK(back.data()[1] == -1.25);
}

TEST_CASE("he_normal is seed-deterministic and float/double draws correspond") {
    Rng r1(42), r2(42);
    auto a = he_normal<double>(Shape4{1, 4, 4, 8}, 16, r1);
    auto b = he_normal<double>(Shape4{1, 4, 4, 8}, 16, r2);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);

    Rng r3(42);
    auto f = he_normal<float>(Shape4{1, 4, 4, 8}, 16, r3);
    for (int64_t i = 0; i < a.size(); ++i)
        CHECK(f.data()[i] == static_cast<float>(a.data()[i]));
}

TEST_CASE("he_normal moments match N(0, 2/fan_in)") {
    const int64_t fan_in = 50;
    Rng rng(7);
    auto t = he_normal<double>(Shape4{10, 25, 25, 16}, fan_in, rng);  // 1e5 draws
    const int64_t n = t.size();
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += t.data()[i];
    mean /= double(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = t.data()[i] - mean;
        var += d * d;
    }
    var /= double(n - 1);
    const double want = 2.0 / double(fan_in);
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(want).epsilon(0.10));
}

TEST_CASE("he_normal rejects bad fan_in") {
    Rng rng(1);
    CHECK_THROWS_AS(he_normal<float>(Shape4{1, 1, 1, 1}, 0, rng), ParamError);
}

TEST_CASE("rng uniform stays in range and bounded is unbiased enough") {
    Rng rng(123);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 50000; ++i) ++counts[rng.bounded(5)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("splitmix64 reference values") {
    // First three outputs for the state sequence starting at 0, as published.
    CHECK(splitmix64(0) == 0xE220A8397B1DCDAFull);
    CHECK(splitmix64(0x9E3779B97F4A7C15ull) == 0x6E789E6AA1B965F4ull);
    CHECK(splitmix64(0x3C6EF372FE94F82Aull) == 0x06C45D188009454Full);
}
