#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/rng.hpp"

namespace dcnet {

// Dense rank-4 shape in [batch, height, width, channel] order. The same
// struct doubles as a generic 4-dim extent for kernels (kh, kw, c_in, c_out).
struct Shape4 {
    int64_t b = 0, h = 0, w = 0, c = 0;

    int64_t count() const { return b * h * w * c; }
    bool operator==(const Shape4&) const = default;

    std::string str() const {
        return "(" + std::to_string(b) + "," + std::to_string(h) + "," +
               std::to_string(w) + "," + std::to_string(c) + ")";
    }
};

inline void validate_shape(const Shape4& s) {
    if (s.b < 1 || s.h < 1 || s.w < 1 || s.c < 1)
        throw ShapeError("invalid shape " + s.str() + ": all dims must be >= 1");
    // Overflow check without __int128: divide back out.
    int64_t n = s.b;
    for (int64_t d : {s.h, s.w, s.c}) {
        if (n > (int64_t{1} << 46) / d)
            throw ShapeError("shape " + s.str() + " exceeds addressable size");
        n *= d;
    }
}

// Contiguous row-major (b,h,w,c) tensor. Offset of (i,j,k,l) is
// ((i*H + j)*W + k)*C + l.
template <typename T>
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 s) : shape_(s) {
        validate_shape(s);
        data_.assign(static_cast<size_t>(s.count()), T(0));
    }
    Tensor4(Shape4 s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
        validate_shape(s);
        if (static_cast<int64_t>(data_.size()) != s.count())
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + s.str());
    }

    const Shape4& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    int64_t offset(int64_t i, int64_t j, int64_t k, int64_t l) const {
        assert(i >= 0 && i < shape_.b && j >= 0 && j < shape_.h &&
               k >= 0 && k < shape_.w && l >= 0 && l < shape_.c);
        return ((i * shape_.h + j) * shape_.w + k) * shape_.c + l;
    }
    T& at(int64_t i, int64_t j, int64_t k, int64_t l) { return data_[offset(i, j, k, l)]; }
    const T& at(int64_t i, int64_t j, int64_t k, int64_t l) const {
        return data_[offset(i, j, k, l)];
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape_);
        for (int64_t i = 0; i < size(); ++i)
            out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    Shape4 shape_;
    std::vector<T> data_;
};

template <typename T>
Tensor4<T> zeros(Shape4 shape) {
    return Tensor4<T>(shape);
}

// He-normal init: i.i.d. N(0, 2/fan_in). Samples are drawn in double and
// cast, so a float and a double tensor from the same seed correspond.
template <typename T>
Tensor4<T> he_normal(Shape4 shape, int64_t fan_in, Rng& rng) {
    if (fan_in < 1) throw ParamError("he_normal: fan_in must be >= 1");
    Tensor4<T> out(shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < out.size(); ++i)
        out.data()[i] = static_cast<T>(rng.normal() * stddev);
    return out;
}

// alpha*x + y, elementwise.
template <typename T>
Tensor4<T> axpy(T alpha, const Tensor4<T>& x, const Tensor4<T>& y) {
    if (!(x.shape() == y.shape()))
        throw ShapeError("axpy: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
    Tensor4<T> out(x.shape());
    const T* xp = x.data();
    const T* yp = y.data();
    T* op = out.data();
    for (int64_t i = 0; i < x.size(); ++i) op[i] = alpha * xp[i] + yp[i];
    return out;
}

template <typename T>
double sum(const Tensor4<T>& x) {
    double acc = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
    return acc;
}

}  // namespace dcnet
