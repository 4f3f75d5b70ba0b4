#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

// Loss scalar plus the gradient used for backprop. For cross_entropy the
// gradient is taken jointly with softmax, i.e. with respect to the logits.
template <typename T>
struct LossValue {
    double value = 0.0;
    Tensor4<T> grad;
};

namespace detail {

template <typename T>
void check_one_hot(const Tensor4<T>& targets) {
    const Shape4 s = targets.shape();
    for (int64_t b = 0; b < s.b; ++b) {
        int hot = 0;
        for (int64_t j = 0; j < s.c; ++j) {
            const T v = targets.at(b, 0, 0, j);
            if (v == T(1))
                ++hot;
            else if (v != T(0))
                throw InputError("targets must be one-hot, found entry " +
                                 std::to_string(double(v)));
        }
        if (hot != 1)
            throw InputError("targets must be one-hot, row " + std::to_string(b) +
                             " has " + std::to_string(hot) + " ones");
    }
}

}  // namespace detail

// Per-unit binary cross-entropy over softmax outputs,
//   L = -(1/(N*M)) * sum_{n,m} [ p log p^ + (1-p) log(1-p^) ],
// with p^ clamped to [eps, 1-eps]. The returned gradient is with respect to
// the LOGITS feeding the softmax: with t_m = q_m - p_m(1-q_m)/(1-p_m),
//   dL/dz_j = -(1/(N*M)) * (t_j - p_j * sum_m t_m),
// which is the exact derivative of the loss above through softmax (checked
// against central finite differences).
template <typename T>
LossValue<T> cross_entropy(const Tensor4<T>& probs, const Tensor4<T>& targets) {
    const Shape4 s = probs.shape();
    if (!(targets.shape() == s))
        throw ShapeError("cross_entropy: probs " + s.str() + " vs targets " +
                         targets.shape().str());
    if (s.h != 1 || s.w != 1)
        throw ShapeError("cross_entropy expects (b,1,1,M) tensors, got " + s.str());
    detail::check_one_hot(targets);

    const int64_t N = s.b, M = s.c;
    const double eps = 1e-12;
    const double scale = 1.0 / (double(N) * double(M));
    LossValue<T> out{0.0, Tensor4<T>(s)};

    for (int64_t b = 0; b < N; ++b) {
        const T* p_row = probs.data() + b * M;
        const T* q_row = targets.data() + b * M;
        T* g_row = out.grad.data() + b * M;

        double row_sum = 0.0;
        for (int64_t j = 0; j < M; ++j) row_sum += double(p_row[j]);
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw InputError("cross_entropy: probs row " + std::to_string(b) +
                             " sums to " + std::to_string(row_sum) + ", expected 1");

        double t_sum = 0.0;
        std::vector<double> t(static_cast<size_t>(M));
        for (int64_t j = 0; j < M; ++j) {
            const double q = double(q_row[j]);
            const double p = std::min(std::max(double(p_row[j]), eps), 1.0 - eps);
            out.value -= scale * (q * std::log(p) + (1.0 - q) * std::log1p(-p));
            t[static_cast<size_t>(j)] = q - p * (1.0 - q) / (1.0 - p);
            t_sum += t[static_cast<size_t>(j)];
        }
        for (int64_t j = 0; j < M; ++j) {
            const double p = std::min(std::max(double(p_row[j]), eps), 1.0 - eps);
            g_row[j] = T(-scale * (t[static_cast<size_t>(j)] - p * t_sum));
        }
    }
    return out;
}

// Mean squared error, L = (1/N) * sum (y - y^)^2, gradient 2(y^ - y)/N.
template <typename T>
LossValue<T> mse_loss(const Tensor4<T>& pred, const std::vector<T>& targets) {
    const Shape4 s = pred.shape();
    if (s.h != 1 || s.w != 1 || s.c != 1)
        throw ShapeError("mse_loss expects (b,1,1,1) predictions, got " + s.str());
    if (static_cast<int64_t>(targets.size()) != s.b)
        throw ShapeError("mse_loss: " + std::to_string(targets.size()) +
                         " targets for batch " + std::to_string(s.b));
    const int64_t N = s.b;
    LossValue<T> out{0.0, Tensor4<T>(s)};
    for (int64_t n = 0; n < N; ++n) {
        const double r = double(pred.data()[n]) - double(targets[static_cast<size_t>(n)]);
        out.value += r * r / double(N);
        out.grad.data()[n] = T(2.0 * r / double(N));
    }
    return out;
}

// Fraction of samples whose argmax prediction hits the label; argmax ties
// break toward the lowest index.
template <typename T>
double top1_accuracy(const Tensor4<T>& probs, const std::vector<int>& labels) {
    const Shape4 s = probs.shape();
    if (s.h != 1 || s.w != 1)
        throw ShapeError("top1_accuracy expects (b,1,1,M) probs, got " + s.str());
    if (static_cast<int64_t>(labels.size()) != s.b)
        throw ShapeError("top1_accuracy: label count mismatch");
    int64_t hits = 0;
    for (int64_t b = 0; b < s.b; ++b) {
        const int label = labels[static_cast<size_t>(b)];
        if (label < 0 || label >= s.c)
            throw InputError("label " + std::to_string(label) + " out of range [0, " +
                             std::to_string(s.c) + ")");
        const T* row = probs.data() + b * s.c;
        int64_t best = 0;
        for (int64_t j = 1; j < s.c; ++j)
            if (row[j] > row[best]) best = j;
        if (best == label) ++hits;
    }
    return double(hits) / double(s.b);
}

template <typename T>
double rmse(const std::vector<T>& pred, const std::vector<T>& targets) {
    if (pred.size() != targets.size())
        throw ShapeError("rmse: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
    if (pred.empty()) throw ShapeError("rmse: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double r = double(pred[i]) - double(targets[i]);
        acc += r * r;
    }
    return std::sqrt(acc / double(pred.size()));
}

}  // namespace dcnet
