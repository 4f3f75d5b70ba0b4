#include "dcnet/trainer.hpp"

#include <cstdio>
#include <functional>

#include "dcnet/layers.hpp"
#include "dcnet/rng.hpp"

namespace dcnet {

void write_metrics_csv(std::ostream& os, const Metrics& metrics, bool with_timing) {
    os << "epoch,lr,train_loss,metric_name,metric_value,seconds\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (const auto& r : metrics.records) {
        os << r.epoch << ',' << num(r.lr) << ',' << num(r.train_loss) << ','
           << r.metric_name << ',';
        if (!r.metric_name.empty()) os << num(r.metric_value);
        os << ',';
        if (with_timing) {
            std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
            os << buf;
        }
        os << '\n';
    }
}

namespace {

constexpr double kFdStep = 1e-5;

double rel_err(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

// Central differences over every element of `param`, comparing against
// `analytic`; `loss` re-evaluates the scalar objective at the current state.
double fd_sweep(Tensor4<double>& param, const Tensor4<double>& analytic,
                const std::function<double()>& loss) {
    double worst = 0.0;
    for (int64_t i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + kFdStep;
        const double up = loss();
        param.data()[i] = keep - kFdStep;
        const double dn = loss();
        param.data()[i] = keep;
        worst = std::max(worst, rel_err(analytic.data()[i], (up - dn) / (2.0 * kFdStep)));
    }
    return worst;
}

Tensor4<double> random_tensor(Shape4 s, Rng& rng, double lo, double hi) {
    Tensor4<double> t(s);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Keeps values away from zero so ReLU kinks sit outside the FD step.
Tensor4<double> random_margin_tensor(Shape4 s, Rng& rng, double margin) {
    Tensor4<double> t(s);
    for (int64_t i = 0; i < t.size(); ++i) {
        double v = rng.uniform(-1.0, 1.0);
        t.data()[i] = v >= 0 ? v + margin : v - margin;
    }
    return t;
}

double projection(const Tensor4<double>& out, const Tensor4<double>& r) {
    double s = 0.0;
    for (int64_t i = 0; i < out.size(); ++i) s += out.data()[i] * r.data()[i];
    return s;
}

using Sink = std::function<void(const std::string&, double)>;

void check_conv2d(const Sink& add) {
    struct Case {
        int64_t k, s;
        Pad pad;
    };
    const Case cases[] = {{3, 1, same_pad_bottom_right(3)}, {2, 2, Pad{1, 1, 0, 0}}};
    Rng rng(101);
    for (size_t ci = 0; ci < 2; ++ci) {
        const std::string tag = "case" + std::to_string(ci + 1) + ".";
        ConvKernel<double> kern{random_tensor(Shape4{cases[ci].k, cases[ci].k, 3, 2}, rng,
                                              -1.0, 1.0),
                                random_tensor(Shape4{1, 1, 1, 2}, rng, -0.5, 0.5),
                                cases[ci].s};
        auto x = random_tensor(Shape4{2, 5, 5, 3}, rng, -1.0, 1.0);
        auto out = conv2d_forward(x, kern, cases[ci].pad);
        auto r = random_tensor(out.shape(), rng, -1.0, 1.0);
        auto grads = conv2d_backward(x, kern, cases[ci].pad, r);
        auto loss_x = [&]() { return projection(conv2d_forward(x, kern, cases[ci].pad), r); };
        add("conv2d." + tag + "dx", fd_sweep(x, grads.dx, loss_x));
        add("conv2d." + tag + "dweights", fd_sweep(kern.weights, grads.dweights, loss_x));
        add("conv2d." + tag + "dbias", fd_sweep(kern.bias, grads.dbias, loss_x));
    }
}

void check_deconv2d(const Sink& add) {
    struct Case {
        int64_t k, s;
    };
    const Case cases[] = {{3, 2}, {2, 1}};
    Rng rng(202);
    for (size_t ci = 0; ci < 2; ++ci) {
        const std::string tag = "case" + std::to_string(ci + 1) + ".";
        ConvKernel<double> kern{random_tensor(Shape4{cases[ci].k, cases[ci].k, 2, 3}, rng,
                                              -1.0, 1.0),
                                random_tensor(Shape4{1, 1, 1, 3}, rng, -0.5, 0.5),
                                cases[ci].s};
        auto x = random_tensor(Shape4{2, 3, 3, 2}, rng, -1.0, 1.0);
        auto out = deconv2d_forward(x, kern);
        auto r = random_tensor(out.shape(), rng, -1.0, 1.0);
        auto grads = deconv2d_backward(x, kern, r);
        auto loss_x = [&]() { return projection(deconv2d_forward(x, kern), r); };
        add("deconv2d." + tag + "dx", fd_sweep(x, grads.dx, loss_x));
        add("deconv2d." + tag + "dweights", fd_sweep(kern.weights, grads.dweights, loss_x));
        add("deconv2d." + tag + "dbias", fd_sweep(kern.bias, grads.dbias, loss_x));
    }
}

void check_relu(const Sink& add) {
    Rng rng(303);
    auto x = random_margin_tensor(Shape4{2, 4, 4, 3}, rng, 0.05);
    auto y = relu(x);
    auto r = random_tensor(y.shape(), rng, -1.0, 1.0);
    auto dx = relu_backward(y, r);
    add("relu.dx", fd_sweep(x, dx, [&]() { return projection(relu(x), r); }));
}

void check_maxpool2(const Sink& add) {
    Rng rng(404);
    auto x = random_tensor(Shape4{2, 4, 4, 2}, rng, -1.0, 1.0);
    auto [y, cache] = maxpool2(x);
    auto r = random_tensor(y.shape(), rng, -1.0, 1.0);
    auto dx = maxpool2_backward(cache, r);
    add("maxpool2.dx",
        fd_sweep(x, dx, [&]() { return projection(maxpool2(x).first, r); }));
}

void check_fc(const Sink& add) {
    Rng rng(505);
    auto x = random_tensor(Shape4{3, 1, 1, 10}, rng, -1.0, 1.0);
    auto w = random_tensor(Shape4{1, 1, 10, 4}, rng, -1.0, 1.0);
    auto b = random_tensor(Shape4{1, 1, 1, 4}, rng, -0.5, 0.5);
    auto out = fc_forward(x, w, b);
    auto r = random_tensor(out.shape(), rng, -1.0, 1.0);
    auto grads = fc_backward(x, w, r);
    auto loss = [&]() { return projection(fc_forward(x, w, b), r); };
    add("fc.dx", fd_sweep(x, grads.dx, loss));
    add("fc.dweights", fd_sweep(w, grads.dweights, loss));
    // Bias gradient comes from the same backward; sweep it through the loss.
    add("fc.dbias", fd_sweep(b, grads.dbias, loss));
}

void check_softmax_ce(const Sink& add) {
    Rng rng(606);
    auto logits = random_tensor(Shape4{4, 1, 1, 5}, rng, -2.0, 2.0);
    Tensor4<double> targets(Shape4{4, 1, 1, 5});
    for (int64_t b = 0; b < 4; ++b)
        targets.at(b, 0, 0, static_cast<int64_t>(rng.bounded(5))) = 1.0;
    auto ce = cross_entropy(softmax(logits), targets);
    add("softmax_ce.dlogits",
        fd_sweep(logits, ce.grad,
                 [&]() { return cross_entropy(softmax(logits), targets).value; }));
}

void check_mse(const Sink& add) {
    Rng rng(707);
    auto pred = random_tensor(Shape4{5, 1, 1, 1}, rng, -2.0, 2.0);
    std::vector<double> targets(5);
    for (auto& t : targets) t = rng.uniform(-2.0, 2.0);
    auto mse = mse_loss(pred, targets);
    add("mse.dpred",
        fd_sweep(pred, mse.grad, [&]() { return mse_loss(pred, targets).value; }));
}

void check_full_small(const Sink& add) {
    struct Variant {
        Task task;
        const char* tag;
        uint64_t seed;
    };
    const Variant variants[] = {{Task::classification, "cls.", 4242},
                                {Task::regression, "reg.", 777}};
    for (const auto& v : variants) {
        auto m = build_small<double>(v.seed, v.task,
                                     v.task == Task::classification ? 2 : 1);
        // Generic evaluation point: zero biases park dead conv windows
        // exactly on the ReLU kink where FD legitimately disagrees.
        Rng brng(v.seed + 1);
        for (auto& p : m.params) {
            if (p.id.find(".bias") == std::string::npos) continue;
            for (int64_t i = 0; i < p.value.size(); ++i)
                p.value.data()[i] = brng.uniform(-0.2, 0.2);
        }
        Rng rng(v.seed + 2);
        auto x = random_tensor(Shape4{2, 1, 1, 4}, rng, -1.0, 1.0);
        Tensor4<double> hot(Shape4{2, 1, 1, 2});
        hot.at(0, 0, 0, 1) = 1.0;
        hot.at(1, 0, 0, 0) = 1.0;
        std::vector<double> targets = {0.25, -1.5};

        auto loss_now = [&]() {
            auto out = forward(m, x, false).output;
            return v.task == Task::classification ? cross_entropy(out, hot).value
                                                  : mse_loss(out, targets).value;
        };
        auto fwd = forward(m, x, true);
        LossValue<double> loss = v.task == Task::classification
                                     ? cross_entropy(fwd.output, hot)
                                     : mse_loss(fwd.output, targets);
        Tensor4<double> dx;
        auto grads = backward(m, fwd, loss.grad, &dx);
        for (size_t p = 0; p < m.params.size(); ++p)
            add("full-small." + std::string(v.tag) + m.params[p].id,
                fd_sweep(m.params[p].value, grads[p], loss_now));
        add("full-small." + std::string(v.tag) + "input", fd_sweep(x, dx, loss_now));
    }
}

}  // namespace

GradCheckReport gradcheck(const std::string& scope, double tolerance) {
    GradCheckReport report;
    report.tolerance = tolerance;
    Sink add = [&](const std::string& tensor, double err) {
        GradCheckEntry e;
        e.scope = tensor.substr(0, tensor.find('.'));
        e.tensor = tensor;
        e.max_rel_err = err;
        e.pass = err < tolerance;
        report.worst = std::max(report.worst, err);
        report.entries.push_back(std::move(e));
    };
    bool matched = false;
    auto want = [&](const char* name) {
        if (scope == name || scope == "all") {
            matched = true;
            return true;
        }
        return false;
    };
    if (want("conv2d")) check_conv2d(add);
    if (want("deconv2d")) check_deconv2d(add);
    if (want("relu")) check_relu(add);
    if (want("maxpool2")) check_maxpool2(add);
    if (want("fc")) check_fc(add);
    if (want("softmax_ce")) check_softmax_ce(add);
    if (want("mse")) check_mse(add);
    if (want("full-small")) check_full_small(add);
    if (!matched)
        throw InputError("unknown gradcheck scope: " + scope +
                         " (expected conv2d, deconv2d, relu, maxpool2, fc, softmax_ce, "
                         "mse, full-small, or all)");
    report.pass = true;
    for (const auto& e : report.entries) report.pass = report.pass && e.pass;
    return report;
}

}  // namespace dcnet
