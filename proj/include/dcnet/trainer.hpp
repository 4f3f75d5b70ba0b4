#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dcnet/data.hpp"
#include "dcnet/errors.hpp"
#include "dcnet/losses.hpp"
#include "dcnet/model.hpp"
#include "dcnet/optimizer.hpp"

namespace dcnet {

struct TrainConfig {
    int64_t epochs = 9;
    int64_t batch_size = 64;
    SgdConfig sgd;
    uint64_t seed = 1;
    int64_t eval_every = 1;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        SgdConfig horizon = sgd;
        horizon.total_epochs = epochs;
        horizon.validate();
    }
};

struct MetricsRecord {
    int64_t epoch = 0;  // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    std::string metric_name;  // "top1" or "rmse"; empty when not evaluated
    double metric_value = 0.0;
    double seconds = 0.0;  // wall time of the epoch, evaluation included
};

struct Metrics {
    std::vector<MetricsRecord> records;
};

struct EvalResult {
    std::string metric_name;
    double value = 0.0;
};

// Columns: epoch,lr,train_loss,metric_name,metric_value,seconds. Epochs
// without an evaluation leave the metric fields empty; with_timing=false
// leaves seconds empty so equal-seed runs emit identical bytes.
void write_metrics_csv(std::ostream& os, const Metrics& metrics, bool with_timing);

namespace detail {

template <typename T>
void check_model_data(const Model<T>& m, const Dataset& ds, const char* what) {
    if (ds.n_attributes != m.config.input_channels)
        throw ConfigError(std::string(what) + " has " + std::to_string(ds.n_attributes) +
                          " attributes, model expects " +
                          std::to_string(m.config.input_channels));
    if (ds.task != m.config.task)
        throw ConfigError(std::string(what) + " task does not match the model task");
    if (ds.task == Task::classification) {
        for (int64_t lab : ds.labels)
            if (lab < 0 || lab >= m.config.num_classes)
                throw ConfigError(std::string(what) + " label " + std::to_string(lab) +
                                  " outside model range [0, " +
                                  std::to_string(m.config.num_classes) + ")");
    }
}

}  // namespace detail

// Batched inference without caches; top-1 accuracy for classification
// (lowest index wins ties), RMSE for regression.
template <typename T>
EvalResult evaluate(const Model<T>& m, const Dataset& ds) {
    detail::check_model_data(m, ds, "evaluation set");
    if (ds.size() == 0) throw InputError("evaluate: empty dataset");
    const int64_t chunk = 128;
    EvalResult res;
    if (m.config.task == Task::classification) {
        int64_t hits = 0;
        for (int64_t at = 0; at < ds.size(); at += chunk) {
            const int64_t end = std::min(ds.size(), at + chunk);
            std::vector<int64_t> idx(static_cast<size_t>(end - at));
            for (int64_t i = at; i < end; ++i) idx[static_cast<size_t>(i - at)] = i;
            auto probs = forward(m, gather_features<T>(ds, idx), false).output;
            for (int64_t b = 0; b < end - at; ++b) {
                int64_t arg = 0;
                for (int64_t j = 1; j < m.config.num_classes; ++j)
                    if (probs.at(b, 0, 0, j) > probs.at(b, 0, 0, arg)) arg = j;
                if (arg == ds.labels[idx[static_cast<size_t>(b)]]) ++hits;
            }
        }
        res.metric_name = "top1";
        res.value = static_cast<double>(hits) / static_cast<double>(ds.size());
    } else {
        double sq = 0.0;
        for (int64_t at = 0; at < ds.size(); at += chunk) {
            const int64_t end = std::min(ds.size(), at + chunk);
            std::vector<int64_t> idx(static_cast<size_t>(end - at));
            for (int64_t i = at; i < end; ++i) idx[static_cast<size_t>(i - at)] = i;
            auto pred = forward(m, gather_features<T>(ds, idx), false).output;
            for (int64_t b = 0; b < end - at; ++b) {
                const double r = static_cast<double>(pred.at(b, 0, 0, 0)) -
                                 ds.targets[idx[static_cast<size_t>(b)]];
                sq += r * r;
            }
        }
        res.metric_name = "rmse";
        res.value = std::sqrt(sq / static_cast<double>(ds.size()));
    }
    return res;
}

// One full training run: per epoch, a reshuffled pass over the training set
// (forward with caches, task loss, backward, SGD step per parameter), then
// an optional evaluation. The LR schedule horizon follows cfg.epochs. The
// run is deterministic in (model seed, data, cfg.seed) up to wall times.
template <typename T>
Metrics train(Model<T>& m, const Dataset& train_ds, const Dataset& test_ds,
              const TrainConfig& cfg) {
    cfg.validate();
    detail::check_model_data(m, train_ds, "training set");
    detail::check_model_data(m, test_ds, "test set");
    if (train_ds.size() == 0) throw InputError("train: empty training set");

    SgdConfig sgd = cfg.sgd;
    sgd.total_epochs = cfg.epochs;
    sgd.validate();

    Metrics metrics;
    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = scheduled_lr(sgd, epoch);
        const auto plan = make_batch_plan(train_ds.size(), cfg.batch_size, cfg.seed, epoch);
        const auto slices = batches(train_ds, plan);
        double loss_sum = 0.0;
        for (size_t bi = 0; bi < slices.size(); ++bi) {
            auto x = gather_features<T>(train_ds, slices[bi]);
            auto fwd = forward(m, x, true);
            LossValue<T> loss;
            if (m.config.task == Task::classification) {
                loss = cross_entropy(fwd.output, gather_one_hot<T>(train_ds, slices[bi],
                                                                   m.config.num_classes));
            } else {
                const auto tgt = gather_targets(train_ds, slices[bi]);
                loss = mse_loss(fwd.output, std::vector<T>(tgt.begin(), tgt.end()));
            }
            if (!std::isfinite(loss.value))
                throw DivergenceError("non-finite training loss at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(bi + 1));
            auto grads = backward(m, fwd, loss.grad);
            for (size_t p = 0; p < m.params.size(); ++p)
                sgd_step(m.params[p].value, m.params[p].velocity, grads[p],
                         static_cast<T>(lr), static_cast<T>(sgd.momentum));
            loss_sum += loss.value;
        }
        MetricsRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(slices.size());
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            auto ev = evaluate(m, test_ds);
            rec.metric_name = ev.metric_name;
            rec.metric_value = ev.value;
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics.records.push_back(std::move(rec));
    }
    return metrics;
}

// ------------------------------------------------------------- gradcheck --

struct GradCheckEntry {
    std::string scope;
    std::string tensor;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    double tolerance = 1e-4;
    double worst = 0.0;
    bool pass = false;
    std::vector<GradCheckEntry> entries;
};

// Central finite differences (step 1e-5, double precision) against the
// analytic backward paths, on every parameter and input coordinate of small
// random instances. rel err = |a - n| / max(|a|, |n|, 1e-8). Scopes:
// conv2d, deconv2d, relu, maxpool2, fc, softmax_ce, mse, full-small, or
// "all". Evaluation points are randomized (biases included) to stay off
// the ReLU kink and maxpool ties; see the gradcheck sources.
GradCheckReport gradcheck(const std::string& scope, double tolerance);

}  // namespace dcnet
