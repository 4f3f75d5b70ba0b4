#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/model.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

// Per-attribute min/max captured from the training split.
struct NormStats {
    std::vector<double> min;
    std::vector<double> max;
    int64_t size() const { return static_cast<int64_t>(min.size()); }
};

struct Dataset {
    Task task = Task::classification;
    int64_t n_attributes = 0;
    std::vector<double> features;          // row-major, size() x n_attributes
    std::vector<int64_t> labels;           // classification, in [0, num_classes)
    std::vector<double> targets;           // regression
    std::vector<std::string> label_names;  // class index -> original label text

    int64_t size() const {
        return n_attributes ? static_cast<int64_t>(features.size()) / n_attributes : 0;
    }
    int64_t num_classes() const { return static_cast<int64_t>(label_names.size()); }
    const double* row(int64_t i) const { return features.data() + i * n_attributes; }
    double* row(int64_t i) { return features.data() + i * n_attributes; }
};

enum class LabelColumn { first, last };

struct CsvSchema {
    LabelColumn label_column = LabelColumn::last;
    bool has_header = false;
    Task task = Task::classification;
};

// Comma-separated UTF-8 text, '.' decimals, no quoting. Classification label
// cells are arbitrary text mapped to 0-based indices in first-appearance
// order; regression label cells must parse as numbers.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

NormStats fit_normalize(const Dataset& train);

// x' = 2 (x - min) / (max - min) - 1 per attribute; constant attributes map
// to 0. Stats come from the training split and are reused verbatim on test
// data, whose values may land outside [-1, 1].
Dataset apply_normalize(const Dataset& ds, const NormStats& stats);

// Seeded uniform permutation, then a prefix of ceil(f * n) training rows.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed);

struct BatchPlan {
    int64_t batch_size = 0;
    uint64_t epoch_seed = 0;
    std::vector<int64_t> order;  // permutation of [0, n)
};

// epoch_seed is derived from (base_seed, epoch), so every epoch reshuffles
// differently while the whole schedule stays a function of the base seed.
BatchPlan make_batch_plan(int64_t n, int64_t batch_size, uint64_t base_seed, int64_t epoch);

// Consecutive slices of plan.order; the final partial batch is kept.
std::vector<std::vector<int64_t>> batches(const Dataset& ds, const BatchPlan& plan);

enum class SynthKind { linear_2class, xor_blobs, two_rings, sine_regression };

SynthKind synth_kind_from_name(const std::string& name);
const char* synth_kind_name(SynthKind kind);

// Deterministic toy generators. linear_2class is separable with a margin;
// xor_blobs and two_rings are not linearly separable; sine_regression is
// target = sin(sum w_i x_i) + noise. Classes are balanced to within one
// sample. noise scales a per-feature (or per-target) normal draw.
Dataset synth_dataset(SynthKind kind, int64_t n, int64_t n_attributes, double noise,
                      uint64_t seed);

// Feature-export CSV: header sample_id,label,f0..f_{k-1}; one row per sample.
void write_features_csv(const std::string& path, const std::vector<std::string>& sample_labels,
                        const std::vector<double>& rows, int64_t k);

// ------------------------------------------------------- batch gathering --

template <typename T>
Tensor4<T> gather_features(const Dataset& ds, const std::vector<int64_t>& idx) {
    Tensor4<T> x(Shape4{static_cast<int64_t>(idx.size()), 1, 1, ds.n_attributes});
    for (size_t b = 0; b < idx.size(); ++b) {
        const double* r = ds.row(idx[b]);
        for (int64_t j = 0; j < ds.n_attributes; ++j)
            x.data()[static_cast<int64_t>(b) * ds.n_attributes + j] = static_cast<T>(r[j]);
    }
    return x;
}

template <typename T>
Tensor4<T> gather_one_hot(const Dataset& ds, const std::vector<int64_t>& idx,
                          int64_t num_classes) {
    Tensor4<T> t(Shape4{static_cast<int64_t>(idx.size()), 1, 1, num_classes});
    for (size_t b = 0; b < idx.size(); ++b) {
        int64_t lab = ds.labels[idx[b]];
        if (lab < 0 || lab >= num_classes)
            throw InputError("label " + std::to_string(lab) + " outside [0, " +
                             std::to_string(num_classes) + ")");
        t.at(static_cast<int64_t>(b), 0, 0, lab) = T(1);
    }
    return t;
}

std::vector<int64_t> gather_labels(const Dataset& ds, const std::vector<int64_t>& idx);
std::vector<double> gather_targets(const Dataset& ds, const std::vector<int64_t>& idx);

}  // namespace dcnet
