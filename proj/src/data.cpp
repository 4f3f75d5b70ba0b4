#include "dcnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dcnet/rng.hpp"

namespace dcnet {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

// row/col are 1-based in error messages.
double parse_number(std::string_view field, int64_t row, int64_t col) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw FormatError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": cannot parse '" + std::string(field) + "' as a number");
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open csv file: " + path);

    Dataset ds;
    ds.task = schema.task;
    std::vector<std::string> class_of;  // label text by class index

    std::string line;
    int64_t row = 0;
    int64_t n_fields = -1;
    bool skipped_header = false;
    while (std::getline(is, line)) {
        ++row;
        if (schema.has_header && !skipped_header) {
            skipped_header = true;
            continue;
        }
        if (trim(line).empty() && is.peek() == std::char_traits<char>::eof()) break;
        auto fields = split_fields(line);
        if (n_fields < 0) {
            n_fields = static_cast<int64_t>(fields.size());
            if (n_fields < 2)
                throw FormatError("row " + std::to_string(row) +
                                  ": need at least one feature and a label column");
            ds.n_attributes = n_fields - 1;
        } else if (static_cast<int64_t>(fields.size()) != n_fields) {
            throw FormatError("row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(n_fields));
        }
        const int64_t label_col = schema.label_column == LabelColumn::first ? 0 : n_fields - 1;
        for (int64_t col = 0; col < n_fields; ++col) {
            if (col == label_col) continue;
            ds.features.push_back(parse_number(fields[col], row, col + 1));
        }
        std::string_view label = fields[label_col];
        if (schema.task == Task::regression) {
            ds.targets.push_back(parse_number(label, row, label_col + 1));
        } else {
            auto it = std::find(class_of.begin(), class_of.end(), std::string(label));
            if (it == class_of.end()) {
                class_of.emplace_back(label);
                ds.labels.push_back(static_cast<int64_t>(class_of.size()) - 1);
            } else {
                ds.labels.push_back(it - class_of.begin());
            }
        }
    }
    if (row == 0 || ds.size() == 0) throw FormatError("csv file has no data rows: " + path);
    ds.label_names = std::move(class_of);
    return ds;
}

NormStats fit_normalize(const Dataset& train) {
    if (train.size() == 0) throw InputError("fit_normalize: empty dataset");
    NormStats st;
    st.min.assign(train.n_attributes, std::numeric_limits<double>::infinity());
    st.max.assign(train.n_attributes, -std::numeric_limits<double>::infinity());
    for (int64_t i = 0; i < train.size(); ++i) {
        const double* r = train.row(i);
        for (int64_t j = 0; j < train.n_attributes; ++j) {
            st.min[j] = std::min(st.min[j], r[j]);
            st.max[j] = std::max(st.max[j], r[j]);
        }
    }
    return st;
}

Dataset apply_normalize(const Dataset& ds, const NormStats& stats) {
    if (ds.size() == 0) throw InputError("apply_normalize: empty dataset");
    if (stats.size() != ds.n_attributes)
        throw InputError("normalization stats cover " + std::to_string(stats.size()) +
                         " attributes, dataset has " + std::to_string(ds.n_attributes));
    Dataset out = ds;
    for (int64_t i = 0; i < out.size(); ++i) {
        double* r = out.row(i);
        for (int64_t j = 0; j < out.n_attributes; ++j) {
            const double range = stats.max[j] - stats.min[j];
            r[j] = range == 0.0 ? 0.0 : 2.0 * (r[j] - stats.min[j]) / range - 1.0;
        }
    }
    return out;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<int64_t>& order, int64_t begin,
                  int64_t end) {
    Dataset out;
    out.task = ds.task;
    out.n_attributes = ds.n_attributes;
    out.label_names = ds.label_names;
    out.features.reserve(static_cast<size_t>((end - begin) * ds.n_attributes));
    for (int64_t i = begin; i < end; ++i) {
        const double* r = ds.row(order[i]);
        out.features.insert(out.features.end(), r, r + ds.n_attributes);
        if (ds.task == Task::classification)
            out.labels.push_back(ds.labels[order[i]]);
        else
            out.targets.push_back(ds.targets[order[i]]);
    }
    return out;
}

std::vector<int64_t> permutation(int64_t n, uint64_t seed) {
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int64_t i = n - 1; i > 0; --i) {
        int64_t j = static_cast<int64_t>(rng.bounded(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, uint64_t seed) {
    if (ds.size() == 0) throw InputError("split: empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InputError("train_fraction must be in (0, 1), got " +
                         std::to_string(train_fraction));
    const int64_t n = ds.size();
    const int64_t n_train =
        static_cast<int64_t>(std::ceil(train_fraction * static_cast<double>(n)));
    auto order = permutation(n, splitmix64(seed));
    return {take_rows(ds, order, 0, n_train), take_rows(ds, order, n_train, n)};
}

BatchPlan make_batch_plan(int64_t n, int64_t batch_size, uint64_t base_seed, int64_t epoch) {
    if (batch_size < 1)
        throw ParamError("batch_size must be >= 1, got " + std::to_string(batch_size));
    if (n < 1) throw InputError("batch plan needs at least one sample");
    BatchPlan plan;
    plan.batch_size = batch_size;
    plan.epoch_seed = splitmix64(base_seed + 0x9E3779B97F4A7C15ull *
                                                 static_cast<uint64_t>(epoch));
    plan.order = permutation(n, plan.epoch_seed);
    return plan;
}

std::vector<std::vector<int64_t>> batches(const Dataset& ds, const BatchPlan& plan) {
    if (plan.batch_size < 1)
        throw ParamError("batch_size must be >= 1, got " + std::to_string(plan.batch_size));
    if (static_cast<int64_t>(plan.order.size()) != ds.size())
        throw StateError("batch plan covers " + std::to_string(plan.order.size()) +
                         " samples, dataset has " + std::to_string(ds.size()));
    std::vector<std::vector<int64_t>> out;
    for (size_t at = 0; at < plan.order.size(); at += static_cast<size_t>(plan.batch_size)) {
        size_t end = std::min(plan.order.size(), at + static_cast<size_t>(plan.batch_size));
        out.emplace_back(plan.order.begin() + static_cast<int64_t>(at),
                         plan.order.begin() + static_cast<int64_t>(end));
    }
    return out;
}

SynthKind synth_kind_from_name(const std::string& name) {
    if (name == "linear_2class") return SynthKind::linear_2class;
    if (name == "xor_blobs") return SynthKind::xor_blobs;
    if (name == "two_rings") return SynthKind::two_rings;
    if (name == "sine_regression") return SynthKind::sine_regression;
    throw InputError("unknown synthetic dataset kind: " + name);
}

const char* synth_kind_name(SynthKind kind) {
    switch (kind) {
        case SynthKind::linear_2class: return "linear_2class";
        case SynthKind::xor_blobs: return "xor_blobs";
        case SynthKind::two_rings: return "two_rings";
        case SynthKind::sine_regression: return "sine_regression";
    }
    return "?";
}

Dataset synth_dataset(SynthKind kind, int64_t n, int64_t n_attributes, double noise,
                      uint64_t seed) {
    if (n < 4) throw InputError("synthetic datasets need n >= 4");
    if (n_attributes < 2) throw InputError("synthetic datasets need n_attributes >= 2");
    if (noise < 0.0) throw InputError("noise must be nonnegative");

    Dataset ds;
    ds.n_attributes = n_attributes;
    ds.task = kind == SynthKind::sine_regression ? Task::regression : Task::classification;
    if (ds.task == Task::classification) ds.label_names = {"0", "1"};
    ds.features.resize(static_cast<size_t>(n * n_attributes));
    Rng rng(splitmix64(seed ^ (static_cast<uint64_t>(kind) + 1)));

    switch (kind) {
        case SynthKind::linear_2class: {
            // Unit direction w; samples sit at least `margin` away from the
            // hyperplane before noise, alternating sides for balance.
            const double margin = 0.2;
            std::vector<double> w(n_attributes);
            double norm = 0.0;
            for (auto& v : w) {
                v = rng.uniform(-1.0, 1.0);
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (auto& v : w) v /= norm;
            for (int64_t i = 0; i < n; ++i) {
                const int side = i % 2 == 0 ? 1 : -1;
                double* r = ds.row(i);
                double s = 0.0;
                for (int64_t j = 0; j < n_attributes; ++j) {
                    r[j] = rng.uniform(-1.0, 1.0);
                    s += w[j] * r[j];
                }
                const double want = side * (margin + rng.uniform(0.0, 0.8));
                for (int64_t j = 0; j < n_attributes; ++j) {
                    r[j] += (want - s) * w[j];
                    r[j] += noise * 0.05 * rng.normal();
                }
                ds.labels.push_back(side > 0 ? 1 : 0);
            }
            break;
        }
        case SynthKind::xor_blobs: {
            const double cx[4] = {0.5, -0.5, 0.5, -0.5};
            const double cy[4] = {0.5, -0.5, -0.5, 0.5};
            for (int64_t i = 0; i < n; ++i) {
                const int q = static_cast<int>(i % 4);  // quadrants 0,1 -> class 0
                double* r = ds.row(i);
                r[0] = cx[q] + noise * rng.normal();
                r[1] = cy[q] + noise * rng.normal();
                for (int64_t j = 2; j < n_attributes; ++j) r[j] = noise * rng.normal();
                ds.labels.push_back(q < 2 ? 0 : 1);
            }
            break;
        }
        case SynthKind::two_rings: {
            for (int64_t i = 0; i < n; ++i) {
                const int cls = static_cast<int>(i % 2);
                const double radius = cls == 0 ? 0.35 : 0.8;
                const double angle = rng.uniform(0.0, 6.283185307179586);
                double* r = ds.row(i);
                const double rr = radius + noise * rng.normal();
                r[0] = rr * std::cos(angle);
                r[1] = rr * std::sin(angle);
                for (int64_t j = 2; j < n_attributes; ++j) r[j] = noise * rng.normal();
                ds.labels.push_back(cls);
            }
            break;
        }
        case SynthKind::sine_regression: {
            std::vector<double> w(n_attributes);
            for (auto& v : w) v = rng.uniform(-1.0, 1.0);
            for (int64_t i = 0; i < n; ++i) {
                double* r = ds.row(i);
                double s = 0.0;
                for (int64_t j = 0; j < n_attributes; ++j) {
                    r[j] = rng.uniform(-1.0, 1.0);
                    s += w[j] * r[j];
                }
                ds.targets.push_back(std::sin(s) + noise * rng.normal());
            }
            break;
        }
    }
    return ds;
}

void write_features_csv(const std::string& path, const std::vector<std::string>& sample_labels,
                        const std::vector<double>& rows, int64_t k) {
    if (k < 1) throw ParamError("feature export needs k >= 1");
    const size_t n = sample_labels.size();
    if (rows.size() != n * static_cast<size_t>(k))
        throw ShapeError("feature export: " + std::to_string(rows.size()) +
                         " values do not form " + std::to_string(n) + " rows of " +
                         std::to_string(k));
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InputError("cannot open feature export file: " + path);
    os << "sample_id,label";
    for (int64_t j = 0; j < k; ++j) os << ",f" << j;
    os << "\n";
    char buf[32];
    for (size_t i = 0; i < n; ++i) {
        os << i << ',' << sample_labels[i];
        for (int64_t j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", rows[i * static_cast<size_t>(k) +
                                                        static_cast<size_t>(j)]);
            os << ',' << buf;
        }
        os << "\n";
    }
    if (!os) throw StateError("feature export write failed: " + path);
}

std::vector<int64_t> gather_labels(const Dataset& ds, const std::vector<int64_t>& idx) {
    std::vector<int64_t> out;
    out.reserve(idx.size());
    for (int64_t i : idx) out.push_back(ds.labels[i]);
    return out;
}

std::vector<double> gather_targets(const Dataset& ds, const std::vector<int64_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (int64_t i : idx) out.push_back(ds.targets[i]);
    return out;
}

}  // namespace dcnet
