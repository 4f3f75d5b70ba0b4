#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dcnet/data.hpp"
#include "dcnet/rng.hpp"
#include "doctest.h"

using namespace dcnet;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream os(path, std::ios::trunc);
    os << content;
    return path;
}

// Classic perceptron; returns the training accuracy it converges to.
double perceptron_accuracy(const Dataset& ds, int max_epochs = 2000) {
    std::vector<double> w(ds.n_attributes, 0.0);
    double b = 0.0;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        int64_t mistakes = 0;
        for (int64_t i = 0; i < ds.size(); ++i) {
            const double* r = ds.row(i);
            double s = b;
            for (int64_t j = 0; j < ds.n_attributes; ++j) s += w[j] * r[j];
            const int y = ds.labels[i] == 1 ? 1 : -1;
            if (y * s <= 0) {
                ++mistakes;
                for (int64_t j = 0; j < ds.n_attributes; ++j) w[j] += y * r[j];
                b += y;
            }
        }
        if (mistakes == 0) break;
    }
    int64_t hit = 0;
    for (int64_t i = 0; i < ds.size(); ++i) {
        const double* r = ds.row(i);
        double s = b;
        for (int64_t j = 0; j < ds.n_attributes; ++j) s += w[j] * r[j];
        if ((s > 0 ? 1 : 0) == ds.labels[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("csv loading") {
    SUBCASE("trailing string labels map by first appearance") {
        auto path = write_temp("dcnet_csv_basic.csv", "1.5,2,a\n3,4,b\n5,6e0,a\n");
        auto ds = load_csv(path, CsvSchema{LabelColumn::last, false, Task::classification});
        CHECK(ds.size() == 3);
        CHECK(ds.n_attributes == 2);
        CHECK(ds.labels == std::vector<int64_t>{0, 1, 0});
        CHECK(ds.label_names == std::vector<std::string>{"a", "b"});
        CHECK(ds.row(0)[0] == 1.5);
        CHECK(ds.row(2)[1] == 6.0);
        std::remove(path.c_str());
    }

    SUBCASE("header skipping and label-first column order") {
        auto path = write_temp("dcnet_csv_header.csv",
                               "class,x,y\r\npos,1,2\r\nneg,3,4\r\npos,5,6\r\n");
        auto ds = load_csv(path, CsvSchema{LabelColumn::first, true, Task::classification});
        CHECK(ds.size() == 3);
        CHECK(ds.labels == std::vector<int64_t>{0, 1, 0});
        CHECK(ds.label_names == std::vector<std::string>{"pos", "neg"});
        CHECK(ds.row(1)[0] == 3.0);
        CHECK(ds.row(2)[1] == 6.0);
        std::remove(path.c_str());
    }

    SUBCASE("regression labels parse as numbers") {
        auto path = write_temp("dcnet_csv_reg.csv", " 1 , 2 , 0.5\n3,4,-1.25\n");
        auto ds = load_csv(path, CsvSchema{LabelColumn::last, false, Task::regression});
        CHECK(ds.task == Task::regression);
        CHECK(ds.targets == std::vector<double>{0.5, -1.25});
        CHECK(ds.labels.empty());
        std::remove(path.c_str());
    }

    SUBCASE("ragged rows name the offending row") {
        auto path = write_temp("dcnet_csv_ragged.csv", "1,2,a\n3,b\n");
        try {
            load_csv(path, CsvSchema{});
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
        std::remove(path.c_str());
    }

    SUBCASE("bad numeric cells name row and column") {
        auto path = write_temp("dcnet_csv_badnum.csv", "1,2,a\n3,oops,b\n");
        try {
            load_csv(path, CsvSchema{});
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            std::string msg = e.what();
            CHECK(msg.find("row 2") != std::string::npos);
            CHECK(msg.find("column 2") != std::string::npos);
            CHECK(msg.find("oops") != std::string::npos);
        }
        std::remove(path.c_str());
    }

    SUBCASE("empty and missing files") {
        auto path = write_temp("dcnet_csv_empty.csv", "");
        CHECK_THROWS_AS(load_csv(path, CsvSchema{}), FormatError);
        std::remove(path.c_str());
        auto hdr_only = write_temp("dcnet_csv_hdr_only.csv", "x,y,class\n");
        CHECK_THROWS_AS(load_csv(hdr_only, CsvSchema{LabelColumn::last, true,
                                                     Task::classification}),
                        FormatError);
        std::remove(hdr_only.c_str());
        CHECK_THROWS_AS(load_csv("/nonexistent/x.csv", CsvSchema{}), InputError);
    }
}

TEST_CASE("normalization") {
    Dataset ds;
    ds.n_attributes = 2;
    ds.features = {0, 7, 5, 7, 10, 7};  // attr0 = {0,5,10}, attr1 constant 7
    ds.labels = {0, 1, 0};
    ds.label_names = {"a", "b"};

    auto st = fit_normalize(ds);
    CHECK(st.min == std::vector<double>{0, 7});
    CHECK(st.max == std::vector<double>{10, 7});

    auto norm = apply_normalize(ds, st);
    CHECK(norm.row(0)[0] == -1.0);
    CHECK(norm.row(1)[0] == 0.0);
    CHECK(norm.row(2)[0] == 1.0);
    for (int64_t i = 0; i < 3; ++i) CHECK(norm.row(i)[1] == 0.0);  // constant attr

    SUBCASE("test data may extrapolate outside [-1, 1]") {
        Dataset test;
        test.n_attributes = 2;
        test.features = {12, 7};
        test.labels = {0};
        test.label_names = ds.label_names;
        auto tn = apply_normalize(test, st);
        CHECK(tn.row(0)[0] == doctest::Approx(1.4).epsilon(1e-12));
    }

    SUBCASE("round-trip recovers the original features") {
        auto synth = synth_dataset(SynthKind::two_rings, 200, 5, 0.1, 99);
        auto stats = fit_normalize(synth);
        auto fwd = apply_normalize(synth, stats);
        for (int64_t i = 0; i < synth.size(); ++i)
            for (int64_t j = 0; j < synth.n_attributes; ++j) {
                const double range = stats.max[j] - stats.min[j];
                const double back =
                    range == 0.0 ? stats.min[j]
                                 : (fwd.row(i)[j] + 1.0) / 2.0 * range + stats.min[j];
                CHECK(back == doctest::Approx(synth.row(i)[j]).epsilon(1e-6));
            }
        // Training features always land inside [-1, 1].
        for (int64_t i = 0; i < fwd.size(); ++i)
            for (int64_t j = 0; j < fwd.n_attributes; ++j) {
                CHECK(fwd.row(i)[j] >= -1.0);
                CHECK(fwd.row(i)[j] <= 1.0);
            }
    }

    SUBCASE("validation") {
        Dataset empty;
        empty.n_attributes = 2;
        CHECK_THROWS_AS(fit_normalize(empty), InputError);
        CHECK_THROWS_AS(apply_normalize(empty, st), InputError);
        NormStats bad;
        bad.min = {0};
        bad.max = {1};
        CHECK_THROWS_AS(apply_normalize(ds, bad), InputError);
    }
}

TEST_CASE("splitting") {
    auto ds = synth_dataset(SynthKind::linear_2class, 10, 3, 0.0, 4);
    auto [train, test] = split(ds, 0.8, 21);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    CHECK(train.n_attributes == 3);
    CHECK(train.label_names == ds.label_names);

    SUBCASE("sizes follow the ceiling rule") {
        auto [tr5, te5] = split(ds, 0.5, 1);  // ceil(5.0) = 5
        CHECK(tr5.size() == 5);
        auto ds7 = synth_dataset(SynthKind::linear_2class, 7, 3, 0.0, 4);
        auto [tr7, te7] = split(ds7, 0.7, 1);  // ceil(4.9) = 5
        CHECK(tr7.size() == 5);
        CHECK(te7.size() == 2);
    }

    SUBCASE("deterministic per seed") {
        auto [a_train, a_test] = split(ds, 0.8, 21);
        CHECK(a_train.features == train.features);
        CHECK(a_train.labels == train.labels);
        CHECK(a_test.features == test.features);
        bool differs = false;
        for (uint64_t s = 100; s < 110 && !differs; ++s) {
            auto [b_train, b_test] = split(ds, 0.8, s);
            if (b_train.features != train.features) differs = true;
        }
        CHECK(differs);
    }

    SUBCASE("union of the splits is the original multiset of rows") {
        std::multiset<std::vector<double>> original, rejoined;
        for (int64_t i = 0; i < ds.size(); ++i)
            original.insert(std::vector<double>(ds.row(i), ds.row(i) + ds.n_attributes));
        for (int64_t i = 0; i < train.size(); ++i)
            rejoined.insert(
                std::vector<double>(train.row(i), train.row(i) + train.n_attributes));
        for (int64_t i = 0; i < test.size(); ++i)
            rejoined.insert(std::vector<double>(test.row(i), test.row(i) + test.n_attributes));
        CHECK(original == rejoined);
    }

    SUBCASE("fraction bounds") {
        CHECK_THROWS_AS(split(ds, 0.0, 1), InputError);
        CHECK_THROWS_AS(split(ds, 1.0, 1), InputError);
        CHECK_THROWS_AS(split(ds, -0.2, 1), InputError);
        CHECK_THROWS_AS(split(ds, 1.5, 1), InputError);
    }
}

TEST_CASE("batching") {
    auto ds = synth_dataset(SynthKind::xor_blobs, 10, 2, 0.05, 8);

    SUBCASE("slice sizes and exact coverage") {
        auto plan = make_batch_plan(ds.size(), 4, 17, 1);
        auto b = batches(ds, plan);
        REQUIRE(b.size() == 3);
        CHECK(b[0].size() == 4);
        CHECK(b[1].size() == 4);
        CHECK(b[2].size() == 2);
        std::set<int64_t> seen;
        for (const auto& slice : b) seen.insert(slice.begin(), slice.end());
        CHECK(seen.size() == 10);
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == 9);
    }

    SUBCASE("oversized batch degenerates to one slice") {
        auto plan = make_batch_plan(ds.size(), 64, 17, 1);
        auto b = batches(ds, plan);
        REQUIRE(b.size() == 1);
        CHECK(b[0].size() == 10);
    }

    SUBCASE("epochs reshuffle, deterministically per (seed, epoch)") {
        auto e1 = make_batch_plan(ds.size(), 4, 17, 1);
        auto e2 = make_batch_plan(ds.size(), 4, 17, 2);
        auto e1_again = make_batch_plan(ds.size(), 4, 17, 1);
        CHECK(e1.order == e1_again.order);
        CHECK(e1.epoch_seed == e1_again.epoch_seed);
        CHECK(e1.order != e2.order);
        CHECK(e1.epoch_seed != e2.epoch_seed);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(make_batch_plan(10, 0, 17, 1), ParamError);
        auto plan = make_batch_plan(5, 2, 17, 1);
        CHECK_THROWS_AS(batches(ds, plan), StateError);  // plan for wrong n
    }
}

TEST_CASE("synthetic generators") {
    SUBCASE("deterministic and balanced") {
        for (SynthKind kind : {SynthKind::linear_2class, SynthKind::xor_blobs,
                               SynthKind::two_rings}) {
            CAPTURE(synth_kind_name(kind));
            auto a = synth_dataset(kind, 101, 4, 0.1, 5);
            auto b = synth_dataset(kind, 101, 4, 0.1, 5);
            CHECK(a.features == b.features);
            CHECK(a.labels == b.labels);
            int64_t ones = std::count(a.labels.begin(), a.labels.end(), 1);
            CHECK(std::abs(2 * ones - 101) <= 1);  // 50/50 within one sample
            CHECK(a.size() == 101);
            CHECK(a.n_attributes == 4);
            CHECK(a.num_classes() == 2);
        }
    }

    SUBCASE("linear_2class is separable: perceptron oracle reaches 100%") {
        auto ds = synth_dataset(SynthKind::linear_2class, 200, 6, 0.0, 31);
        CHECK(perceptron_accuracy(ds) == 1.0);
        // Stays separable under mild noise thanks to the margin.
        auto noisy = synth_dataset(SynthKind::linear_2class, 200, 6, 0.5, 31);
        CHECK(perceptron_accuracy(noisy) > 0.95);
    }

    SUBCASE("xor_blobs defeats every linear threshold near the 75% ceiling") {
        auto ds = synth_dataset(SynthKind::xor_blobs, 400, 2, 0.0, 12);
        // Noise-free blobs collapse onto the four centroids; sweep a dense
        // family of hyperplanes and keep the best accuracy any of them gets.
        double best = 0.0;
        Rng rng(7);
        for (int trial = 0; trial < 20000; ++trial) {
            double w0 = rng.uniform(-1.0, 1.0), w1 = rng.uniform(-1.0, 1.0);
            double b = rng.uniform(-1.5, 1.5);
            int64_t hit = 0;
            for (int64_t i = 0; i < ds.size(); ++i) {
                int pred = w0 * ds.row(i)[0] + w1 * ds.row(i)[1] + b > 0 ? 1 : 0;
                if (pred == ds.labels[i]) ++hit;
            }
            double acc = static_cast<double>(hit) / static_cast<double>(ds.size());
            best = std::max(best, std::max(acc, 1.0 - acc));
        }
        CHECK(best <= 0.75 + 2.0 / static_cast<double>(ds.size()));
        CHECK(best >= 0.70);  // the sweep does find the good halfplanes
    }

    SUBCASE("two_rings places classes on their radii") {
        auto ds = synth_dataset(SynthKind::two_rings, 50, 3, 0.0, 9);
        for (int64_t i = 0; i < ds.size(); ++i) {
            const double r = std::hypot(ds.row(i)[0], ds.row(i)[1]);
            CHECK(r == doctest::Approx(ds.labels[i] == 0 ? 0.35 : 0.8).epsilon(1e-9));
            CHECK(ds.row(i)[2] == 0.0);
        }
    }

    SUBCASE("sine_regression follows its generating rule") {
        auto ds = synth_dataset(SynthKind::sine_regression, 64, 3, 0.0, 77);
        CHECK(ds.task == Task::regression);
        CHECK(ds.targets.size() == 64);
        for (double t : ds.targets) {
            CHECK(t <= 1.0);
            CHECK(t >= -1.0);
        }
        auto noisy = synth_dataset(SynthKind::sine_regression, 64, 3, 0.3, 77);
        bool outside = false;
        for (double t : noisy.targets)
            if (std::abs(t) > 1.0) outside = true;
        CHECK(outside);
    }

    SUBCASE("argument validation") {
        CHECK_THROWS_AS(synth_dataset(SynthKind::xor_blobs, 3, 2, 0.0, 1), InputError);
        CHECK_THROWS_AS(synth_dataset(SynthKind::xor_blobs, 8, 1, 0.0, 1), InputError);
        CHECK_THROWS_AS(synth_dataset(SynthKind::xor_blobs, 8, 2, -0.1, 1), InputError);
        CHECK_THROWS_AS(synth_kind_from_name("spiral"), InputError);
        CHECK(synth_kind_from_name("two_rings") == SynthKind::two_rings);
        CHECK(std::string(synth_kind_name(SynthKind::xor_blobs)) == "xor_blobs");
    }
}

TEST_CASE("batch gathering into tensors") {
    auto ds = synth_dataset(SynthKind::xor_blobs, 12, 3, 0.05, 3);
    std::vector<int64_t> idx = {4, 0, 7};
    auto x = gather_features<float>(ds, idx);
    CHECK(x.shape() == (Shape4{3, 1, 1, 3}));
    for (int64_t b = 0; b < 3; ++b)
        for (int64_t j = 0; j < 3; ++j)
            CHECK(x.at(b, 0, 0, j) == static_cast<float>(ds.row(idx[b])[j]));

    auto hot = gather_one_hot<float>(ds, idx, 2);
    CHECK(hot.shape() == (Shape4{3, 1, 1, 2}));
    for (int64_t b = 0; b < 3; ++b) {
        CHECK(hot.at(b, 0, 0, ds.labels[idx[b]]) == 1.0f);
        CHECK(hot.at(b, 0, 0, 1 - ds.labels[idx[b]]) == 0.0f);
    }
    CHECK(gather_labels(ds, idx) ==
          std::vector<int64_t>{ds.labels[4], ds.labels[0], ds.labels[7]});

    Dataset bad = ds;
    bad.labels[0] = 9;
    CHECK_THROWS_AS(gather_one_hot<float>(bad, std::vector<int64_t>{0}, 2), InputError);

    auto reg = synth_dataset(SynthKind::sine_regression, 8, 2, 0.0, 3);
    CHECK(gather_targets(reg, {1, 3}) ==
          std::vector<double>{reg.targets[1], reg.targets[3]});
}

TEST_CASE("feature export file format") {
    auto path =
        (std::filesystem::temp_directory_path() / "dcnet_feat_export.csv").string();
    write_features_csv(path, {"a", "b"}, {1.0, 2.5, -3.0, 0.125}, 2);
    std::ifstream is(path);
    std::string l0, l1, l2;
    std::getline(is, l0);
    std::getline(is, l1);
    std::getline(is, l2);
    CHECK(l0 == "sample_id,label,f0,f1");
    CHECK(l1 == "0,a,1,2.5");
    CHECK(l2 == "1,b,-3,0.125");
    CHECK_THROWS_AS(write_features_csv(path, {"a"}, {1.0, 2.0, 3.0}, 2), ShapeError);
    std::remove(path.c_str());
}
