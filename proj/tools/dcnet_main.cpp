#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "dcnet/data.hpp"
#include "dcnet/model.hpp"
#include "dcnet/threadpool.hpp"
#include "dcnet/trainer.hpp"

namespace {

using namespace dcnet;

// ------------------------------------------------- normalization sidecar --
// Written next to every checkpoint (<checkpoint>.norm): the training-split
// min/max per attribute plus the label vocabulary, so later eval/export
// runs normalize exactly like training and map label text to the same
// class indices regardless of row order in the evaluation file.

struct Sidecar {
    NormStats stats;
    std::vector<std::string> labels;
};

void save_sidecar(const std::string& path, const Sidecar& sc) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InputError("cannot open normalization sidecar for writing: " + path);
    char buf[64];
    os << "dcnet-norm 1\nattrs " << sc.stats.size() << "\n";
    for (int64_t i = 0; i < sc.stats.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", sc.stats.min[static_cast<size_t>(i)]);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.17g", sc.stats.max[static_cast<size_t>(i)]);
        os << buf << '\n';
    }
    os << "labels " << sc.labels.size() << "\n";
    for (const auto& l : sc.labels) os << l << "\n";
}

double parse_double_or_throw(const std::string& text, const std::string& path) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw FormatError(path + ": cannot parse '" + text + "' as a number");
    return v;
}

Sidecar load_sidecar(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open normalization sidecar: " + path);
    auto next = [&](const char* what) {
        std::string line;
        if (!std::getline(is, line)) throw FormatError(path + ": missing " + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next("header") != "dcnet-norm 1")
        throw FormatError(path + ": not a dcnet normalization sidecar");
    Sidecar sc;
    std::string line = next("attrs count");
    if (line.rfind("attrs ", 0) != 0) throw FormatError(path + ": expected 'attrs N'");
    const int64_t n_attrs =
        static_cast<int64_t>(parse_double_or_throw(line.substr(6), path));
    for (int64_t i = 0; i < n_attrs; ++i) {
        line = next("min,max row");
        const size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError(path + ": expected 'min,max', got '" + line + "'");
        sc.stats.min.push_back(parse_double_or_throw(line.substr(0, comma), path));
        sc.stats.max.push_back(parse_double_or_throw(line.substr(comma + 1), path));
    }
    line = next("labels count");
    if (line.rfind("labels ", 0) != 0) throw FormatError(path + ": expected 'labels N'");
    const int64_t n_labels =
        static_cast<int64_t>(parse_double_or_throw(line.substr(7), path));
    for (int64_t i = 0; i < n_labels; ++i) sc.labels.push_back(next("label name"));
    return sc;
}

// Rewrites class indices of an evaluation set to the training vocabulary,
// so files listing classes in a different first-appearance order still
// score against the right head outputs.
void remap_labels(Dataset& ds, const std::vector<std::string>& train_names) {
    if (ds.task != Task::classification) return;
    std::vector<int64_t> to_train(ds.label_names.size());
    for (size_t j = 0; j < ds.label_names.size(); ++j) {
        bool found = false;
        for (size_t k = 0; k < train_names.size(); ++k) {
            if (train_names[k] == ds.label_names[j]) {
                to_train[j] = static_cast<int64_t>(k);
                found = true;
                break;
            }
        }
        if (!found)
            throw InputError("label '" + ds.label_names[j] +
                             "' does not appear in the training vocabulary");
    }
    for (auto& l : ds.labels) l = to_train[static_cast<size_t>(l)];
    ds.label_names = train_names;
}

// ------------------------------------------------------------ run guards --

void apply_threads(int threads_flag) {
    if (threads_flag > 0) {
        set_threads(threads_flag);
        return;
    }
    if (const char* env = std::getenv("DCNET_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) set_threads(v);
    }
}

// Exit codes: 0 success, 1 data error, 2 usage/config error, 3 divergence,
// 4 gradient-check failure (returned by cmd_gradcheck itself).
template <typename Fn>
int run_guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// --------------------------------------------------------------- flags ----

struct DataArgs {
    std::string synth;
    int64_t n = 2000;
    int64_t attrs = 8;
    double noise = 0.1;
    double split_frac = 0.8;
    std::string train_csv, test_csv, csv;
    std::string label_col = "last";
    bool no_header = false;
};

CsvSchema schema_for(const DataArgs& d, Task task) {
    CsvSchema s;
    s.label_column = d.label_col == "first" ? LabelColumn::first : LabelColumn::last;
    s.has_header = !d.no_header;
    s.task = task;
    return s;
}

void add_synth_flags(CLI::App* cmd, DataArgs& d) {
    cmd->add_option("--synth", d.synth, "Synthetic generator")
        ->check(CLI::IsMember(
            {"linear_2class", "xor_blobs", "two_rings", "sine_regression"}));
    cmd->add_option("--n", d.n, "Synthetic sample count")->check(CLI::Range(4, 100000000));
    cmd->add_option("--attrs", d.attrs, "Synthetic attribute count")
        ->check(CLI::Range(2, 100000));
    cmd->add_option("--noise", d.noise, "Synthetic noise level")
        ->check(CLI::Range(0.0, 100.0));
}

void add_csv_schema_flags(CLI::App* cmd, DataArgs& d) {
    cmd->add_option("--label-col", d.label_col, "Label column position")
        ->check(CLI::IsMember({"first", "last"}));
    cmd->add_flag("--no-header", d.no_header, "CSV files have no header row");
}

struct TrainArgs {
    DataArgs data;
    std::string task = "classification";
    int64_t classes = 2;
    int64_t deconv = 6;
    std::string precision = "float";
    TrainConfig cfg;
    uint64_t seed = 1;
    int threads = 0;
    bool no_timing = false;
    std::string metrics_path = "metrics.csv";
    std::string checkpoint_path = "model.dcn";
};

template <typename T>
int train_typed(const ModelConfig& mc, const TrainArgs& a, const Dataset& tr,
                const Dataset& te) {
    auto m = build<T>(mc);
    Metrics metrics = train(m, tr, te, a.cfg);
    std::ofstream os(a.metrics_path, std::ios::trunc);
    if (!os) throw InputError("cannot open metrics file for writing: " + a.metrics_path);
    write_metrics_csv(os, metrics, !a.no_timing);
    save_checkpoint(m, a.checkpoint_path);
    const auto& last = metrics.records.back();
    std::printf("%s %.6g\n", last.metric_name.c_str(), last.metric_value);
    return 0;
}

int cmd_train(TrainArgs a) {
    apply_threads(a.threads);
    a.cfg.seed = a.seed;
    a.cfg.validate();

    ModelConfig mc;
    mc.deconv_layers = a.deconv;
    mc.task = a.task == "regression" ? Task::regression : Task::classification;
    mc.num_classes = a.classes;
    mc.seed = a.seed;
    mc.precision =
        a.precision == "double" ? Precision::double_prec : Precision::single_prec;
    {
        ModelConfig probe = mc;
        probe.input_channels = 1;
        probe.validate();
    }

    Dataset train_raw, test_raw;
    if (!a.data.synth.empty()) {
        Dataset all = synth_dataset(synth_kind_from_name(a.data.synth), a.data.n,
                                    a.data.attrs, a.data.noise, a.seed);
        mc.task = all.task;
        std::tie(train_raw, test_raw) = split(all, a.data.split_frac, a.seed);
    } else {
        if (a.data.train_csv.empty() || a.data.test_csv.empty())
            throw ConfigError("train needs either --synth or both --train-csv and --test-csv");
        const CsvSchema schema = schema_for(a.data, mc.task);
        train_raw = load_csv(a.data.train_csv, schema);
        test_raw = load_csv(a.data.test_csv, schema);
    }
    mc.input_channels = train_raw.n_attributes;
    mc.validate();

    const NormStats stats = fit_normalize(train_raw);
    const Dataset tr = apply_normalize(train_raw, stats);
    const Dataset te = apply_normalize(test_raw, stats);
    save_sidecar(a.checkpoint_path + ".norm", Sidecar{stats, tr.label_names});

    return mc.precision == Precision::double_prec ? train_typed<double>(mc, a, tr, te)
                                                  : train_typed<float>(mc, a, tr, te);
}

struct EvalArgs {
    DataArgs data;
    std::string checkpoint_path;
    std::string norm_path;
    bool raw = false;
    uint64_t seed = 1;
    int threads = 0;
};

Dataset load_eval_data(const DataArgs& d, Task task, uint64_t seed) {
    if (!d.synth.empty())
        return synth_dataset(synth_kind_from_name(d.synth), d.n, d.attrs, d.noise, seed);
    if (d.csv.empty()) throw ConfigError("need either --csv or --synth");
    return load_csv(d.csv, schema_for(d, task));
}

Dataset prepare_eval_data(const EvalArgs& a, Task task) {
    Dataset ds = load_eval_data(a.data, task, a.seed);
    if (a.raw) return ds;
    const std::string norm =
        a.norm_path.empty() ? a.checkpoint_path + ".norm" : a.norm_path;
    const Sidecar sc = load_sidecar(norm);
    Dataset out = apply_normalize(ds, sc.stats);
    remap_labels(out, sc.labels);
    return out;
}

int cmd_eval(const EvalArgs& a) {
    apply_threads(a.threads);
    const ModelConfig mc = peek_checkpoint_config(a.checkpoint_path);
    const Dataset ds = prepare_eval_data(a, mc.task);
    EvalResult res;
    if (mc.precision == Precision::double_prec)
        res = evaluate(load_checkpoint<double>(a.checkpoint_path), ds);
    else
        res = evaluate(load_checkpoint<float>(a.checkpoint_path), ds);
    std::printf("%s %.6g\n", res.metric_name.c_str(), res.value);
    return 0;
}

struct ExportArgs {
    EvalArgs eval;
    std::string layer = "L11";
    int64_t limit = 0;
    std::string out = "features.csv";
    std::string input_out;
};

template <typename T>
void export_typed(const Model<T>& m, const Dataset& ds, const ExportArgs& a) {
    int64_t n = ds.size();
    if (a.limit > 0) n = std::min(n, a.limit);

    std::vector<std::string> label_text(static_cast<size_t>(n));
    char buf[64];
    for (int64_t i = 0; i < n; ++i) {
        if (ds.task == Task::classification) {
            label_text[static_cast<size_t>(i)] =
                ds.label_names[static_cast<size_t>(ds.labels[static_cast<size_t>(i)])];
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", ds.targets[static_cast<size_t>(i)]);
            label_text[static_cast<size_t>(i)] = buf;
        }
    }

    std::vector<double> rows;
    int64_t k = 0;
    const int64_t chunk = 128;
    for (int64_t at = 0; at < n; at += chunk) {
        const int64_t end = std::min(n, at + chunk);
        std::vector<int64_t> idx(static_cast<size_t>(end - at));
        for (int64_t i = at; i < end; ++i) idx[static_cast<size_t>(i - at)] = i;
        auto feats = extract_features(m, gather_features<T>(ds, idx), a.layer);
        const auto s = feats.shape();
        k = s.h * s.w * s.c;
        for (int64_t i = 0; i < feats.size(); ++i)
            rows.push_back(static_cast<double>(feats.data()[i]));
    }
    write_features_csv(a.out, label_text, rows, k);

    std::vector<double> inputs;
    inputs.reserve(static_cast<size_t>(n * ds.n_attributes));
    for (int64_t i = 0; i < n; ++i)
        inputs.insert(inputs.end(), ds.row(i), ds.row(i) + ds.n_attributes);
    write_features_csv(a.input_out, label_text, inputs, ds.n_attributes);

    std::printf("wrote %lld rows: %s (%lld features), %s (%lld features)\n",
                static_cast<long long>(n), a.out.c_str(), static_cast<long long>(k),
                a.input_out.c_str(), static_cast<long long>(ds.n_attributes));
}

int cmd_export(const ExportArgs& a) {
    apply_threads(a.eval.threads);
    const ModelConfig mc = peek_checkpoint_config(a.eval.checkpoint_path);

    // Tap ids depend on the depth in the checkpoint, so the layer flag can
    // only be vetted once the config is known; a bad id is a usage error.
    if (a.layer != "input") {
        bool known = false;
        const auto plan = layer_plan(mc);
        for (const auto& spec : plan) known = known || spec.id == a.layer;
        if (!known)
            throw ConfigError("unknown layer '" + a.layer + "': expected input or L1..L" +
                              std::to_string(2 * mc.deconv_layers + 9));
    }

    const Dataset ds = prepare_eval_data(a.eval, mc.task);
    if (mc.precision == Precision::double_prec)
        export_typed(load_checkpoint<double>(a.eval.checkpoint_path), ds, a);
    else
        export_typed(load_checkpoint<float>(a.eval.checkpoint_path), ds, a);
    return 0;
}

struct GradCheckArgs {
    std::string scope = "all";
    double tolerance = 1e-4;
    int threads = 0;
};

int cmd_gradcheck(const GradCheckArgs& a) {
    apply_threads(a.threads);
    const GradCheckReport report = gradcheck(a.scope, a.tolerance);
    std::printf("%-40s %14s  %s\n", "tensor", "max_rel_err", "status");
    for (const auto& e : report.entries)
        std::printf("%-40s %14.3e  %s\n", e.tensor.c_str(), e.max_rel_err,
                    e.pass ? "pass" : "FAIL");
    std::printf("worst %.3e against tolerance %.1e: %s\n", report.worst, report.tolerance,
                report.pass ? "PASS" : "FAIL");
    return report.pass ? 0 : 4;
}

struct SynthArgs {
    std::string kind;
    int64_t n = 2000;
    int64_t attrs = 8;
    double noise = 0.1;
    uint64_t seed = 1;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    const Dataset ds = synth_dataset(synth_kind_from_name(a.kind), a.n, a.attrs,
                                     a.noise, a.seed);
    std::ofstream os(a.out, std::ios::trunc);
    if (!os) throw InputError("cannot open output file for writing: " + a.out);
    for (int64_t j = 0; j < ds.n_attributes; ++j) os << 'f' << j << ',';
    os << "label\n";
    char buf[64];
    for (int64_t i = 0; i < ds.size(); ++i) {
        const double* r = ds.row(i);
        for (int64_t j = 0; j < ds.n_attributes; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", r[j]);
            os << buf << ',';
        }
        if (ds.task == Task::classification) {
            os << ds.label_names[static_cast<size_t>(ds.labels[static_cast<size_t>(i)])];
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", ds.targets[static_cast<size_t>(i)]);
            os << buf;
        }
        os << '\n';
    }
    std::printf("wrote %lld rows to %s\n", static_cast<long long>(ds.size()),
                a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DCNet: converts 1D feature vectors to images with stacked "
                 "deconvolutions, then classifies them with a 2D CNN"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* t = app.add_subcommand("train", "Train a model and write metrics + checkpoint");
    add_synth_flags(t, ta.data);
    t->add_option("--split", ta.data.split_frac, "Training fraction for --synth data")
        ->check(CLI::Range(0.01, 0.99));
    t->add_option("--train-csv", ta.data.train_csv, "Training CSV path");
    t->add_option("--test-csv", ta.data.test_csv, "Test CSV path");
    add_csv_schema_flags(t, ta.data);
    t->add_option("--task", ta.task, "Task for CSV data (synth kinds imply theirs)")
        ->check(CLI::IsMember({"classification", "regression"}));
    t->add_option("--classes", ta.classes, "Class count")->check(CLI::Range(2, 1000000));
    t->add_option("--deconv", ta.deconv, "Deconvolution layer count D")
        ->check(CLI::Range(3, 6));
    t->add_option("--precision", ta.precision, "Parameter scalar type")
        ->check(CLI::IsMember({"float", "double"}));
    t->add_option("--epochs", ta.cfg.epochs, "Training epochs")
        ->check(CLI::Range(1, 1000000));
    t->add_option("--batch", ta.cfg.batch_size, "Batch size")
        ->check(CLI::Range(1, 1000000));
    t->add_option("--eval-every", ta.cfg.eval_every, "Evaluate every k epochs")
        ->check(CLI::Range(1, 1000000));
    t->add_option("--lr", ta.cfg.sgd.initial_lr, "Initial learning rate");
    t->add_option("--momentum", ta.cfg.sgd.momentum, "SGD momentum");
    t->add_option("--decay-factor", ta.cfg.sgd.decay_factor, "LR decay factor");
    t->add_option("--decay-every", ta.cfg.sgd.decay_every, "Epochs between LR decays");
    t->add_option("--seed", ta.seed, "Master seed (init, shuffles, synth data)");
    t->add_option("--threads", ta.threads, "Worker threads (DCNET_THREADS fallback)");
    t->add_flag("--no-timing", ta.no_timing, "Leave the seconds column empty");
    t->add_option("--metrics", ta.metrics_path, "Metrics CSV output path");
    t->add_option("--checkpoint", ta.checkpoint_path, "Checkpoint output path");

    EvalArgs ea;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    e->add_option("--checkpoint", ea.checkpoint_path, "Checkpoint path")->required();
    e->add_option("--csv", ea.data.csv, "Evaluation CSV path");
    add_synth_flags(e, ea.data);
    add_csv_schema_flags(e, ea.data);
    e->add_option("--norm-stats", ea.norm_path,
                  "Normalization sidecar (default <checkpoint>.norm)");
    e->add_flag("--raw", ea.raw, "Skip normalization and label remapping");
    e->add_option("--seed", ea.seed, "Seed for --synth data");
    e->add_option("--threads", ea.threads, "Worker threads (DCNET_THREADS fallback)");

    ExportArgs xa;
    auto* x = app.add_subcommand("export-features",
                                 "Write per-sample activations of one layer to CSV");
    x->add_option("--checkpoint", xa.eval.checkpoint_path, "Checkpoint path")->required();
    x->add_option("--csv", xa.eval.data.csv, "Dataset CSV path");
    add_synth_flags(x, xa.eval.data);
    add_csv_schema_flags(x, xa.eval.data);
    x->add_option("--norm-stats", xa.eval.norm_path,
                  "Normalization sidecar (default <checkpoint>.norm)");
    x->add_flag("--raw", xa.eval.raw, "Skip normalization and label remapping");
    x->add_option("--layer", xa.layer, "Layer id to tap, or 'input'");
    x->add_option("--limit", xa.limit, "Export only the first N samples (0 = all)")
        ->check(CLI::Range(0, 100000000));
    x->add_option("--out", xa.out, "Feature CSV output path");
    x->add_option("--input-out", xa.input_out,
                  "Raw-input CSV output path (default <out> with _input suffix)");
    x->add_option("--seed", xa.eval.seed, "Seed for --synth data");
    x->add_option("--threads", xa.eval.threads, "Worker threads (DCNET_THREADS fallback)");

    GradCheckArgs ga;
    auto* g = app.add_subcommand("gradcheck",
                                 "Check analytic gradients against finite differences");
    g->add_option("--scope", ga.scope, "What to check")
        ->check(CLI::IsMember({"conv2d", "deconv2d", "relu", "maxpool2", "fc",
                               "softmax_ce", "mse", "full-small", "all"}));
    g->add_option("--tolerance", ga.tolerance, "Max allowed relative error");
    g->add_option("--threads", ga.threads, "Worker threads (DCNET_THREADS fallback)");

    SynthArgs sa;
    auto* s = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
    s->add_option("--kind", sa.kind, "Generator")
        ->required()
        ->check(CLI::IsMember(
            {"linear_2class", "xor_blobs", "two_rings", "sine_regression"}));
    s->add_option("--n", sa.n, "Sample count")->check(CLI::Range(4, 100000000));
    s->add_option("--attrs", sa.attrs, "Attribute count")->check(CLI::Range(2, 100000));
    s->add_option("--noise", sa.noise, "Noise level")->check(CLI::Range(0.0, 100.0));
    s->add_option("--seed", sa.seed, "Generator seed");
    s->add_option("--out", sa.out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : 2;
    }

    if (x->parsed() && xa.input_out.empty()) {
        const size_t dot = xa.out.rfind('.');
        xa.input_out = dot == std::string::npos ? xa.out + "_input"
                                                : xa.out.substr(0, dot) + "_input" +
                                                      xa.out.substr(dot);
    }

    if (t->parsed()) return run_guarded([&] { return cmd_train(ta); });
    if (e->parsed()) return run_guarded([&] { return cmd_eval(ea); });
    if (x->parsed()) return run_guarded([&] { return cmd_export(xa); });
    if (g->parsed()) return run_guarded([&] { return cmd_gradcheck(ga); });
    return run_guarded([&] { return cmd_synth(sa); });
}
