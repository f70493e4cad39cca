#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "seamcnn/checkpoint.hpp"
#include "seamcnn/data.hpp"
#include "seamcnn/image.hpp"
#include "seamcnn/trainer.hpp"

namespace seamcnn::cli {

namespace fs = std::filesystem;

struct DataOptions {
    std::string data_root;
    bool synthetic = false;
    std::size_t n_per_class = 60;
    std::string class0, class1;
};

inline std::array<std::string, 2> resolve_class_dirs(const DataOptions& d) {
    if (!d.class0.empty() && !d.class1.empty()) return {d.class0, d.class1};
    if (!fs::is_directory(d.data_root)) {
        throw ConfigError("data root '" + d.data_root + "' does not exist");
    }
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(d.data_root)) {
        if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.size() != 2) {
        throw ConfigError("data root '" + d.data_root + "' holds " + std::to_string(dirs.size()) +
                          " directories; expected two classes (or pass --class0/--class1)");
    }
    return {dirs[0], dirs[1]};
}

inline Dataset load_data(const DataOptions& d, std::uint64_t seed) {
    if (d.synthetic) return synth_dataset(seed, d.n_per_class);
    if (d.data_root.empty()) throw ConfigError("provide --data DIR or --synthetic");
    return load_directory(d.data_root, resolve_class_dirs(d));
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Fixed key order, no timestamps: rerunning a command must reproduce the
// manifest byte for byte.
inline void write_manifest(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write manifest '" + path + "'");
    for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
    if (!f.good()) throw IoError("failed while writing manifest '" + path + "'");
}

inline void append_data_manifest(std::vector<std::pair<std::string, std::string>>& kv,
                                 const DataOptions& d) {
    if (d.synthetic) {
        kv.emplace_back("data", "synthetic");
        kv.emplace_back("n_per_class", std::to_string(d.n_per_class));
    } else {
        kv.emplace_back("data", d.data_root);
        const auto dirs = resolve_class_dirs(d);
        kv.emplace_back("class0", dirs[0]);
        kv.emplace_back("class1", dirs[1]);
    }
}

inline void append_train_manifest(std::vector<std::pair<std::string, std::string>>& kv,
                                  const TrainConfig& cfg) {
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("lr", fmt(cfg.lr));
    kv.emplace_back("batch_size", std::to_string(cfg.batch_size));
    kv.emplace_back("max_epochs", std::to_string(cfg.max_epochs));
    kv.emplace_back("patience", std::to_string(cfg.patience));
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create output directory '" + path + "': " + ec.message());
}

inline std::uint64_t param_checksum(Model& model) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (Tensor* p : model.parameters()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
        for (std::size_t i = 0; i < p->size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------- train ---

struct TrainCmd {
    DataOptions data;
    std::string pool = "seam";
    TrainConfig cfg;
    std::string out = "train-out";
};

inline int cmd_train(const TrainCmd& o) {
    const PoolKind kind = pool_kind_from(o.pool);
    o.cfg.validate();
    const Dataset ds = load_data(o.data, o.cfg.seed);
    const DataSplits splits = split_dataset(ds, SplitSpec{5, 0.8, o.cfg.seed});

    Model model = build_model(kind, o.cfg.seed);
    const History hist = train(model, splits.train, splits.val, o.cfg);

    ensure_dir(o.out);
    save_checkpoint(model, o.out + "/checkpoint.ckpt");
    export_history(hist, o.out + "/history.txt");
    write_split_manifest(splits, o.out + "/split.txt");
    std::vector<std::pair<std::string, std::string>> kv{{"command", "train"},
                                                        {"pool", pool_kind_name(kind)}};
    append_data_manifest(kv, o.data);
    append_train_manifest(kv, o.cfg);
    kv.emplace_back("out", o.out);
    write_manifest(o.out + "/config.txt", kv);

    std::cout << "trained " << pool_kind_name(kind) << " pooling: stopped at epoch "
              << hist.stopped_epoch << ", best epoch " << hist.best_epoch << " (val loss "
              << fmt6(hist.epochs[hist.best_epoch - 1].val_loss) << ")\n"
              << "wrote " << o.out << "/checkpoint.ckpt, history.txt, split.txt, config.txt\n";
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalCmd {
    std::string checkpoint;
    DataOptions data;
    std::string pool; // optional expectation; the checkpoint decides
    std::uint64_t seed = 12;
    std::string out = "eval-out";
};

inline int cmd_eval(const EvalCmd& o) {
    Model model = load_checkpoint(o.checkpoint);
    std::string pool_note = "from-checkpoint";
    if (!o.pool.empty() && pool_kind_from(o.pool) != model.pool_kind()) {
        std::cerr << "warning: checkpoint stores pool kind '" << pool_kind_name(model.pool_kind())
                  << "'; requested '" << o.pool << "' is ignored\n";
        pool_note = "mismatch-requested-" + o.pool;
    }
    const Dataset ds = load_data(o.data, o.seed);
    const DataSplits splits = split_dataset(ds, SplitSpec{5, 0.8, o.seed});
    auto [cm, metrics] = evaluate(model, splits.test);
    const std::string report = metrics_report(cm, metrics);

    ensure_dir(o.out);
    {
        std::ofstream f(o.out + "/eval_report.txt", std::ios::binary);
        if (!f) throw IoError("cannot write '" + o.out + "/eval_report.txt'");
        f << report;
    }
    std::vector<std::pair<std::string, std::string>> kv{
        {"command", "eval"},
        {"checkpoint", o.checkpoint},
        {"pool", pool_kind_name(model.pool_kind())},
        {"pool_request", pool_note}};
    append_data_manifest(kv, o.data);
    kv.emplace_back("seed", std::to_string(o.seed));
    kv.emplace_back("out", o.out);
    write_manifest(o.out + "/config.txt", kv);

    std::cout << report;
    return 0;
}

// ---------------------------------------------------------------- carve ---

struct CarveCmd {
    std::string input;
    std::size_t width = 0, height = 0; // 0 = keep the source dimension
    bool emit_energy = false, emit_seams = false;
    std::string out = "carve-out";
};

inline int cmd_carve(const CarveCmd& o) {
    const ImageU8 src = read_image(o.input);
    const std::size_t tw = o.width == 0 ? src.width : o.width;
    const std::size_t th = o.height == 0 ? src.height : o.height;
    if (tw > src.width || th > src.height) {
        throw ConfigError("target " + std::to_string(tw) + "x" + std::to_string(th) +
                          " exceeds source " + std::to_string(src.width) + "x" +
                          std::to_string(src.height) + "; seam carving only shrinks");
    }
    const Tensor x = image_to_tensor(src);
    const CarveResult r = carve(x, src.width - tw, src.height - th);

    ensure_dir(o.out);
    write_png(o.out + "/carved.png", tensor_to_image(r.tensor));
    if (o.emit_energy) write_png(o.out + "/energy.png", energy_to_image(energy_map(x)));
    if (o.emit_seams) write_png(o.out + "/seams.png", seam_overlay(src, r.map));
    write_manifest(o.out + "/config.txt",
                   {{"command", "carve"},
                    {"input", o.input},
                    {"width", std::to_string(tw)},
                    {"height", std::to_string(th)},
                    {"emit_energy", o.emit_energy ? "true" : "false"},
                    {"emit_seams", o.emit_seams ? "true" : "false"},
                    {"out", o.out}});

    std::cout << "carved " << src.width << "x" << src.height << " -> " << tw << "x" << th << " ("
              << r.seam_energies.size() << " seams) into " << o.out << "/carved.png\n";
    return 0;
}

// ------------------------------------------------------------- featmaps ---

struct FeatmapsCmd {
    std::string checkpoint;
    std::string input;
    std::string out = "featmaps-out";
};

inline int cmd_featmaps(const FeatmapsCmd& o) {
    Model model = load_checkpoint(o.checkpoint);
    ImageU8 img = read_image(o.input);
    if (img.width != kInputSize || img.height != kInputSize) {
        img = resize_bilinear(img, kInputSize, kInputSize);
    }
    const ForwardTrace tr = model.trace(image_to_tensor(img));

    ensure_dir(o.out);
    char name[64];
    std::size_t written = 0;
    auto dump = [&](const Tensor& t, const char* stage) {
        for (std::size_t c = 0; c < t.extent(0); ++c) {
            std::snprintf(name, sizeof(name), "%s/%s_%02zu.png", o.out.c_str(), stage, c);
            write_png(name, channel_to_image(t, c));
            ++written;
        }
    };
    dump(tr.conv1_out, "conv1");
    dump(tr.pool_out, "pool");
    dump(tr.conv2_out, "conv2");
    write_manifest(o.out + "/config.txt", {{"command", "featmaps"},
                                           {"checkpoint", o.checkpoint},
                                           {"input", o.input},
                                           {"pool", pool_kind_name(model.pool_kind())},
                                           {"out", o.out}});

    std::cout << "wrote " << written << " feature maps to " << o.out << "\n";
    return 0;
}

// -------------------------------------------------------------- compare ---

struct CompareCmd {
    DataOptions data;
    TrainConfig cfg;
    std::string out = "compare-out";
};

inline int cmd_compare(const CompareCmd& o) {
    o.cfg.validate();
    const Dataset ds = load_data(o.data, o.cfg.seed);
    const DataSplits splits = split_dataset(ds, SplitSpec{5, 0.8, o.cfg.seed});

    struct Side {
        std::string name;
        std::uint64_t checksum = 0;
        double epoch0_loss = 0.0;
        History hist;
        ConfusionMatrix cm;
        Metrics metrics;
    };
    std::array<Side, 2> sides;

    ensure_dir(o.out);
    for (std::size_t k = 0; k < 2; ++k) {
        const PoolKind kind = k == 0 ? PoolKind::seam : PoolKind::max;
        Side& side = sides[k];
        side.name = pool_kind_name(kind);
        Model model = build_model(kind, o.cfg.seed);
        side.checksum = param_checksum(model);
        side.epoch0_loss = mean_bce_loss(model, splits.train);
        side.hist = train(model, splits.train, splits.val, o.cfg);
        auto [cm, metrics] = evaluate(model, splits.test);
        side.cm = cm;
        side.metrics = metrics;
        save_checkpoint(model, o.out + "/checkpoint_" + side.name + ".ckpt");
        export_history(side.hist, o.out + "/history_" + side.name + ".txt");
    }
    write_split_manifest(splits, o.out + "/split.txt");

    std::string ids;
    for (const DataItem& item : splits.test) {
        if (!ids.empty()) ids += ';';
        ids += item.id;
    }
    std::ostringstream rep;
    auto row = [&rep](const std::string& key, const std::string& a, const std::string& b) {
        rep << key << ' ' << a << ' ' << b << '\n';
    };
    row("metric", sides[0].name, sides[1].name);
    row("init_param_checksum", hex64(sides[0].checksum), hex64(sides[1].checksum));
    row("epoch0_train_loss", fmt6(sides[0].epoch0_loss), fmt6(sides[1].epoch0_loss));
    row("stopped_epoch", std::to_string(sides[0].hist.stopped_epoch),
        std::to_string(sides[1].hist.stopped_epoch));
    row("best_epoch", std::to_string(sides[0].hist.best_epoch),
        std::to_string(sides[1].hist.best_epoch));
    row("best_val_loss", fmt6(sides[0].hist.epochs[sides[0].hist.best_epoch - 1].val_loss),
        fmt6(sides[1].hist.epochs[sides[1].hist.best_epoch - 1].val_loss));
    row("eval_loss", fmt6(sides[0].metrics.eval_loss), fmt6(sides[1].metrics.eval_loss));
    row("accuracy", fmt6(sides[0].metrics.accuracy), fmt6(sides[1].metrics.accuracy));
    for (std::size_t c = 0; c < 2; ++c) {
        const std::string suffix = ".class" + std::to_string(c);
        row("precision" + suffix, fmt6(sides[0].metrics.precision[c]),
            fmt6(sides[1].metrics.precision[c]));
        row("recall" + suffix, fmt6(sides[0].metrics.recall[c]), fmt6(sides[1].metrics.recall[c]));
        row("f1" + suffix, fmt6(sides[0].metrics.f1[c]), fmt6(sides[1].metrics.f1[c]));
    }
    row("test_ids", ids, ids);
    {
        std::ofstream f(o.out + "/compare.txt", std::ios::binary);
        if (!f) throw IoError("cannot write '" + o.out + "/compare.txt'");
        f << rep.str();
    }
    std::vector<std::pair<std::string, std::string>> kv{{"command", "compare"}};
    append_data_manifest(kv, o.data);
    append_train_manifest(kv, o.cfg);
    kv.emplace_back("out", o.out);
    write_manifest(o.out + "/config.txt", kv);

    std::cout << rep.str();
    return 0;
}

// ---------------------------------------------------------------- bench ---

struct BenchCmd {
    std::vector<std::string> sizes{"16x32x32"};
    std::size_t reps = 5;
    std::string out = "bench-out";
};

inline std::vector<std::size_t> parse_size(const std::string& s) {
    std::vector<std::size_t> dims;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t stop = std::min(s.find('x', start), s.size());
        try {
            std::size_t used = 0;
            dims.push_back(std::stoul(s.substr(start, stop - start), &used));
            if (used != stop - start) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw ConfigError("bad size '" + s + "'; expected CxHxW like 16x32x32");
        }
        start = stop + 1;
    }
    if (dims.size() != 3 || dims[0] < 1) {
        throw ConfigError("bad size '" + s + "'; expected CxHxW like 16x32x32");
    }
    if (dims[1] % 2 != 0 || dims[2] % 2 != 0 || dims[1] < 2 || dims[2] < 2) {
        throw ConfigError("bench sizes need even H and W (pooling halves them), got '" + s + "'");
    }
    return dims;
}

inline int cmd_bench(const BenchCmd& o) {
    if (o.reps < 1) throw ConfigError("bench reps must be >= 1");
    std::vector<std::string> sizes = o.sizes;
    if (std::find(sizes.begin(), sizes.end(), "16x32x32") == sizes.end()) {
        sizes.insert(sizes.begin(), "16x32x32"); // the model's pooling input is always shown
    }

    auto time_ms = [](auto&& body) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count();
    };
    auto min_med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const double med = v.size() % 2 == 1
                               ? v[v.size() / 2]
                               : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        return std::pair<double, double>(v.front(), med);
    };

    std::ostringstream rep;
    rep << "size seam_min_ms seam_med_ms max_min_ms max_med_ms seam_over_max note\n";
    for (const std::string& size : sizes) {
        const auto dims = parse_size(size);
        Rng rng(12);
        Tensor x({dims[0], dims[1], dims[2]});
        for (std::size_t i = 0; i < x.size(); ++i) x.at(i) = rng.uniform(0.0, 1.0);
        Tensor g({dims[0], dims[1] / 2, dims[2] / 2});
        for (std::size_t i = 0; i < g.size(); ++i) g.at(i) = 1.0;

        std::vector<double> seam_ms, max_ms;
        for (std::size_t r = 0; r <= o.reps; ++r) {
            const double s = time_ms([&] {
                SeamPool2d pool;
                pool.forward(x);
                pool.backward(g);
            });
            const double m = time_ms([&] {
                MaxPool2d pool;
                pool.forward(x);
                pool.backward(g);
            });
            if (r == 0) continue; // warmup
            seam_ms.push_back(s);
            max_ms.push_back(m);
        }
        const auto [smin, smed] = min_med(seam_ms);
        const auto [mmin, mmed] = min_med(max_ms);
        char line[160];
        std::snprintf(line, sizeof(line), "%s %.3f %.3f %.3f %.3f %.1f %s\n", size.c_str(), smin,
                      smed, mmin, mmed, mmed > 0 ? smed / mmed : 0.0,
                      smed > mmed ? "seam-slower" : "inversion");
        rep << line;
    }

    ensure_dir(o.out);
    {
        std::ofstream f(o.out + "/bench.txt", std::ios::binary);
        if (!f) throw IoError("cannot write '" + o.out + "/bench.txt'");
        f << rep.str();
    }
    std::string joined;
    for (const std::string& s : sizes) {
        if (!joined.empty()) joined += ',';
        joined += s;
    }
    write_manifest(o.out + "/config.txt", {{"command", "bench"},
                                           {"sizes", joined},
                                           {"reps", std::to_string(o.reps)},
                                           {"out", o.out}});
    std::cout << rep.str();
    return 0;
}

// ----------------------------------------------------------- dispatcher ---

inline int cli_main(int argc, const char* const* argv) {
    CLI::App app{"seam-carving feature pooling: train and compare a small CNN that downsamples "
                 "with seam carving instead of max pooling, plus image-retargeting utilities"};
    app.require_subcommand(1);

    TrainCmd train_opts;
    EvalCmd eval_opts;
    CarveCmd carve_opts;
    FeatmapsCmd featmaps_opts;
    CompareCmd compare_opts;
    BenchCmd bench_opts;

    auto add_data_flags = [](CLI::App* cmd, DataOptions& d) {
        auto* data = cmd->add_option("--data", d.data_root,
                                     "dataset root holding one directory per class");
        auto* synth = cmd->add_flag("--synthetic", d.synthetic,
                                    "use the built-in synthetic bar dataset");
        cmd->add_option("--n-per-class", d.n_per_class, "synthetic items per class")
            ->capture_default_str();
        cmd->add_option("--class0", d.class0, "class-0 directory name (default: first sorted)");
        cmd->add_option("--class1", d.class1, "class-1 directory name (default: second sorted)");
        data->excludes(synth);
    };
    auto add_train_flags = [](CLI::App* cmd, TrainConfig& cfg) {
        cmd->add_option("--seed", cfg.seed, "PRNG seed")->capture_default_str();
        cmd->add_option("--lr", cfg.lr, "SGD learning rate")->capture_default_str();
        cmd->add_option("--batch", cfg.batch_size, "batch size")->capture_default_str();
        cmd->add_option("--max-epochs", cfg.max_epochs, "epoch cap")->capture_default_str();
        cmd->add_option("--patience", cfg.patience, "early-stopping patience")
            ->capture_default_str();
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train one pooling variant");
    add_data_flags(train_cmd, train_opts.data);
    train_cmd->add_option("--pool", train_opts.pool, "pooling layer: seam or max")
        ->check(CLI::IsMember({"seam", "max"}))
        ->capture_default_str();
    add_train_flags(train_cmd, train_opts.cfg);
    train_cmd->add_option("--out", train_opts.out, "output directory")->capture_default_str();

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
    add_data_flags(eval_cmd, eval_opts.data);
    eval_cmd->add_option("--pool", eval_opts.pool,
                         "expected pool kind (the checkpoint's own kind wins)")
        ->check(CLI::IsMember({"seam", "max"}));
    eval_cmd->add_option("--seed", eval_opts.seed, "split seed")->capture_default_str();
    eval_cmd->add_option("--out", eval_opts.out, "output directory")->capture_default_str();

    CLI::App* carve_cmd = app.add_subcommand("carve", "retarget an image by seam removal");
    carve_cmd->add_option("--input", carve_opts.input, "PNG or JPEG to carve")->required();
    carve_cmd->add_option("--width", carve_opts.width, "target width (default: source width)");
    carve_cmd->add_option("--height", carve_opts.height, "target height (default: source height)");
    carve_cmd->add_flag("--emit-energy", carve_opts.emit_energy,
                        "also write the pre-carve energy map PNG");
    carve_cmd->add_flag("--emit-seams", carve_opts.emit_seams,
                        "also write the source with removed pixels highlighted");
    carve_cmd->add_option("--out", carve_opts.out, "output directory")->capture_default_str();

    CLI::App* featmaps_cmd =
        app.add_subcommand("featmaps", "dump per-channel feature maps for one image");
    featmaps_cmd->add_option("--checkpoint", featmaps_opts.checkpoint, "checkpoint file")
        ->required();
    featmaps_cmd->add_option("--input", featmaps_opts.input, "PNG or JPEG input")->required();
    featmaps_cmd->add_option("--out", featmaps_opts.out, "output directory")
        ->capture_default_str();

    CLI::App* compare_cmd =
        app.add_subcommand("compare", "train both variants on one split and report side by side");
    add_data_flags(compare_cmd, compare_opts.data);
    add_train_flags(compare_cmd, compare_opts.cfg);
    compare_cmd->add_option("--out", compare_opts.out, "output directory")->capture_default_str();

    CLI::App* bench_cmd = app.add_subcommand("bench", "time both pooling layers");
    bench_cmd->add_option("--sizes", bench_opts.sizes, "tensor sizes, CxHxW")
        ->delimiter(',')
        ->capture_default_str();
    bench_cmd->add_option("--reps", bench_opts.reps, "timed repetitions per size")
        ->capture_default_str();
    bench_cmd->add_option("--out", bench_opts.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad flags are configuration errors
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts);
        if (carve_cmd->parsed()) return cmd_carve(carve_opts);
        if (featmaps_cmd->parsed()) return cmd_featmaps(featmaps_opts);
        if (compare_cmd->parsed()) return cmd_compare(compare_opts);
        if (bench_cmd->parsed()) return cmd_bench(bench_opts);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace seamcnn::cli
