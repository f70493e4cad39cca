#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seamcnn/error.hpp"
#include "seamcnn/image.hpp"
#include "seamcnn/model.hpp"
#include "seamcnn/rng.hpp"
#include "seamcnn/tensor.hpp"

namespace seamcnn {

struct DataItem {
    Tensor image; // 3x32x32, values in [0,1]
    int label = 0;
    std::string id;
};

struct Dataset {
    std::vector<DataItem> items;
    std::array<std::string, 2> class_names{"class0", "class1"};
};

struct SplitSpec {
    std::size_t test_per_class = 5;
    double train_fraction = 0.8;
    std::uint64_t seed = 12;
};

struct DataSplits {
    std::vector<DataItem> train, val, test;
};

// Reads root/<class0>/* and root/<class1>/* in lexicographic filename order
// (the order that defines "last N" test semantics), resizing everything to
// 3x32x32 in [0,1].
inline Dataset load_directory(const std::string& root,
                              const std::array<std::string, 2>& class_dirs) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.class_names = class_dirs;
    for (int label = 0; label < 2; ++label) {
        const fs::path dir = fs::path(root) / class_dirs[static_cast<std::size_t>(label)];
        if (!fs::is_directory(dir)) {
            throw ConfigError("class directory '" + dir.string() + "' does not exist");
        }
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
        for (const fs::path& file : files) {
            ImageU8 img = read_image(file.string());
            if (img.width != kInputSize || img.height != kInputSize) {
                img = resize_bilinear(img, kInputSize, kInputSize);
            }
            ds.items.push_back({image_to_tensor(img), label,
                                class_dirs[static_cast<std::size_t>(label)] + "/" +
                                    file.filename().string()});
        }
    }
    return ds;
}

// Last `test_per_class` items of each class (file order) go to test; the
// remainder is shuffled per class with the seed and split train:val by the
// fraction (floor on the train side).
inline DataSplits split_dataset(const Dataset& ds, const SplitSpec& spec = {}) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw ConfigError("train fraction must lie in (0,1)");
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const int y = ds.items[i].label;
        if (y != 0 && y != 1) throw DataError("item '" + ds.items[i].id + "' has label outside {0,1}");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (by_class[static_cast<std::size_t>(c)].size() < spec.test_per_class + 1) {
            throw ConfigError("class " + std::to_string(c) + " has " +
                              std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                              " items; need at least " + std::to_string(spec.test_per_class + 1));
        }
    }

    DataSplits out;
    Rng rng(spec.seed);
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[static_cast<std::size_t>(c)];
        const std::size_t n_rest = idx.size() - spec.test_per_class;
        for (std::size_t k = n_rest; k < idx.size(); ++k) out.test.push_back(ds.items[idx[k]]);
        std::vector<std::size_t> rest(idx.begin(), idx.begin() + static_cast<long>(n_rest));
        rng.shuffle(rest);
        const std::size_t n_train =
            static_cast<std::size_t>(spec.train_fraction * static_cast<double>(n_rest) + 1e-9);
        for (std::size_t k = 0; k < rest.size(); ++k) {
            (k < n_train ? out.train : out.val).push_back(ds.items[rest[k]]);
        }
    }
    return out;
}

// Two trivially separable classes at 32x32: a bright 5-pixel-thick bar,
// horizontal for class 0 and vertical for class 1, at a seeded random
// position over uniform background noise.
inline Dataset synth_dataset(std::uint64_t seed, std::size_t n_per_class = 60) {
    if (n_per_class < 6) throw ConfigError("synth_dataset needs at least 6 items per class");
    constexpr std::size_t kBar = 5;
    constexpr double kAmplitude = 0.65, kNoise = 0.3;
    Rng rng(seed);
    Dataset ds;
    ds.class_names = {"synth-horizontal", "synth-vertical"};
    for (int label = 0; label < 2; ++label) {
        for (std::size_t k = 0; k < n_per_class; ++k) {
            const std::size_t pos = rng.below(kInputSize - kBar + 1);
            Tensor img({3, kInputSize, kInputSize});
            for (std::size_t i = 0; i < img.size(); ++i) img.at(i) = rng.uniform(0.0, kNoise);
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t t = 0; t < kBar; ++t) {
                    for (std::size_t s = 0; s < kInputSize; ++s) {
                        double& v = label == 0 ? img.at(c, pos + t, s) : img.at(c, s, pos + t);
                        v = std::min(1.0, v + kAmplitude);
                    }
                }
            }
            char id[32];
            std::snprintf(id, sizeof(id), "synth/c%d/%03zu", label, k);
            ds.items.push_back({std::move(img), label, id});
        }
    }
    return ds;
}

// Index batches for one epoch; order is shuffled by (seed, epoch) and the
// final partial batch is kept.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n_items, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<std::size_t> order(n_items);
    for (std::size_t i = 0; i < n_items; ++i) order[i] = i;
    Rng rng(mix_seed(seed, epoch));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n_items; start += batch_size) {
        const std::size_t end = std::min(n_items, start + batch_size);
        out.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(end));
    }
    return out;
}

// One "id,label,split" row per item, train then val then test.
inline void write_split_manifest(const DataSplits& splits, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write split manifest '" + path + "'");
    auto emit = [&f](const std::vector<DataItem>& items, const char* name) {
        for (const DataItem& item : items) f << item.id << ',' << item.label << ',' << name << '\n';
    };
    emit(splits.train, "train");
    emit(splits.val, "val");
    emit(splits.test, "test");
    if (!f.good()) throw IoError("failed while writing split manifest '" + path + "'");
}

} // namespace seamcnn
