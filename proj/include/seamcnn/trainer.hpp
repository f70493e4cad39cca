#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "seamcnn/data.hpp"
#include "seamcnn/model.hpp"

namespace seamcnn {

struct TrainConfig {
    double lr = 0.01;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 300;
    std::size_t patience = 25;
    std::uint64_t seed = 12;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("learning rate must be positive");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (patience >= max_epochs) {
            throw ConfigError("patience (" + std::to_string(patience) +
                              ") must be smaller than max epochs (" +
                              std::to_string(max_epochs) + ")");
        }
    }
};

struct EpochStats {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
};

// Strict-improvement tracker: observe() returns true once the val loss has
// failed to improve for `patience` consecutive epochs.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {
        if (patience_ < 1) throw ConfigError("patience must be >= 1");
    }

    bool observe(std::size_t epoch, double val_loss) {
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch;
            stale_ = 0;
            return false;
        }
        return ++stale_ >= patience_;
    }

    bool improved_at(std::size_t epoch) const { return best_epoch_ == epoch; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t stale_ = 0;
};

inline double mean_bce_loss(Model& model, const std::vector<DataItem>& items) {
    if (items.empty()) throw ConfigError("cannot evaluate loss on an empty split");
    double total = 0.0;
    for (const DataItem& item : items) {
        total += sigmoid_bce_loss(model.forward(item.image), item.label);
    }
    return total / static_cast<double>(items.size());
}

// Optional per-epoch observer; returning true stops training after that
// epoch (the best-so-far parameters are still restored).
using EpochCallback = std::function<bool(const EpochStats&)>;

// SGD with per-epoch reshuffles, val loss after each epoch, early stopping
// on strict val improvement, and best-epoch parameter restore.
inline History train(Model& model, const std::vector<DataItem>& train_items,
                     const std::vector<DataItem>& val_items, const TrainConfig& cfg,
                     const EpochCallback& callback = {}) {
    cfg.validate();
    if (train_items.empty() || val_items.empty()) {
        throw ConfigError("train and val splits must be non-empty");
    }

    History hist;
    EarlyStopping stopper(cfg.patience);
    std::vector<std::vector<double>> best_params;

    auto snapshot = [&model, &best_params]() {
        best_params.clear();
        for (Tensor* p : model.parameters()) {
            best_params.emplace_back(p->data(), p->data() + p->size());
        }
    };

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double train_total = 0.0;
        const auto epoch_batches = batches(train_items.size(), cfg.batch_size, cfg.seed, epoch);
        for (const auto& batch : epoch_batches) {
            std::vector<const Tensor*> images;
            std::vector<int> labels;
            images.reserve(batch.size());
            labels.reserve(batch.size());
            for (std::size_t i : batch) {
                images.push_back(&train_items[i].image);
                labels.push_back(train_items[i].label);
            }
            train_total += model.train_step(std::span<const Tensor* const>(images),
                                            std::span<const int>(labels), cfg.lr);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_total / static_cast<double>(epoch_batches.size());
        stats.val_loss = mean_bce_loss(model, val_items);
        hist.epochs.push_back(stats);
        hist.stopped_epoch = epoch;

        const bool exhausted = stopper.observe(epoch, stats.val_loss);
        if (stopper.improved_at(epoch)) snapshot();
        if (exhausted) break;
        if (callback && callback(stats)) break;
    }

    hist.best_epoch = stopper.best_epoch();
    if (!best_params.empty()) {
        auto params = model.parameters();
        for (std::size_t t = 0; t < params.size(); ++t) {
            std::copy(best_params[t].begin(), best_params[t].end(), params[t]->data());
        }
    }
    return hist;
}

struct ConfusionMatrix {
    // counts[true][pred]
    std::array<std::array<std::size_t, 2>, 2> counts{{{0, 0}, {0, 0}}};

    std::size_t total() const {
        return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
    }
};

struct Metrics {
    std::array<double, 2> precision{0.0, 0.0};
    std::array<double, 2> recall{0.0, 0.0};
    std::array<double, 2> f1{0.0, 0.0};
    double accuracy = 0.0;
    double eval_loss = 0.0;
    bool zero_division = false; // some denominator was empty and reported as 0
};

inline Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ConfigError("confusion matrix is empty");
    Metrics m;
    for (std::size_t c = 0; c < 2; ++c) {
        const double tp = static_cast<double>(cm.counts[c][c]);
        const double fp = static_cast<double>(cm.counts[1 - c][c]);
        const double fn = static_cast<double>(cm.counts[c][1 - c]);
        if (tp + fp > 0) m.precision[c] = tp / (tp + fp);
        else m.zero_division = true;
        if (tp + fn > 0) m.recall[c] = tp / (tp + fn);
        else m.zero_division = true;
        if (m.precision[c] + m.recall[c] > 0) {
            m.f1[c] = 2.0 * m.precision[c] * m.recall[c] / (m.precision[c] + m.recall[c]);
        } else {
            m.zero_division = true;
        }
    }
    m.accuracy = static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) /
                 static_cast<double>(cm.total());
    return m;
}

// Prediction rule: class 1 iff sigmoid(logit) >= 0.5.
inline std::pair<ConfusionMatrix, Metrics> evaluate(Model& model,
                                                    const std::vector<DataItem>& test_items) {
    if (test_items.empty()) throw ConfigError("cannot evaluate on an empty test split");
    ConfusionMatrix cm;
    double total_loss = 0.0;
    for (const DataItem& item : test_items) {
        const double z = model.forward(item.image);
        total_loss += sigmoid_bce_loss(z, item.label);
        const int pred = sigmoid(z) >= 0.5 ? 1 : 0;
        ++cm.counts[static_cast<std::size_t>(item.label)][static_cast<std::size_t>(pred)];
    }
    Metrics m = metrics_from_confusion(cm);
    m.eval_loss = total_loss / static_cast<double>(test_items.size());
    return {cm, m};
}

inline std::string format_history(const History& hist) {
    if (hist.epochs.empty()) throw ConfigError("history is empty");
    std::ostringstream os;
    os << "epoch train_loss val_loss\n";
    char row[96];
    for (const EpochStats& e : hist.epochs) {
        std::snprintf(row, sizeof(row), "%zu %.6f %.6f\n", e.epoch, e.train_loss, e.val_loss);
        os << row;
    }
    os << "best_epoch " << hist.best_epoch << "\n";
    os << "stopped_epoch " << hist.stopped_epoch << "\n";
    return os.str();
}

inline void export_history(const History& hist, const std::string& path) {
    const std::string body = format_history(hist);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write history '" + path + "'");
    f << body;
    if (!f.good()) throw IoError("failed while writing history '" + path + "'");
}

// 2x2 grid plus one key=value line per reported field.
inline std::string metrics_report(const ConfusionMatrix& cm, const Metrics& m) {
    std::ostringstream os;
    os << "confusion_matrix (rows true, cols predicted)\n";
    os << "        pred_0  pred_1\n";
    char line[96];
    for (std::size_t t = 0; t < 2; ++t) {
        std::snprintf(line, sizeof(line), "true_%zu  %6zu  %6zu\n", t, cm.counts[t][0],
                      cm.counts[t][1]);
        os << line;
    }
    auto kv = [&os, &line](const char* key, double v) {
        std::snprintf(line, sizeof(line), "%s=%.6f\n", key, v);
        os << line;
    };
    kv("accuracy", m.accuracy);
    kv("eval_loss", m.eval_loss);
    kv("precision.class0", m.precision[0]);
    kv("recall.class0", m.recall[0]);
    kv("f1.class0", m.f1[0]);
    kv("precision.class1", m.precision[1]);
    kv("recall.class1", m.recall[1]);
    kv("f1.class1", m.f1[1]);
    os << "zero_division=" << (m.zero_division ? "true" : "false") << "\n";
    return os.str();
}

} // namespace seamcnn
