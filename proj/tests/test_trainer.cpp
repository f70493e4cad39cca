#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "seamcnn/trainer.hpp"
#include "support/oracles.hpp"

using namespace seamcnn;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 3;
    cfg.patience = 2;
    return cfg;
}

} // namespace

TEST_CASE("config validation", "[trainer][errors]") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    TrainConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.patience = 300; // not smaller than max_epochs
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.max_epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("early stopping halts after patience stale epochs", "[trainer]") {
    EarlyStopping s(1);
    CHECK_FALSE(s.observe(1, 1.0)); // improves over +inf
    CHECK(s.observe(2, 1.1));       // one stale epoch exhausts patience 1
    CHECK(s.best_epoch() == 1);
    CHECK(s.best_loss() == 1.0);
}

TEST_CASE("early stopping requires strict improvement", "[trainer]") {
    EarlyStopping s(2);
    CHECK_FALSE(s.observe(1, 0.5));
    CHECK_FALSE(s.observe(2, 0.5)); // equal is not an improvement
    CHECK(s.observe(3, 0.5));
    CHECK(s.best_epoch() == 1);
}

TEST_CASE("early stopping with large patience never fires before the cap", "[trainer]") {
    // the epoch cap itself is exercised through train(); here the stopper
    // alone shows patience 100 cannot fire within 3 epochs
    EarlyStopping s(100);
    CHECK_FALSE(s.observe(1, 3.0));
    CHECK_FALSE(s.observe(2, 4.0));
    CHECK_FALSE(s.observe(3, 5.0));
    CHECK(s.best_epoch() == 1);
}

TEST_CASE("improving losses keep the run alive and track the minimum", "[trainer]") {
    EarlyStopping s(3);
    const double losses[] = {0.9, 0.7, 0.8, 0.6, 0.65};
    for (std::size_t i = 0; i < 5; ++i) CHECK_FALSE(s.observe(i + 1, losses[i]));
    CHECK(s.best_epoch() == 4);
    CHECK(s.best_loss() == 0.6);
}

TEST_CASE("train records epochs, restores the best parameters", "[trainer]") {
    const Dataset ds = synth_dataset(12, 8);
    const DataSplits s = split_dataset(ds, SplitSpec{3, 0.8, 12});
    Model model(PoolKind::max, 12);
    const TrainConfig cfg = tiny_config();
    const History hist = train(model, s.train, s.val, cfg);

    REQUIRE(!hist.epochs.empty());
    CHECK(hist.stopped_epoch == hist.epochs.back().epoch);
    CHECK(hist.stopped_epoch <= cfg.max_epochs);
    REQUIRE(hist.best_epoch >= 1);
    CHECK(hist.best_epoch <= hist.stopped_epoch);

    double min_val = hist.epochs[0].val_loss;
    for (const EpochStats& e : hist.epochs) min_val = std::min(min_val, e.val_loss);
    CHECK(hist.epochs[hist.best_epoch - 1].val_loss == min_val);

    // restored parameters reproduce the best epoch's val loss exactly
    CHECK(mean_bce_loss(model, s.val) == min_val);
}

TEST_CASE("training the same configuration twice is bitwise identical", "[trainer]") {
    const Dataset ds = synth_dataset(12, 8);
    const DataSplits s = split_dataset(ds, SplitSpec{3, 0.8, 12});
    const TrainConfig cfg = tiny_config();
    Model a(PoolKind::seam, 12), b(PoolKind::seam, 12);
    const History ha = train(a, s.train, s.val, cfg);
    const History hb = train(b, s.train, s.val, cfg);
    REQUIRE(ha.epochs.size() == hb.epochs.size());
    for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
        CHECK(ha.epochs[i].train_loss == hb.epochs[i].train_loss);
        CHECK(ha.epochs[i].val_loss == hb.epochs[i].val_loss);
    }
    CHECK(ha.best_epoch == hb.best_epoch);
    CHECK(ha.stopped_epoch == hb.stopped_epoch);
}

TEST_CASE("an epoch callback can stop training", "[trainer]") {
    const Dataset ds = synth_dataset(12, 8);
    const DataSplits s = split_dataset(ds, SplitSpec{3, 0.8, 12});
    Model model(PoolKind::max, 12);
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 50;
    cfg.patience = 40;
    const History hist = train(model, s.train, s.val, cfg,
                               [](const EpochStats& e) { return e.epoch == 2; });
    CHECK(hist.stopped_epoch == 2);
    CHECK(hist.epochs.size() == 2);
}

TEST_CASE("train validates its inputs", "[trainer][errors]") {
    const Dataset ds = synth_dataset(12, 8);
    const DataSplits s = split_dataset(ds, SplitSpec{3, 0.8, 12});
    Model model(PoolKind::max, 12);
    CHECK_THROWS_AS(train(model, {}, s.val, tiny_config()), ConfigError);
    CHECK_THROWS_AS(train(model, s.train, {}, tiny_config()), ConfigError);
    TrainConfig bad = tiny_config();
    bad.lr = -1.0;
    CHECK_THROWS_AS(train(model, s.train, s.val, bad), ConfigError);
}

TEST_CASE("evaluate tallies a full confusion matrix with the >= 0.5 rule", "[trainer]") {
    const Dataset ds = synth_dataset(12, 8);
    const DataSplits s = split_dataset(ds, SplitSpec{3, 0.8, 12});
    Model model(PoolKind::max, 12);
    auto [cm, m] = evaluate(model, s.test);
    CHECK(cm.total() == s.test.size());
    CHECK(m.accuracy ==
          static_cast<double>(cm.counts[0][0] + cm.counts[1][1]) / static_cast<double>(cm.total()));
    CHECK(m.eval_loss > 0.0);
    CHECK_THROWS_AS(evaluate(model, {}), ConfigError);
}

TEST_CASE("a constant-zero model predicts class 1 everywhere", "[trainer]") {
    Model model(PoolKind::max, 12);
    for (Tensor* p : model.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) p->at(i) = 0.0;
    }
    const Dataset ds = synth_dataset(12, 8);
    std::vector<DataItem> balanced(ds.items.begin(), ds.items.end());
    auto [cm, m] = evaluate(model, balanced);
    CHECK(cm.counts[0][0] == 0);
    CHECK(cm.counts[1][0] == 0);
    CHECK(cm.counts[0][1] == 8);
    CHECK(cm.counts[1][1] == 8);
    CHECK(m.accuracy == 0.5);
    CHECK(oracle::rel_err(m.eval_loss, std::log(2.0)) < 1e-12);
}

TEST_CASE("relabeling by the model's own predictions yields accuracy 1", "[trainer]") {
    Model model(PoolKind::seam, 12);
    const Dataset ds = synth_dataset(13, 8);
    std::vector<DataItem> items(ds.items.begin(), ds.items.begin() + 10);
    for (DataItem& item : items) {
        item.label = sigmoid(model.forward(item.image)) >= 0.5 ? 1 : 0;
    }
    auto [cm, m] = evaluate(model, items);
    CHECK(m.accuracy == 1.0);
    CHECK(cm.counts[0][1] == 0);
    CHECK(cm.counts[1][0] == 0);
}

TEST_CASE("metrics reproduce the max-pooling confusion matrix", "[trainer][reference]") {
    ConfusionMatrix cm;
    cm.counts = {{{3, 2}, {1, 4}}};
    const Metrics m = metrics_from_confusion(cm);
    CHECK(oracle::rel_err(m.precision[0], 3.0 / 4.0) < 1e-15);
    CHECK(oracle::rel_err(m.recall[0], 3.0 / 5.0) < 1e-15);
    CHECK(oracle::rel_err(m.f1[0], 2.0 / 3.0) < 1e-15);
    CHECK(oracle::rel_err(m.precision[1], 2.0 / 3.0) < 1e-15);
    CHECK(oracle::rel_err(m.recall[1], 4.0 / 5.0) < 1e-15);
    CHECK(oracle::rel_err(m.f1[1], 8.0 / 11.0) < 1e-15);
    CHECK(m.accuracy == 0.7);
    CHECK_FALSE(m.zero_division);
    // reference values, at their printed rounding
    CHECK(std::abs(m.precision[0] - 0.75) <= 0.005);
    CHECK(std::abs(m.recall[0] - 0.60) <= 0.005);
    CHECK(std::abs(m.f1[0] - 0.67) <= 0.005);
    CHECK(std::abs(m.precision[1] - 0.67) <= 0.005);
    CHECK(std::abs(m.recall[1] - 0.80) <= 0.005);
    CHECK(std::abs(m.f1[1] - 0.73) <= 0.005);
}

TEST_CASE("metrics reproduce the seam-carving confusion matrix", "[trainer][reference]") {
    ConfusionMatrix cm;
    cm.counts = {{{3, 2}, {0, 5}}};
    const Metrics m = metrics_from_confusion(cm);
    CHECK(m.precision[0] == 1.0);
    CHECK(oracle::rel_err(m.recall[0], 0.6) < 1e-15);
    CHECK(oracle::rel_err(m.f1[0], 0.75) < 1e-15);
    CHECK(oracle::rel_err(m.precision[1], 5.0 / 7.0) < 1e-15);
    CHECK(m.recall[1] == 1.0);
    CHECK(oracle::rel_err(m.f1[1], 5.0 / 6.0) < 1e-15);
    CHECK(m.accuracy == 0.8);
    CHECK(std::abs(m.precision[0] - 1.00) <= 0.005);
    CHECK(std::abs(m.recall[0] - 0.60) <= 0.005);
    CHECK(std::abs(m.f1[0] - 0.75) <= 0.005);
    CHECK(std::abs(m.precision[1] - 0.71) <= 0.005);
    CHECK(std::abs(m.recall[1] - 1.00) <= 0.005);
    CHECK(std::abs(m.f1[1] - 0.83) <= 0.005);
}

TEST_CASE("perfect and degenerate confusion matrices", "[trainer]") {
    ConfusionMatrix perfect;
    perfect.counts = {{{5, 0}, {0, 5}}};
    const Metrics p = metrics_from_confusion(perfect);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(p.precision[c] == 1.0);
        CHECK(p.recall[c] == 1.0);
        CHECK(p.f1[c] == 1.0);
    }
    CHECK(p.accuracy == 1.0);
    CHECK_FALSE(p.zero_division);

    ConfusionMatrix onesided;
    onesided.counts = {{{0, 5}, {0, 5}}};
    const Metrics z = metrics_from_confusion(onesided);
    CHECK(z.precision[0] == 0.0);
    CHECK(z.recall[0] == 0.0);
    CHECK(z.f1[0] == 0.0);
    CHECK(z.zero_division);
    CHECK(z.accuracy == 0.5);

    CHECK_THROWS_AS(metrics_from_confusion(ConfusionMatrix{}), ConfigError);
}

TEST_CASE("history export emits rows, footer, and 6-decimal round-trip", "[trainer]") {
    History hist;
    hist.epochs = {{1, 0.6931471, 0.7012345}, {2, 0.51234567, 0.5523}, {3, 0.4, 0.61}};
    hist.best_epoch = 2;
    hist.stopped_epoch = 3;
    const fs::path path = fs::temp_directory_path() / "seamcnn-history.txt";
    export_history(hist, path.string());

    std::ifstream f(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(f, line);) lines.push_back(line);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "epoch train_loss val_loss");
    CHECK(lines[4] == "best_epoch 2");
    CHECK(lines[5] == "stopped_epoch 3");

    for (std::size_t i = 0; i < 3; ++i) {
        std::istringstream row(lines[i + 1]);
        std::size_t epoch = 0;
        double tr = 0.0, va = 0.0;
        row >> epoch >> tr >> va;
        CHECK(epoch == hist.epochs[i].epoch);
        CHECK(std::abs(tr - hist.epochs[i].train_loss) <= 1e-6);
        CHECK(std::abs(va - hist.epochs[i].val_loss) <= 1e-6);
    }

    // re-export is byte-identical
    const fs::path again = fs::temp_directory_path() / "seamcnn-history2.txt";
    export_history(hist, again.string());
    std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    CHECK_THROWS_AS(export_history(hist, "/nonexistent-dir/h.txt"), IoError);
    CHECK_THROWS_AS(export_history(History{}, path.string()), ConfigError);
}

TEST_CASE("metrics report carries the grid and every field", "[trainer]") {
    ConfusionMatrix cm;
    cm.counts = {{{3, 2}, {0, 5}}};
    Metrics m = metrics_from_confusion(cm);
    m.eval_loss = 0.472;
    const std::string rep = metrics_report(cm, m);
    for (const char* needle :
         {"pred_0", "pred_1", "true_0", "true_1", "accuracy=0.800000", "eval_loss=0.472000",
          "precision.class0=1.000000", "recall.class1=1.000000", "f1.class1=0.833333",
          "zero_division=false"}) {
        INFO(needle);
        CHECK(rep.find(needle) != std::string::npos);
    }
}
