#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seamcnn/model.hpp"
#include "support/oracles.hpp"

using namespace seamcnn;

namespace {

Tensor random_image(Rng& rng) {
    return oracle::random_tensor({kInputChannels, kInputSize, kInputSize}, rng, 0.0, 1.0);
}

bool params_equal(Model& a, Model& b) {
    auto pa = a.parameters(), pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t t = 0; t < pa.size(); ++t) {
        if (!pa[t]->same_shape(*pb[t])) return false;
        for (std::size_t i = 0; i < pa[t]->size(); ++i) {
            if (pa[t]->at(i) != pb[t]->at(i)) return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("equal seeds build bitwise-identical models", "[model]") {
    Model a(PoolKind::max, 12), b(PoolKind::max, 12);
    CHECK(params_equal(a, b));
    Model c(PoolKind::max, 13);
    CHECK_FALSE(params_equal(a, c));
}

TEST_CASE("pool variants share initial parameters at equal seed", "[model][reference]") {
    Model seam(PoolKind::seam, 12), max(PoolKind::max, 12);
    CHECK(params_equal(seam, max));
}

TEST_CASE("parameter count is 13281", "[model][reference]") {
    Model m(PoolKind::seam, 12);
    CHECK(m.param_count() == 13281);
    std::size_t total = 0;
    for (Tensor* p : m.parameters()) total += p->size();
    CHECK(total == 13281);
}

TEST_CASE("all-zero parameters give a zero logit", "[model]") {
    Model m(PoolKind::max, 5);
    for (Tensor* p : m.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) p->at(i) = 0.0;
    }
    Rng rng(5);
    CHECK(m.forward(random_image(rng)) == 0.0);
}

TEST_CASE("zero-initialized head yields ln 2 loss on any batch", "[model]") {
    for (PoolKind kind : {PoolKind::seam, PoolKind::max}) {
        Model m(kind, 12);
        auto named = m.named_parameters();
        for (auto& [name, p] : named) {
            if (name.rfind("fc.", 0) == 0) {
                for (std::size_t i = 0; i < p->size(); ++i) p->at(i) = 0.0;
            }
        }
        Rng rng(77);
        std::vector<Tensor> images;
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) {
            images.push_back(random_image(rng));
            labels.push_back(i % 2);
        }
        const double loss = m.train_step(images, labels, 0.0);
        CHECK(oracle::rel_err(loss, std::log(2.0)) < 1e-12);
    }
}

TEST_CASE("logits do not depend on batch company", "[model]") {
    Model m(PoolKind::seam, 12);
    Rng rng(99);
    std::vector<Tensor> images;
    for (int i = 0; i < 6; ++i) images.push_back(random_image(rng));
    std::vector<double> batch_logits;
    for (const Tensor& img : images) batch_logits.push_back(m.forward(img));
    for (std::size_t i = 0; i < images.size(); ++i) {
        CHECK(m.forward(images[i]) == batch_logits[i]);
    }
}

TEST_CASE("intermediate shapes trace the documented chain", "[model][reference]") {
    Rng rng(101);
    const Tensor img = random_image(rng);
    for (PoolKind kind : {PoolKind::seam, PoolKind::max}) {
        Model m(kind, 12);
        ForwardTrace t = m.trace(img);
        CHECK(t.conv1_out.shape() == std::vector<std::size_t>{16, 32, 32});
        CHECK(t.pool_out.shape() == std::vector<std::size_t>{16, 16, 16});
        CHECK(t.conv2_out.shape() == std::vector<std::size_t>{32, 16, 16});
        CHECK(std::isfinite(t.logit));
    }
}

TEST_CASE("repeated steps on one example strictly decrease the loss", "[model]") {
    Rng rng(7);
    const Tensor img = random_image(rng);
    for (PoolKind kind : {PoolKind::seam, PoolKind::max}) {
        Model m(kind, 12);
        std::vector<Tensor> batch{img};
        std::vector<int> labels{1};
        double prev = m.train_step(batch, labels, 0.01);
        for (int step = 1; step < 10; ++step) {
            const double cur = m.train_step(batch, labels, 0.01);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("lr 0 leaves parameters untouched and the loss constant", "[model]") {
    Rng rng(8);
    Model m(PoolKind::max, 12);
    Model before = m;
    std::vector<Tensor> batch{random_image(rng)};
    std::vector<int> labels{0};
    const double l1 = m.train_step(batch, labels, 0.0);
    const double l2 = m.train_step(batch, labels, 0.0);
    CHECK(l1 == l2);
    CHECK(params_equal(m, before));
    CHECK_THROWS_AS(m.train_step(batch, labels, -0.1), ConfigError);
}

TEST_CASE("train_step validates its batch", "[model][errors]") {
    Model m(PoolKind::max, 12);
    Rng rng(9);
    std::vector<Tensor> batch{random_image(rng)};
    CHECK_THROWS_AS(m.train_step(std::vector<Tensor>{}, std::vector<int>{}, 0.01), ConfigError);
    CHECK_THROWS_AS(m.train_step(batch, std::vector<int>{0, 1}, 0.01), ConfigError);
    CHECK_THROWS_AS(m.train_step(batch, std::vector<int>{2}, 0.01), ConfigError);
}

TEST_CASE("model rejects wrong input shapes", "[model][errors]") {
    Model m(PoolKind::seam, 12);
    CHECK_THROWS_AS(m.forward(Tensor({3, 32, 31})), ShapeError);
    CHECK_THROWS_AS(m.forward(Tensor({1, 32, 32})), ShapeError);
    CHECK_THROWS_AS(m.backward(1.0), StateError);
}

TEST_CASE("end-to-end gradient agrees with finite differences", "[model][oracle]") {
    const double h = 1e-5;
    Rng rng(2024);
    const Tensor img = random_image(rng);
    const int label = 1;
    for (PoolKind kind : {PoolKind::seam, PoolKind::max}) {
        Model m(kind, 12);
        const double z = m.forward(img);
        const auto sel = m.last_pool_selection();
        m.backward(sigmoid_bce_grad(z, label));
        auto params = m.parameters();

        Rng pick(kind == PoolKind::seam ? 1u : 2u);
        int checked = 0, attempts = 0;
        while (checked < 8 && attempts < 64) {
            ++attempts;
            const std::size_t t = pick.below(params.size());
            const std::size_t i = pick.below(params[t]->size());
            bool stable = true;
            auto loss_with = [&](double delta) {
                Model probe = m;
                probe.parameters()[t]->at(i) += delta;
                const double zz = probe.forward(img);
                if (probe.last_pool_selection() != sel) stable = false;
                return sigmoid_bce_loss(zz, label);
            };
            const double up = loss_with(h), down = loss_with(-h);
            if (!stable) continue;
            ++checked;
            const double fd = (up - down) / (2.0 * h);
            const double an = params[t]->grad()[i];
            CHECK(oracle::rel_err(fd, an) < 1e-3);
        }
        CHECK(checked == 8);
    }
}

TEST_CASE("pool selection cache reflects the variant", "[model]") {
    Rng rng(55);
    const Tensor img = random_image(rng);
    Model seam(PoolKind::seam, 12);
    seam.forward(img);
    CHECK(seam.last_pool_selection().size() == 16 * 16);       // shared across channels
    Model max(PoolKind::max, 12);
    max.forward(img);
    CHECK(max.last_pool_selection().size() == 16 * 16 * 16);   // per channel
}

TEST_CASE("summary lists the layer chain and totals", "[model]") {
    Model seam(PoolKind::seam, 12);
    const std::string s = seam.summary();
    CHECK(s.find("seam-pool") != std::string::npos);
    CHECK(s.find("16x16x16") != std::string::npos);
    CHECK(s.find("total params: 13281") != std::string::npos);
    Model max(PoolKind::max, 12);
    const std::string t = max.summary();
    CHECK(t.find("max-pool 2x2") != std::string::npos);
    CHECK(t.find("8192") != std::string::npos);
}
