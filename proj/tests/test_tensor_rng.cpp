#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seamcnn/layers.hpp"
#include "seamcnn/rng.hpp"
#include "seamcnn/tensor.hpp"

using namespace seamcnn;

TEST_CASE("tensor shape and buffers stay consistent", "[tensor]") {
    Tensor t({2, 3, 4});
    CHECK(t.rank() == 3);
    CHECK(t.size() == 24);
    t.at(1, 2, 3) = 5.0;
    CHECK(t.at(1 * 12 + 2 * 4 + 3) == 5.0);
    t.grad_at(0, 0, 1) = 2.0;
    CHECK(t.grad()[1] == 2.0);
    t.zero_grad();
    CHECK(t.grad()[1] == 0.0);
    CHECK(t.shape_str() == "2x3x4");
}

TEST_CASE("tensor rejects invalid shapes", "[tensor][errors]") {
    CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({1, 2, 3, 4, 5}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("reshape keeps data and resets gradients", "[tensor]") {
    Tensor t({2, 2}, {1, 2, 3, 4});
    t.grad_at(0) = 9.0;
    const Tensor r = t.reshaped({4});
    CHECK(r.at(2) == 3.0);
    CHECK(r.grad()[0] == 0.0);
    CHECK_THROWS_AS(t.reshaped({5}), ShapeError);
}

TEST_CASE("rng sequences are reproducible", "[rng]") {
    Rng a(12), b(12);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(12), d(13);
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("rng uniform stays inside the open interval", "[rng]") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("shuffle is deterministic per seed", "[rng]") {
    std::vector<int> a(20), b(20);
    for (int i = 0; i < 20; ++i) a[i] = b[i] = i;
    Rng r1(5), r2(5);
    r1.shuffle(a);
    r2.shuffle(b);
    CHECK(a == b);
}

TEST_CASE("mix_seed separates streams", "[rng]") {
    CHECK(mix_seed(12, 0) != mix_seed(12, 1));
    CHECK(mix_seed(12, 0) != mix_seed(13, 0));
    CHECK(mix_seed(12, 7) == mix_seed(12, 7));
}

TEST_CASE("fan-in init stays inside the open bound", "[rng][init]") {
    Tensor w({10, 4});
    Tensor b({10});
    Rng rng(3);
    init_uniform_fan_in(w, b, 4, rng);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w.at(i) > -0.5);
        CHECK(w.at(i) < 0.5);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.at(i) > -0.5);
        CHECK(b.at(i) < 0.5);
    }
}

TEST_CASE("fan-in init is seed-deterministic", "[rng][init]") {
    Tensor w1({6, 9}), b1({6}), w2({6, 9}), b2({6});
    Rng r1(12), r2(12);
    init_uniform_fan_in(w1, b1, 9, r1);
    init_uniform_fan_in(w2, b2, 9, r2);
    for (std::size_t i = 0; i < w1.size(); ++i) CHECK(w1.at(i) == w2.at(i));
    for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1.at(i) == b2.at(i));
}

TEST_CASE("fan-in init for fan 144 has near-zero empirical mean", "[rng][init]") {
    // 10^4 draws at fan_in 144: bound is 1/12, sd of the mean ~ 1/12/sqrt(3e4).
    Tensor w({100, 100});
    Tensor b({1});
    Rng rng(12);
    init_uniform_fan_in(w, b, 144, rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w.at(i);
    mean /= static_cast<double>(w.size());
    CHECK(std::abs(mean) < 0.01);
}
