#pragma once

#include <cstdint>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seamcnn/layers.hpp"
#include "seamcnn/pooling.hpp"

namespace seamcnn {

// Reference architecture:
//   3x32x32 -> conv1(16,3x3,pad1) -> relu -> pool(/2) -> conv2(32,3x3,pad1)
//           -> relu -> flatten(8192) -> fc -> 1 logit
inline constexpr std::size_t kInputChannels = 3;
inline constexpr std::size_t kInputSize = 32;
inline constexpr std::size_t kConv1Channels = 16;
inline constexpr std::size_t kConv2Channels = 32;
inline constexpr std::size_t kPooledSize = kInputSize / 2;
inline constexpr std::size_t kFlatFeatures = kConv2Channels * kPooledSize * kPooledSize;

// Intermediates of one forward pass, exposed for feature-map dumps and
// shape assertions. Conv outputs are pre-activation.
struct ForwardTrace {
    Tensor conv1_out; // 16x32x32
    Tensor pool_out;  // 16x16x16
    Tensor conv2_out; // 32x16x16
    double logit = 0.0;
};

// Two interchangeable variants of the same network; they differ only in the
// pooling layer, and equal seeds give bitwise-identical parameters because
// pooling holds none.
class Model {
public:
    Model(PoolKind pool_kind, std::uint64_t seed)
        : kind_(pool_kind),
          conv1_(kInputChannels, kConv1Channels, 3, 3, 1, 1),
          conv2_(kConv1Channels, kConv2Channels, 3, 3, 1, 1),
          fc_(kFlatFeatures, 1) {
        // Fixed draw order: conv1 weights, conv1 bias, conv2 weights,
        // conv2 bias, fc weights, fc bias.
        Rng rng(seed);
        conv1_.init(rng);
        conv2_.init(rng);
        fc_.init(rng);
    }

    PoolKind pool_kind() const { return kind_; }

    // Returns the logit; layer caches stay valid for one backward() call.
    double forward(const Tensor& image) {
        check_input(image);
        conv1_out_ = conv1_.forward(image);
        Tensor a1 = relu_forward(conv1_out_);
        Tensor pooled = pool_forward(a1);
        conv2_out_ = conv2_.forward(pooled);
        Tensor a2 = relu_forward(conv2_out_);
        Tensor logit = fc_.forward(a2.reshaped({kFlatFeatures}));
        has_cache_ = true;
        return logit.at(0);
    }

    // Accumulates parameter gradients for d(loss)/d(logit) = grad_logit.
    void backward(double grad_logit) {
        if (!has_cache_) throw StateError("model: backward called before forward");
        Tensor g = fc_.backward(Tensor({std::size_t{1}}, {grad_logit}));
        g = g.reshaped({kConv2Channels, kPooledSize, kPooledSize});
        g = relu_backward(g, conv2_out_);
        g = conv2_.backward(g);
        g = pool_backward(g);
        g = relu_backward(g, conv1_out_);
        conv1_.backward(g);
        has_cache_ = false;
    }

    // Mean BCE over the batch, full backward, one SGD step.
    // Returns the pre-step loss.
    double train_step(std::span<const Tensor* const> images, std::span<const int> labels,
                      double lr) {
        if (images.empty() || images.size() != labels.size()) {
            throw ConfigError("train_step: batch images and labels must be non-empty and equal-sized");
        }
        if (lr < 0.0) throw ConfigError("train_step: learning rate must be >= 0");
        const double inv_n = 1.0 / static_cast<double>(images.size());
        double total = 0.0;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const int y = labels[i];
            if (y != 0 && y != 1) throw ConfigError("train_step: labels must be 0 or 1");
            const double z = forward(*images[i]);
            total += sigmoid_bce_loss(z, y);
            backward(sigmoid_bce_grad(z, y) * inv_n);
        }
        auto params = parameters();
        if (lr == 0.0) {
            for (Tensor* p : params) p->zero_grad(); // evaluate-only: discard the batch gradient
        } else {
            sgd_step(params, lr);
        }
        return total * inv_n;
    }

    double train_step(const std::vector<Tensor>& images, const std::vector<int>& labels,
                      double lr) {
        std::vector<const Tensor*> ptrs;
        ptrs.reserve(images.size());
        for (const Tensor& t : images) ptrs.push_back(&t);
        return train_step(std::span<const Tensor* const>(ptrs), std::span<const int>(labels), lr);
    }

    ForwardTrace trace(const Tensor& image) {
        check_input(image);
        ForwardTrace t;
        t.conv1_out = conv1_.forward(image);
        Tensor a1 = relu_forward(t.conv1_out);
        t.pool_out = pool_forward(a1);
        t.conv2_out = conv2_.forward(t.pool_out);
        Tensor a2 = relu_forward(t.conv2_out);
        t.logit = fc_.forward(a2.reshaped({kFlatFeatures})).at(0);
        has_cache_ = true;
        return t;
    }

    // Selection made by the pooling layer in the most recent forward:
    // source indices for seam pooling, argmax indices for max pooling.
    std::vector<std::uint32_t> last_pool_selection() const {
        if (kind_ == PoolKind::seam) return seam_pool_.index_map().flat();
        return max_pool_.argmax();
    }

    std::vector<Tensor*> parameters() {
        return {&conv1_.weight(), &conv1_.bias(), &conv2_.weight(), &conv2_.bias(),
                &fc_.weight(), &fc_.bias()};
    }

    std::vector<std::pair<std::string, Tensor*>> named_parameters() {
        return {{"conv1.weight", &conv1_.weight()}, {"conv1.bias", &conv1_.bias()},
                {"conv2.weight", &conv2_.weight()}, {"conv2.bias", &conv2_.bias()},
                {"fc.weight", &fc_.weight()},       {"fc.bias", &fc_.bias()}};
    }

    std::vector<std::pair<std::string, const Tensor*>> named_parameters() const {
        return {{"conv1.weight", &conv1_.weight()}, {"conv1.bias", &conv1_.bias()},
                {"conv2.weight", &conv2_.weight()}, {"conv2.bias", &conv2_.bias()},
                {"fc.weight", &fc_.weight()},       {"fc.bias", &fc_.bias()}};
    }

    std::size_t param_count() const {
        return conv1_.param_count() + conv2_.param_count() + fc_.param_count();
    }

    // One row per layer: name, output shape, parameter count.
    std::string summary() const {
        std::ostringstream os;
        const std::string pool_row =
            kind_ == PoolKind::seam ? "seam-pool" : "max-pool 2x2";
        os << std::left;
        os << std::setw(28) << "layer" << std::setw(14) << "output shape" << "params\n";
        auto row = [&os](const std::string& name, const std::string& shape, std::size_t n) {
            os << std::setw(28) << name << std::setw(14) << shape << n << "\n";
        };
        row("conv1 (3->16, 3x3, pad 1)", "16x32x32", conv1_.param_count());
        row("relu", "16x32x32", 0);
        row(pool_row, "16x16x16", 0);
        row("conv2 (16->32, 3x3, pad 1)", "32x16x16", conv2_.param_count());
        row("relu", "32x16x16", 0);
        row("flatten", "8192", 0);
        row("fc (8192->1)", "1", fc_.param_count());
        os << "total params: " << param_count() << "\n";
        return os.str();
    }

private:
    void check_input(const Tensor& image) const {
        if (image.rank() != 3 || image.extent(0) != kInputChannels ||
            image.extent(1) != kInputSize || image.extent(2) != kInputSize) {
            throw ShapeError("model expects a 3x32x32 input, got shape " + image.shape_str());
        }
    }

    Tensor pool_forward(const Tensor& x) {
        if (kind_ == PoolKind::seam) return seam_pool_.forward(x);
        return max_pool_.forward(x);
    }

    Tensor pool_backward(const Tensor& g) const {
        if (kind_ == PoolKind::seam) return seam_pool_.backward(g);
        return max_pool_.backward(g);
    }

    PoolKind kind_;
    Conv2d conv1_;
    Conv2d conv2_;
    Linear fc_;
    SeamPool2d seam_pool_;
    MaxPool2d max_pool_{2, 2, 2, 2};
    Tensor conv1_out_; // pre-activation caches for the relu gates
    Tensor conv2_out_;
    bool has_cache_ = false;
};

inline Model build_model(PoolKind pool_kind, std::uint64_t seed) {
    return Model(pool_kind, seed);
}

} // namespace seamcnn
