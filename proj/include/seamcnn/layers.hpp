#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seamcnn/error.hpp"
#include "seamcnn/rng.hpp"
#include "seamcnn/tensor.hpp"

namespace seamcnn {

// Weights and bias drawn uniform on (-1/sqrt(fan_in), +1/sqrt(fan_in)),
// weights first. Callers fix the cross-layer draw order.
inline void init_uniform_fan_in(Tensor& weight, Tensor& bias, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < weight.size(); ++i) weight.at(i) = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < bias.size(); ++i) bias.at(i) = rng.uniform(-bound, bound);
}

// 2d convolution over CxHxW, stride 1, zero padding. Forward lowers the
// input to an im2col patch matrix; backward reuses the cached patches, so
// the gradient is the exact transpose of the forward linear map.
class Conv2d {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels,
           std::size_t kernel_h, std::size_t kernel_w,
           std::size_t pad_h, std::size_t pad_w)
        : in_c_(in_channels), out_c_(out_channels),
          kh_(kernel_h), kw_(kernel_w), ph_(pad_h), pw_(pad_w),
          weight_({out_channels, in_channels, kernel_h, kernel_w}),
          bias_({out_channels}) {
        if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
            throw ConfigError("conv kernel extents must be odd, got " +
                              std::to_string(kernel_h) + "x" + std::to_string(kernel_w));
        }
    }

    void init(Rng& rng) { init_uniform_fan_in(weight_, bias_, in_c_ * kh_ * kw_, rng); }

    Tensor forward(const Tensor& x) {
        if (x.rank() != 3 || x.extent(0) != in_c_) {
            throw ShapeError("conv2d: input shape " + x.shape_str() + " does not match layer taking " +
                             std::to_string(in_c_) + " channels");
        }
        const std::size_t h = x.extent(1), w = x.extent(2);
        const std::size_t oh = h + 2 * ph_ - kh_ + 1, ow = w + 2 * pw_ - kw_ + 1;
        const std::size_t k = in_c_ * kh_ * kw_, n = oh * ow;

        fill_im2col(x, oh, ow);
        cached_h_ = h;
        cached_w_ = w;
        has_cache_ = true;

        Tensor out({out_c_, oh, ow});
        double* o = out.data();
        const double* wt = weight_.data();
        for (std::size_t oc = 0; oc < out_c_; ++oc) {
            double* row = o + oc * n;
            std::fill(row, row + n, bias_.at(oc));
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double wv = wt[oc * k + kk];
                const double* col = col_.data() + kk * n;
                for (std::size_t p = 0; p < n; ++p) row[p] += wv * col[p];
            }
        }
        return out;
    }

    // Accumulates weight/bias gradients, returns the input gradient.
    Tensor backward(const Tensor& grad_out) {
        if (!has_cache_) throw StateError("conv2d: backward called before forward");
        const std::size_t h = cached_h_, w = cached_w_;
        const std::size_t oh = h + 2 * ph_ - kh_ + 1, ow = w + 2 * pw_ - kw_ + 1;
        if (grad_out.rank() != 3 || grad_out.extent(0) != out_c_ ||
            grad_out.extent(1) != oh || grad_out.extent(2) != ow) {
            throw ShapeError("conv2d: grad shape " + grad_out.shape_str() +
                             " does not match forward output " +
                             Tensor::shape_string({out_c_, oh, ow}));
        }
        const std::size_t k = in_c_ * kh_ * kw_, n = oh * ow;
        const double* g = grad_out.data();

        double* wg = weight_.grad();
        double* bg = bias_.grad();
        for (std::size_t oc = 0; oc < out_c_; ++oc) {
            const double* grow = g + oc * n;
            double bsum = 0.0;
            for (std::size_t p = 0; p < n; ++p) bsum += grow[p];
            bg[oc] += bsum;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double* col = col_.data() + kk * n;
                double s = 0.0;
                for (std::size_t p = 0; p < n; ++p) s += grow[p] * col[p];
                wg[oc * k + kk] += s;
            }
        }

        // grad wrt patches, then scatter back through the padding (col2im).
        std::vector<double> gcol(k * n, 0.0);
        const double* wt = weight_.data();
        for (std::size_t oc = 0; oc < out_c_; ++oc) {
            const double* grow = g + oc * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double wv = wt[oc * k + kk];
                double* gc = gcol.data() + kk * n;
                for (std::size_t p = 0; p < n; ++p) gc[p] += wv * grow[p];
            }
        }

        Tensor grad_x({in_c_, h, w});
        double* gx = grad_x.data();
        for (std::size_t c = 0; c < in_c_; ++c) {
            for (std::size_t u = 0; u < kh_; ++u) {
                for (std::size_t v = 0; v < kw_; ++v) {
                    const double* gc = gcol.data() + ((c * kh_ + u) * kw_ + v) * n;
                    for (std::size_t oi = 0; oi < oh; ++oi) {
                        const long si = static_cast<long>(oi + u) - static_cast<long>(ph_);
                        if (si < 0 || si >= static_cast<long>(h)) continue;
                        for (std::size_t oj = 0; oj < ow; ++oj) {
                            const long sj = static_cast<long>(oj + v) - static_cast<long>(pw_);
                            if (sj < 0 || sj >= static_cast<long>(w)) continue;
                            gx[(c * h + si) * w + sj] += gc[oi * ow + oj];
                        }
                    }
                }
            }
        }
        return grad_x;
    }

    Tensor& weight() { return weight_; }
    const Tensor& weight() const { return weight_; }
    Tensor& bias() { return bias_; }
    const Tensor& bias() const { return bias_; }
    std::size_t in_channels() const { return in_c_; }
    std::size_t out_channels() const { return out_c_; }
    std::size_t param_count() const { return weight_.size() + bias_.size(); }

private:
    void fill_im2col(const Tensor& x, std::size_t oh, std::size_t ow) {
        const std::size_t h = x.extent(1), w = x.extent(2), n = oh * ow;
        col_.assign(in_c_ * kh_ * kw_ * n, 0.0);
        const double* p = x.data();
        for (std::size_t c = 0; c < in_c_; ++c) {
            const double* plane = p + c * h * w;
            for (std::size_t u = 0; u < kh_; ++u) {
                for (std::size_t v = 0; v < kw_; ++v) {
                    double* col = col_.data() + ((c * kh_ + u) * kw_ + v) * n;
                    for (std::size_t oi = 0; oi < oh; ++oi) {
                        const long si = static_cast<long>(oi + u) - static_cast<long>(ph_);
                        if (si < 0 || si >= static_cast<long>(h)) continue;
                        for (std::size_t oj = 0; oj < ow; ++oj) {
                            const long sj = static_cast<long>(oj + v) - static_cast<long>(pw_);
                            if (sj < 0 || sj >= static_cast<long>(w)) continue;
                            col[oi * ow + oj] = plane[si * w + sj];
                        }
                    }
                }
            }
        }
    }

    std::size_t in_c_, out_c_, kh_, kw_, ph_, pw_;
    Tensor weight_; // out_c x in_c x kh x kw
    Tensor bias_;   // out_c
    std::vector<double> col_;
    std::size_t cached_h_ = 0, cached_w_ = 0;
    bool has_cache_ = false;
};

// Fully connected y = Wx + b over a flat input.
class Linear {
public:
    Linear(std::size_t in_features, std::size_t out_features)
        : in_f_(in_features), out_f_(out_features),
          weight_({out_features, in_features}), bias_({out_features}) {}

    void init(Rng& rng) { init_uniform_fan_in(weight_, bias_, in_f_, rng); }

    Tensor forward(const Tensor& x) {
        if (x.size() != in_f_) {
            throw ShapeError("linear: input length " + std::to_string(x.size()) +
                             " does not match in_features " + std::to_string(in_f_));
        }
        input_cache_.assign(x.data(), x.data() + x.size());
        has_cache_ = true;
        Tensor out({out_f_});
        const double* wt = weight_.data();
        for (std::size_t o = 0; o < out_f_; ++o) {
            double s = bias_.at(o);
            const double* row = wt + o * in_f_;
            for (std::size_t i = 0; i < in_f_; ++i) s += row[i] * input_cache_[i];
            out.at(o) = s;
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) {
        if (!has_cache_) throw StateError("linear: backward called before forward");
        if (grad_out.size() != out_f_) {
            throw ShapeError("linear: grad length " + std::to_string(grad_out.size()) +
                             " does not match out_features " + std::to_string(out_f_));
        }
        double* wg = weight_.grad();
        double* bg = bias_.grad();
        Tensor grad_x({in_f_});
        double* gx = grad_x.data();
        const double* wt = weight_.data();
        for (std::size_t o = 0; o < out_f_; ++o) {
            const double g = grad_out.at(o);
            bg[o] += g;
            double* wrow = wg + o * in_f_;
            const double* row = wt + o * in_f_;
            for (std::size_t i = 0; i < in_f_; ++i) {
                wrow[i] += g * input_cache_[i];
                gx[i] += row[i] * g;
            }
        }
        return grad_x;
    }

    Tensor& weight() { return weight_; }
    const Tensor& weight() const { return weight_; }
    Tensor& bias() { return bias_; }
    const Tensor& bias() const { return bias_; }
    std::size_t in_features() const { return in_f_; }
    std::size_t out_features() const { return out_f_; }
    std::size_t param_count() const { return weight_.size() + bias_.size(); }

private:
    std::size_t in_f_, out_f_;
    Tensor weight_; // out_f x in_f
    Tensor bias_;   // out_f
    std::vector<double> input_cache_;
    bool has_cache_ = false;
};

inline Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.at(i) = x.at(i) > 0.0 ? x.at(i) : 0.0;
    return out;
}

// Gradient passes only where the forward input was strictly positive;
// the subgradient at exactly 0 is 0.
inline Tensor relu_backward(const Tensor& grad_out, const Tensor& forward_input) {
    if (!grad_out.same_shape(forward_input)) {
        throw ShapeError("relu: grad shape " + grad_out.shape_str() +
                         " does not match input shape " + forward_input.shape_str());
    }
    Tensor grad_x(forward_input.shape());
    for (std::size_t i = 0; i < grad_x.size(); ++i) {
        grad_x.at(i) = forward_input.at(i) > 0.0 ? grad_out.at(i) : 0.0;
    }
    return grad_x;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Fused sigmoid + binary cross entropy:
//   loss = max(z,0) - z*y + log(1 + exp(-|z|))
// which never overflows for finite logits.
inline double sigmoid_bce_loss(double logit, int label) {
    const double z = logit;
    const double zy = z * static_cast<double>(label);
    return (z > 0.0 ? z : 0.0) - zy + std::log1p(std::exp(-std::abs(z)));
}

// d(loss)/d(logit) = sigmoid(logit) - label.
inline double sigmoid_bce_grad(double logit, int label) {
    return sigmoid(logit) - static_cast<double>(label);
}

// p <- p - lr * grad(p) for every parameter, then gradients reset to zero.
inline void sgd_step(std::span<Tensor* const> params, double lr) {
    if (!(lr > 0.0)) throw ConfigError("sgd: learning rate must be positive");
    for (Tensor* t : params) {
        double* p = t->data();
        double* g = t->grad();
        for (std::size_t i = 0; i < t->size(); ++i) p[i] -= lr * g[i];
        t->zero_grad();
    }
}

} // namespace seamcnn
