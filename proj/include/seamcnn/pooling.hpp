#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seamcnn/error.hpp"
#include "seamcnn/seam.hpp"
#include "seamcnn/tensor.hpp"

namespace seamcnn {

enum class PoolKind { seam, max };

inline const char* pool_kind_name(PoolKind k) {
    return k == PoolKind::seam ? "seam" : "max";
}

inline PoolKind pool_kind_from(const std::string& s) {
    if (s == "seam") return PoolKind::seam;
    if (s == "max") return PoolKind::max;
    throw ConfigError("unknown pool kind '" + s + "' (expected seam or max)");
}

struct PoolSpec {
    PoolKind kind = PoolKind::max;
    std::size_t kernel_h = 2, kernel_w = 2; // meaningful for max only
    std::size_t stride_h = 2, stride_w = 2;
};

// Seam-carving pooling: halves H and W by carving W/2 vertical then H/2
// horizontal seams. Backward treats the seam selection as fixed and routes
// each output gradient to its recorded source cell (straight-through
// gather adjoint); carved-away positions receive exactly 0.
class SeamPool2d {
public:
    Tensor forward(const Tensor& x) {
        if (x.rank() != 3) {
            throw ShapeError("seam pool expects a CxHxW tensor, got shape " + x.shape_str());
        }
        const std::size_t h = x.extent(1), w = x.extent(2);
        if (h % 2 != 0 || w % 2 != 0) {
            throw ShapeError("seam pool requires even H and W (got " + x.shape_str() +
                             "); pad or crop the input first");
        }
        CarveResult r = carve(x, w / 2, h / 2);
        map_ = std::move(r.map);
        in_c_ = x.extent(0);
        has_cache_ = true;
        return std::move(r.tensor);
    }

    Tensor backward(const Tensor& grad_out) const {
        if (!has_cache_) throw StateError("seam pool: backward called before forward");
        if (grad_out.rank() != 3 || grad_out.extent(0) != in_c_ ||
            grad_out.extent(1) != map_.out_h() || grad_out.extent(2) != map_.out_w()) {
            throw StateError("seam pool: grad shape " + grad_out.shape_str() +
                             " does not match cached forward output " +
                             Tensor::shape_string({in_c_, map_.out_h(), map_.out_w()}));
        }
        const std::size_t ih = map_.src_h(), iw = map_.src_w();
        const std::size_t on = map_.out_h() * map_.out_w();
        Tensor grad_in({in_c_, ih, iw});
        for (std::size_t c = 0; c < in_c_; ++c) {
            const double* g = grad_out.data() + c * on;
            double* gi = grad_in.data() + c * ih * iw;
            for (std::size_t p = 0; p < on; ++p) gi[map_.flat()[p]] = g[p];
        }
        return grad_in;
    }

    const IndexMap& index_map() const { return map_; }
    bool has_cache() const { return has_cache_; }

private:
    IndexMap map_; // composed over all removals, shared across channels
    std::size_t in_c_ = 0;
    bool has_cache_ = false;
};

// Max pooling with non-overlapping exact tiling. Each window contributes
// its maximum; ties resolve to the first position in row-major window scan.
class MaxPool2d {
public:
    explicit MaxPool2d(std::size_t kernel_h = 2, std::size_t kernel_w = 2,
                       std::size_t stride_h = 2, std::size_t stride_w = 2)
        : kh_(kernel_h), kw_(kernel_w), sh_(stride_h), sw_(stride_w) {
        if (kh_ < 1 || kw_ < 1 || sh_ < 1 || sw_ < 1) {
            throw ConfigError("max pool kernel and stride must be >= 1");
        }
    }

    Tensor forward(const Tensor& x) {
        if (x.rank() != 3) {
            throw ShapeError("max pool expects a CxHxW tensor, got shape " + x.shape_str());
        }
        const std::size_t c_n = x.extent(0), h = x.extent(1), w = x.extent(2);
        if (h < kh_ || w < kw_ || (h - kh_) % sh_ != 0 || (w - kw_) % sw_ != 0) {
            throw ShapeError("max pool window " + std::to_string(kh_) + "x" + std::to_string(kw_) +
                             " stride " + std::to_string(sh_) + "x" + std::to_string(sw_) +
                             " does not tile input " + x.shape_str());
        }
        const std::size_t oh = (h - kh_) / sh_ + 1, ow = (w - kw_) / sw_ + 1;
        in_c_ = c_n;
        in_h_ = h;
        in_w_ = w;
        out_h_ = oh;
        out_w_ = ow;
        argmax_.assign(c_n * oh * ow, 0);
        has_cache_ = true;

        Tensor out({c_n, oh, ow});
        for (std::size_t c = 0; c < c_n; ++c) {
            const double* plane = x.data() + c * h * w;
            double* o = out.data() + c * oh * ow;
            std::uint32_t* am = argmax_.data() + c * oh * ow;
            for (std::size_t oi = 0; oi < oh; ++oi) {
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    std::size_t best = (oi * sh_) * w + oj * sw_;
                    double bv = plane[best];
                    for (std::size_t u = 0; u < kh_; ++u) {
                        for (std::size_t v = 0; v < kw_; ++v) {
                            const std::size_t idx = (oi * sh_ + u) * w + oj * sw_ + v;
                            if (plane[idx] > bv) {
                                bv = plane[idx];
                                best = idx;
                            }
                        }
                    }
                    o[oi * ow + oj] = bv;
                    am[oi * ow + oj] = static_cast<std::uint32_t>(best);
                }
            }
        }
        return out;
    }

    // Gradient routed only to argmax positions; all others stay zero.
    Tensor backward(const Tensor& grad_out) const {
        if (!has_cache_) throw StateError("max pool: backward called before forward");
        if (grad_out.rank() != 3 || grad_out.extent(0) != in_c_ ||
            grad_out.extent(1) != out_h_ || grad_out.extent(2) != out_w_) {
            throw StateError("max pool: grad shape " + grad_out.shape_str() +
                             " does not match cached forward output " +
                             Tensor::shape_string({in_c_, out_h_, out_w_}));
        }
        const std::size_t on = out_h_ * out_w_;
        Tensor grad_in({in_c_, in_h_, in_w_});
        for (std::size_t c = 0; c < in_c_; ++c) {
            const double* g = grad_out.data() + c * on;
            double* gi = grad_in.data() + c * in_h_ * in_w_;
            const std::uint32_t* am = argmax_.data() + c * on;
            for (std::size_t p = 0; p < on; ++p) gi[am[p]] += g[p];
        }
        return grad_in;
    }

    const std::vector<std::uint32_t>& argmax() const { return argmax_; }
    bool has_cache() const { return has_cache_; }

private:
    std::size_t kh_, kw_, sh_, sw_;
    std::vector<std::uint32_t> argmax_; // per channel, linear index into HxW
    std::size_t in_c_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
    bool has_cache_ = false;
};

} // namespace seamcnn
