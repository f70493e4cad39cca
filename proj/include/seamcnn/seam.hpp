#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "seamcnn/error.hpp"
#include "seamcnn/tensor.hpp"

namespace seamcnn {

// Row-major H x W scalar field.
struct Grid {
    std::size_t h = 0, w = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(std::size_t h_, std::size_t w_) : h(h_), w(w_), v(h_ * w_, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return v[i * w + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * w + j]; }
};

using EnergyMap = Grid;     // per-pixel importance, entries >= 0
using CumulativeMap = Grid; // minimal path totals ending at each cell

enum class SeamAxis { vertical, horizontal };

// Connected edge-to-edge path: one column index per row (vertical) or one
// row index per column (horizontal); adjacent indices differ by at most 1.
struct Seam {
    SeamAxis axis = SeamAxis::vertical;
    std::vector<std::size_t> indices;
};

// Maps each output cell of a carved grid to the source cell it was copied
// from, as linear row-major indices. Composes across repeated removals so a
// fully carved grid still addresses the original coordinates.
class IndexMap {
public:
    IndexMap() = default;
    IndexMap(std::size_t out_h, std::size_t out_w, std::size_t src_h, std::size_t src_w)
        : out_h_(out_h), out_w_(out_w), src_h_(src_h), src_w_(src_w),
          src_(out_h * out_w, 0) {}

    static IndexMap identity(std::size_t h, std::size_t w) {
        IndexMap m(h, w, h, w);
        for (std::uint32_t k = 0; k < m.src_.size(); ++k) m.src_[k] = k;
        return m;
    }

    std::size_t out_h() const { return out_h_; }
    std::size_t out_w() const { return out_w_; }
    std::size_t src_h() const { return src_h_; }
    std::size_t src_w() const { return src_w_; }

    std::uint32_t& at(std::size_t i, std::size_t j) { return src_[i * out_w_ + j]; }
    std::uint32_t at(std::size_t i, std::size_t j) const { return src_[i * out_w_ + j]; }
    const std::vector<std::uint32_t>& flat() const { return src_; }

    std::pair<std::size_t, std::size_t> source(std::size_t i, std::size_t j) const {
        std::uint32_t s = at(i, j);
        return {s / src_w_, s % src_w_};
    }

    bool is_injective() const {
        std::vector<char> seen(src_h_ * src_w_, 0);
        for (std::uint32_t s : src_) {
            if (s >= seen.size() || seen[s]) return false;
            seen[s] = 1;
        }
        return true;
    }

private:
    std::size_t out_h_ = 0, out_w_ = 0, src_h_ = 0, src_w_ = 0;
    std::vector<std::uint32_t> src_;
};

// outer maps mid -> src, step maps out -> mid; the result maps out -> src.
inline IndexMap compose(const IndexMap& outer, const IndexMap& step) {
    if (step.src_h() != outer.out_h() || step.src_w() != outer.out_w()) {
        throw ShapeError("index map composition: step source " +
                         std::to_string(step.src_h()) + "x" + std::to_string(step.src_w()) +
                         " does not match outer output " +
                         std::to_string(outer.out_h()) + "x" + std::to_string(outer.out_w()));
    }
    IndexMap m(step.out_h(), step.out_w(), outer.src_h(), outer.src_w());
    for (std::size_t i = 0; i < step.out_h(); ++i) {
        for (std::size_t j = 0; j < step.out_w(); ++j) {
            m.at(i, j) = outer.flat()[step.at(i, j)];
        }
    }
    return m;
}

// Channel-summed L1 gradient magnitude with forward differences; the last
// row/column replicates its neighbor, so the border difference is 0 along
// that axis. One shared map for all channels keeps them spatially aligned.
inline EnergyMap energy_map(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("energy_map expects a CxHxW tensor, got shape " + x.shape_str());
    }
    const std::size_t c_n = x.extent(0), h = x.extent(1), w = x.extent(2);
    EnergyMap e(h, w);
    const double* p = x.data();
    for (std::size_t c = 0; c < c_n; ++c) {
        const double* plane = p + c * h * w;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const double v = plane[i * w + j];
                double g = 0.0;
                if (i + 1 < h) g += std::abs(plane[(i + 1) * w + j] - v);
                if (j + 1 < w) g += std::abs(plane[i * w + j + 1] - v);
                e.v[i * w + j] += g;
            }
        }
    }
    return e;
}

namespace detail {

inline Grid transposed(const Grid& g) {
    Grid t(g.w, g.h);
    for (std::size_t i = 0; i < g.h; ++i)
        for (std::size_t j = 0; j < g.w; ++j) t.at(j, i) = g.at(i, j);
    return t;
}

inline CumulativeMap cumulative_energy_vertical(const EnergyMap& e) {
    CumulativeMap m(e.h, e.w);
    for (std::size_t j = 0; j < e.w; ++j) m.at(0, j) = e.at(0, j);
    for (std::size_t i = 1; i < e.h; ++i) {
        for (std::size_t j = 0; j < e.w; ++j) {
            double best = m.at(i - 1, j);
            if (j > 0 && m.at(i - 1, j - 1) < best) best = m.at(i - 1, j - 1);
            if (j + 1 < e.w && m.at(i - 1, j + 1) < best) best = m.at(i - 1, j + 1);
            m.at(i, j) = e.at(i, j) + best;
        }
    }
    return m;
}

// Backtracks from the last-row argmin; ties resolve to the smallest index
// at the argmin and at every predecessor choice.
inline std::vector<std::size_t> backtrack_vertical(const CumulativeMap& m) {
    std::vector<std::size_t> cols(m.h);
    std::size_t j = 0;
    for (std::size_t k = 1; k < m.w; ++k) {
        if (m.at(m.h - 1, k) < m.at(m.h - 1, j)) j = k;
    }
    cols[m.h - 1] = j;
    for (std::size_t i = m.h - 1; i > 0; --i) {
        const std::size_t lo = (j > 0) ? j - 1 : 0;
        const std::size_t hi = (j + 1 < m.w) ? j + 1 : m.w - 1;
        std::size_t best = lo;
        for (std::size_t k = lo + 1; k <= hi; ++k) {
            if (m.at(i - 1, k) < m.at(i - 1, best)) best = k;
        }
        j = best;
        cols[i - 1] = j;
    }
    return cols;
}

} // namespace detail

inline CumulativeMap cumulative_energy(const EnergyMap& e, SeamAxis axis) {
    if (e.h == 0 || e.w == 0) throw ShapeError("cumulative_energy: empty energy map");
    if (axis == SeamAxis::vertical) return detail::cumulative_energy_vertical(e);
    return detail::transposed(detail::cumulative_energy_vertical(detail::transposed(e)));
}

inline Seam extract_min_seam(const CumulativeMap& m, SeamAxis axis) {
    if (m.h == 0 || m.w == 0) throw ShapeError("extract_min_seam: empty cumulative map");
    Seam s;
    s.axis = axis;
    if (axis == SeamAxis::vertical) {
        s.indices = detail::backtrack_vertical(m);
    } else {
        s.indices = detail::backtrack_vertical(detail::transposed(m));
    }
    return s;
}

// Sum of energies along a seam.
inline double seam_energy(const EnergyMap& e, const Seam& s) {
    double total = 0.0;
    if (s.axis == SeamAxis::vertical) {
        for (std::size_t i = 0; i < s.indices.size(); ++i) total += e.at(i, s.indices[i]);
    } else {
        for (std::size_t j = 0; j < s.indices.size(); ++j) total += e.at(s.indices[j], j);
    }
    return total;
}

namespace detail {

inline void validate_seam(const Tensor& x, const Seam& seam) {
    const std::size_t h = x.extent(1), w = x.extent(2);
    const std::size_t expect = (seam.axis == SeamAxis::vertical) ? h : w;
    const std::size_t bound = (seam.axis == SeamAxis::vertical) ? w : h;
    if (seam.indices.size() != expect) {
        throw ShapeError("seam length " + std::to_string(seam.indices.size()) +
                         " does not match tensor shape " + x.shape_str());
    }
    for (std::size_t k = 0; k < seam.indices.size(); ++k) {
        if (seam.indices[k] >= bound) throw ShapeError("seam index out of bounds");
        if (k > 0) {
            const std::size_t a = seam.indices[k - 1], b = seam.indices[k];
            if ((a > b ? a - b : b - a) > 1) throw ShapeError("seam is not connected");
        }
    }
}

} // namespace detail

// Removes one seam from every channel. Retained entries are copied, never
// arithmetically altered; the returned map records each survivor's source.
inline std::pair<Tensor, IndexMap> remove_seam(const Tensor& x, const Seam& seam) {
    if (x.rank() != 3) {
        throw ShapeError("remove_seam expects a CxHxW tensor, got shape " + x.shape_str());
    }
    const std::size_t c_n = x.extent(0), h = x.extent(1), w = x.extent(2);
    detail::validate_seam(x, seam);

    if (seam.axis == SeamAxis::vertical) {
        if (w < 2) throw ShapeError("cannot remove a vertical seam from a width-1 grid");
        Tensor out({c_n, h, w - 1});
        IndexMap map(h, w - 1, h, w);
        for (std::size_t i = 0; i < h; ++i) {
            const std::size_t cut = seam.indices[i];
            for (std::size_t j = 0; j < w - 1; ++j) {
                map.at(i, j) = static_cast<std::uint32_t>(i * w + (j < cut ? j : j + 1));
            }
        }
        for (std::size_t c = 0; c < c_n; ++c) {
            const double* src = x.data() + c * h * w;
            double* dst = out.data() + c * h * (w - 1);
            for (std::size_t i = 0; i < h; ++i) {
                const std::size_t cut = seam.indices[i];
                for (std::size_t j = 0; j < cut; ++j) dst[i * (w - 1) + j] = src[i * w + j];
                for (std::size_t j = cut; j < w - 1; ++j) dst[i * (w - 1) + j] = src[i * w + j + 1];
            }
        }
        return {std::move(out), std::move(map)};
    }

    if (h < 2) throw ShapeError("cannot remove a horizontal seam from a height-1 grid");
    Tensor out({c_n, h - 1, w});
    IndexMap map(h - 1, w, h, w);
    for (std::size_t j = 0; j < w; ++j) {
        const std::size_t cut = seam.indices[j];
        for (std::size_t i = 0; i < h - 1; ++i) {
            map.at(i, j) = static_cast<std::uint32_t>((i < cut ? i : i + 1) * w + j);
        }
    }
    for (std::size_t c = 0; c < c_n; ++c) {
        const double* src = x.data() + c * h * w;
        double* dst = out.data() + c * (h - 1) * w;
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t cut = seam.indices[j];
            for (std::size_t i = 0; i < cut; ++i) dst[i * w + j] = src[i * w + j];
            for (std::size_t i = cut; i < h - 1; ++i) dst[i * w + j] = src[(i + 1) * w + j];
        }
    }
    return {std::move(out), std::move(map)};
}

struct CarveResult {
    Tensor tensor;
    IndexMap map;                      // output cell -> original input cell
    std::vector<double> seam_energies; // removed-seam totals, in removal order
};

// Iterated removal: k_vertical vertical seams first, then k_horizontal
// horizontal ones. The energy map is recomputed from the current tensor
// before every extraction.
inline CarveResult carve(const Tensor& x, std::size_t k_vertical, std::size_t k_horizontal) {
    if (x.rank() != 3) {
        throw ShapeError("carve expects a CxHxW tensor, got shape " + x.shape_str());
    }
    const std::size_t h = x.extent(1), w = x.extent(2);
    if (k_vertical >= w) {
        throw ShapeError("cannot carve " + std::to_string(k_vertical) +
                         " vertical seams from width " + std::to_string(w));
    }
    if (k_horizontal >= h) {
        throw ShapeError("cannot carve " + std::to_string(k_horizontal) +
                         " horizontal seams from height " + std::to_string(h));
    }

    CarveResult r{x, IndexMap::identity(h, w), {}};
    r.seam_energies.reserve(k_vertical + k_horizontal);
    for (std::size_t step = 0; step < k_vertical + k_horizontal; ++step) {
        const SeamAxis axis = (step < k_vertical) ? SeamAxis::vertical : SeamAxis::horizontal;
        const EnergyMap e = energy_map(r.tensor);
        const CumulativeMap m = cumulative_energy(e, axis);
        const Seam s = extract_min_seam(m, axis);
        r.seam_energies.push_back(seam_energy(e, s));
        auto [next, step_map] = remove_seam(r.tensor, s);
        r.tensor = std::move(next);
        r.map = compose(r.map, step_map);
    }
    return r;
}

} // namespace seamcnn
