#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "seamcnn/error.hpp"

namespace seamcnn {

// Dense rank-1..4 array of f64 in row-major order, with a paired same-shape
// gradient buffer (zero until a backward pass writes it).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), 0.0), grad_(data_.size(), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)), grad_(data_.size(), 0.0) {
        if (checked_size(shape_) != data_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        }
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* grad() { return grad_.data(); }
    const double* grad() const { return grad_.data(); }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    double& grad_at(std::size_t i) { return grad_[i]; }
    double& grad_at(std::size_t i, std::size_t j) { return grad_[i * shape_[1] + j]; }
    double& grad_at(std::size_t i, std::size_t j, std::size_t k) {
        return grad_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& grad_at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return grad_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

    // Same data, new shape; the gradient buffer restarts at zero.
    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        Tensor t(std::move(new_shape), data_);
        return t;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::string s;
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += 'x';
            s += std::to_string(shape[i]);
        }
        return s.empty() ? "scalar" : s;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty() || shape.size() > 4) {
            throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
        }
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e < 1) throw ShapeError("tensor extent must be >= 1 in shape " + shape_string(shape));
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

} // namespace seamcnn
