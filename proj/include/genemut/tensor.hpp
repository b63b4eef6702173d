#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace genemut {

// Dense row-major double tensor. Rank 1 or 2 is all the model needs; rank-1
// tensors serialize as a single row.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, data(rows * cols, fill) {}

    static Tensor vec(std::size_t n, double fill = 0.0) {
        Tensor t;
        t.shape = {n};
        t.data.assign(n, fill);
        return t;
    }
    static Tensor scalar(double v) { return vec(1, v); }
    static Tensor zeros_like(const Tensor& other) {
        Tensor t;
        t.shape = other.shape;
        t.data.assign(other.data.size(), 0.0);
        return t;
    }
    static Tensor identity(std::size_t n) {
        Tensor t(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 0); }

    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    std::string shape_str() const;

    // "TENSOR r c\n" followed by row-major little-endian 64-bit floats.
    void save(std::ostream& os) const;
    static Tensor load(std::istream& is);
    void save_file(const std::string& path) const;
    static Tensor load_file(const std::string& path);
};

// Throws DimensionError unless the shapes match.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace genemut
