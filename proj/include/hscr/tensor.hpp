#pragma once

#include <cstdint>
#include <vector>

namespace hscr {

// Dense row-major tensor of 64-bit floats. Rank 0 (empty shape) is a scalar.
// The gradient buffer, when allocated, always matches the data size.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;

    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor from_vector(std::vector<double> values);  // rank 1
    static Tensor from_matrix(int64_t rows, int64_t cols, std::vector<double> values);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
    int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return data.size() == 1; }
    double value() const;  // scalar access, throws on non-scalar

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    void ensure_grad();  // allocate zero grad buffer if absent
    void zero_grad();
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Stable softmax of a rank-1 tensor (max-subtraction). Empty input is a
// domain error.
Tensor softmax(const Tensor& logits);
std::vector<double> softmax(const std::vector<double>& logits);

// log(sigmoid(x)) through -softplus(-x); finite for |x| <= 700.
double log_sigmoid(double x);
double sigmoid(double x);

double logsumexp(const double* values, int64_t n);

}  // namespace hscr
