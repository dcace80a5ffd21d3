#include "hscr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hscr/common.hpp"
#include "hscr/rng.hpp"

namespace hscr {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        require(d > 0, "tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    const int64_t n = shape_numel(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t;
    t.data.assign(1, value);
    return t;
}

Tensor Tensor::from_vector(std::vector<double> values) {
    Tensor t;
    t.shape = {static_cast<int64_t>(values.size())};
    t.data = std::move(values);
    return t;
}

Tensor Tensor::from_matrix(int64_t rows, int64_t cols, std::vector<double> values) {
    require(rows * cols == static_cast<int64_t>(values.size()),
            "from_matrix: size mismatch");
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
}

double Tensor::value() const {
    require(is_scalar(), "value() requires a scalar tensor");
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double logsumexp(const double* values, int64_t n) {
    double m = values[0];
    for (int64_t i = 1; i < n; ++i) m = std::max(m, values[i]);
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += std::exp(values[i] - m);
    return m + std::log(s);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    require(!logits.empty(), "softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        s += out[i];
    }
    for (double& v : out) v /= s;
    return out;
}

Tensor softmax(const Tensor& logits) {
    require(logits.numel() > 0, "softmax: empty input");
    Tensor out = logits;
    out.requires_grad = false;
    out.grad.clear();
    out.data = softmax(logits.data);
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    // -softplus(-x) = min(x, 0) - log1p(exp(-|x|))
    return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k, Rng& rng) {
    require(k >= 0 && k <= n, "sample_without_replacement: k out of range");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < k; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace hscr
