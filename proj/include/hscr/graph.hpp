#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "hscr/tensor.hpp"

namespace hscr {

// Row-wise boolean mask for attention; allowed(r, c) gates column c in row r.
struct AttnMask {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<uint8_t> allowed;

    static AttnMask all_allowed(int64_t rows, int64_t cols);
    static AttnMask causal(int64_t n);
    bool at(int64_t r, int64_t c) const {
        return allowed[static_cast<size_t>(r * cols + c)] != 0;
    }
    void set(int64_t r, int64_t c, bool v) {
        allowed[static_cast<size_t>(r * cols + c)] = v ? 1 : 0;
    }
};

// Reverse-mode tape over dense tensors. Nodes are appended in topological
// order; values are computed eagerly on construction. backward() makes one
// reverse sweep, visiting each node exactly once, and accumulates gradients
// into the external tensors bound via leaf(Tensor&).
class Graph {
public:
    using Id = int32_t;

    // Leaves. The non-const overload binds an external tensor and, when
    // t.requires_grad, accumulates into t.grad on backward. The const
    // overload is for frozen parameters and inputs; no gradient ever flows.
    Id leaf(Tensor& t);
    Id leaf(const Tensor& t);
    Id constant(Tensor t);  // owned constant (e.g. freshly computed features)

    Id matmul(Id a, Id b);     // (m,k)x(k,n) -> (m,n)
    Id matmul_nt(Id a, Id b);  // (m,k)x(n,k)^T -> (m,n)
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id add_n(const std::vector<Id>& terms);
    Id scale(Id a, double c);
    Id add_const(Id a, double c);
    Id gelu(Id a);
    Id masked_softmax(Id scores, std::shared_ptr<const AttnMask> mask);
    Id log_softmax_rows(Id a);
    Id gather_rows(Id table, std::vector<int64_t> indices);
    Id slice_rows(Id a, int64_t start, int64_t count);
    Id concat_rows(Id a, Id b);
    Id replace_rows(Id a, std::vector<int64_t> rows, Tensor row_value);
    // Scalar = sum of a[r, c] over the given entries (duplicates accumulate).
    Id pick_sum(Id a, std::vector<std::pair<int64_t, int64_t>> entries);
    Id log_sigmoid(Id a);  // elementwise
    Id neg(Id a) { return scale(a, -1.0); }

    const Tensor& value(Id id) const;
    double scalar_value(Id id) const { return value(id).value(); }
    bool needs_grad(Id id) const { return node(id).needs_grad; }

    // Populates grad buffers of all requires_grad leaves reachable from root.
    // root must be a scalar. Repeated calls accumulate.
    void backward(Id root);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;                       // owned value (unused when ext set)
        const Tensor* ext = nullptr;      // external value (leaf)
        Tensor* ext_grad = nullptr;       // external grad sink (trainable leaf)
        std::vector<Id> inputs;
        bool needs_grad = false;
        std::vector<double> grad;         // allocated during backward
        std::function<void(Graph&, const Node&)> back;
    };

    const Node& node(Id id) const { return nodes_[static_cast<size_t>(id)]; }
    Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }
    const Tensor& val(Id id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        return n.ext ? *n.ext : n.val;
    }
    std::vector<double>& grad_buffer(Id id);
    void add_grad(Id id, const std::vector<double>& g);
    Id push(Node n);
    bool any_needs_grad(const std::vector<Id>& ids) const;

    std::vector<Node> nodes_;
};

}  // namespace hscr
