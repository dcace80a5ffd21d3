#include "hscr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hscr/common.hpp"

namespace hscr {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_deriv(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace

AttnMask AttnMask::all_allowed(int64_t rows, int64_t cols) {
    AttnMask m;
    m.rows = rows;
    m.cols = cols;
    m.allowed.assign(static_cast<size_t>(rows * cols), 1);
    return m;
}

AttnMask AttnMask::causal(int64_t n) {
    AttnMask m;
    m.rows = n;
    m.cols = n;
    m.allowed.assign(static_cast<size_t>(n * n), 0);
    for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c <= r; ++c) m.set(r, c, true);
    return m;
}

Graph::Id Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

bool Graph::any_needs_grad(const std::vector<Id>& ids) const {
    for (Id id : ids)
        if (node(id).needs_grad) return true;
    return false;
}

const Tensor& Graph::value(Id id) const { return val(id); }

std::vector<double>& Graph::grad_buffer(Id id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(val(id).data.size(), 0.0);
    return n.grad;
}

void Graph::add_grad(Id id, const std::vector<double>& g) {
    std::vector<double>& dst = grad_buffer(id);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

Graph::Id Graph::leaf(Tensor& t) {
    Node n;
    n.ext = &t;
    n.needs_grad = t.requires_grad;
    if (t.requires_grad) {
        t.ensure_grad();
        n.ext_grad = &t;
    }
    return push(std::move(n));
}

Graph::Id Graph::leaf(const Tensor& t) {
    Node n;
    n.ext = &t;
    return push(std::move(n));
}

Graph::Id Graph::constant(Tensor t) {
    Node n;
    n.val = std::move(t);
    return push(std::move(n));
}

Graph::Id Graph::matmul(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.cols() == tb.rows(),
            "matmul: shape mismatch");
    const int64_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Node out;
    out.val = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const double aip = ta.at(i, p);
            if (aip == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) out.val.at(i, j) += aip * tb.at(p, j);
        }
    }
    out.inputs = {a, b};
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        out.back = [m, k, n](Graph& g, const Node& self) {
            const Id a = self.inputs[0], b = self.inputs[1];
            const Tensor& ta = g.val(a);
            const Tensor& tb = g.val(b);
            if (g.node(a).needs_grad) {
                std::vector<double>& da = g.grad_buffer(a);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const double go = self.grad[static_cast<size_t>(i * n + j)];
                        if (go == 0.0) continue;
                        for (int64_t p = 0; p < k; ++p)
                            da[static_cast<size_t>(i * k + p)] += go * tb.at(p, j);
                    }
            }
            if (g.node(b).needs_grad) {
                std::vector<double>& db = g.grad_buffer(b);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t p = 0; p < k; ++p) {
                        const double aip = ta.at(i, p);
                        if (aip == 0.0) continue;
                        for (int64_t j = 0; j < n; ++j)
                            db[static_cast<size_t>(p * n + j)] +=
                                aip * self.grad[static_cast<size_t>(i * n + j)];
                    }
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::matmul_nt(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.cols() == tb.cols(),
            "matmul_nt: shape mismatch");
    const int64_t m = ta.rows(), k = ta.cols(), n = tb.rows();
    Node out;
    out.val = Tensor::zeros({m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int64_t p = 0; p < k; ++p) s += ta.at(i, p) * tb.at(j, p);
            out.val.at(i, j) = s;
        }
    out.inputs = {a, b};
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        out.back = [m, k, n](Graph& g, const Node& self) {
            const Id a = self.inputs[0], b = self.inputs[1];
            const Tensor& ta = g.val(a);
            const Tensor& tb = g.val(b);
            if (g.node(a).needs_grad) {
                std::vector<double>& da = g.grad_buffer(a);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const double go = self.grad[static_cast<size_t>(i * n + j)];
                        if (go == 0.0) continue;
                        for (int64_t p = 0; p < k; ++p)
                            da[static_cast<size_t>(i * k + p)] += go * tb.at(j, p);
                    }
            }
            if (g.node(b).needs_grad) {
                std::vector<double>& db = g.grad_buffer(b);
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < n; ++j) {
                        const double go = self.grad[static_cast<size_t>(i * n + j)];
                        if (go == 0.0) continue;
                        for (int64_t p = 0; p < k; ++p)
                            db[static_cast<size_t>(j * k + p)] += go * ta.at(i, p);
                    }
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::add(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), "add: shape mismatch");
    Node out;
    out.val = ta;
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (size_t i = 0; i < out.val.data.size(); ++i) out.val.data[i] += tb.data[i];
    out.inputs = {a, b};
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) {
            for (Id in : self.inputs)
                if (g.node(in).needs_grad) g.add_grad(in, self.grad);
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::sub(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.same_shape(tb), "sub: shape mismatch");
    Node out;
    out.val = ta;
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (size_t i = 0; i < out.val.data.size(); ++i) out.val.data[i] -= tb.data[i];
    out.inputs = {a, b};
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) {
            if (g.node(self.inputs[0]).needs_grad) g.add_grad(self.inputs[0], self.grad);
            if (g.node(self.inputs[1]).needs_grad) {
                std::vector<double>& db = g.grad_buffer(self.inputs[1]);
                for (size_t i = 0; i < self.grad.size(); ++i) db[i] -= self.grad[i];
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::add_n(const std::vector<Id>& terms) {
    require(!terms.empty(), "add_n: empty term list");
    const Tensor& first = val(terms[0]);
    Node out;
    out.val = first;
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (size_t t = 1; t < terms.size(); ++t) {
        const Tensor& tt = val(terms[t]);
        require(tt.same_shape(first), "add_n: shape mismatch");
        for (size_t i = 0; i < out.val.data.size(); ++i) out.val.data[i] += tt.data[i];
    }
    out.inputs = terms;
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) {
            for (Id in : self.inputs)
                if (g.node(in).needs_grad) g.add_grad(in, self.grad);
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::scale(Id a, double c) {
    Node out;
    out.val = val(a);
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (double& v : out.val.data) v *= c;
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [c](Graph& g, const Node& self) {
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            for (size_t i = 0; i < self.grad.size(); ++i) da[i] += c * self.grad[i];
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::add_const(Id a, double c) {
    Node out;
    out.val = val(a);
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (double& v : out.val.data) v += c;
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) { g.add_grad(self.inputs[0], self.grad); };
    }
    return push(std::move(out));
}

Graph::Id Graph::gelu(Id a) {
    Node out;
    out.val = val(a);
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (double& v : out.val.data) v = gelu_value(v);
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) {
            const Tensor& x = g.val(self.inputs[0]);
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            for (size_t i = 0; i < self.grad.size(); ++i)
                da[i] += self.grad[i] * gelu_deriv(x.data[i]);
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::masked_softmax(Id scores, std::shared_ptr<const AttnMask> mask) {
    const Tensor& ts = val(scores);
    require(ts.shape.size() == 2, "masked_softmax: rank-2 input required");
    require(mask && mask->rows == ts.rows() && mask->cols == ts.cols(),
            "masked_softmax: mask shape mismatch");
    const int64_t r = ts.rows(), c = ts.cols();
    Node out;
    out.val = Tensor::zeros({r, c});
    for (int64_t i = 0; i < r; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < c; ++j)
            if (mask->at(i, j)) m = std::max(m, ts.at(i, j));
        if (!std::isfinite(m)) continue;  // fully masked row stays zero
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            if (!mask->at(i, j)) continue;
            const double e = std::exp(ts.at(i, j) - m);
            out.val.at(i, j) = e;
            s += e;
        }
        for (int64_t j = 0; j < c; ++j)
            if (mask->at(i, j)) out.val.at(i, j) /= s;
    }
    out.inputs = {scores};
    out.needs_grad = node(scores).needs_grad;
    if (out.needs_grad) {
        out.back = [mask, r, c](Graph& g, const Node& self) {
            std::vector<double>& dx = g.grad_buffer(self.inputs[0]);
            for (int64_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (int64_t j = 0; j < c; ++j) {
                    if (!mask->at(i, j)) continue;
                    dot += self.grad[static_cast<size_t>(i * c + j)] *
                           self.val.at(i, j);
                }
                for (int64_t j = 0; j < c; ++j) {
                    if (!mask->at(i, j)) continue;
                    const double y = self.val.at(i, j);
                    dx[static_cast<size_t>(i * c + j)] +=
                        y * (self.grad[static_cast<size_t>(i * c + j)] - dot);
                }
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::log_softmax_rows(Id a) {
    const Tensor& ta = val(a);
    require(ta.shape.size() == 2, "log_softmax_rows: rank-2 input required");
    const int64_t r = ta.rows(), c = ta.cols();
    Node out;
    out.val = Tensor::zeros({r, c});
    for (int64_t i = 0; i < r; ++i) {
        const double lse = logsumexp(&ta.data[static_cast<size_t>(i * c)], c);
        for (int64_t j = 0; j < c; ++j) out.val.at(i, j) = ta.at(i, j) - lse;
    }
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [r, c](Graph& g, const Node& self) {
            std::vector<double>& dx = g.grad_buffer(self.inputs[0]);
            for (int64_t i = 0; i < r; ++i) {
                double gsum = 0.0;
                for (int64_t j = 0; j < c; ++j)
                    gsum += self.grad[static_cast<size_t>(i * c + j)];
                for (int64_t j = 0; j < c; ++j) {
                    const double p = std::exp(self.val.at(i, j));
                    dx[static_cast<size_t>(i * c + j)] +=
                        self.grad[static_cast<size_t>(i * c + j)] - p * gsum;
                }
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::gather_rows(Id table, std::vector<int64_t> indices) {
    const Tensor& tt = val(table);
    require(tt.shape.size() == 2, "gather_rows: rank-2 table required");
    const int64_t c = tt.cols();
    Node out;
    out.val = Tensor::zeros({static_cast<int64_t>(indices.size()), c});
    for (size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] >= 0 && indices[i] < tt.rows(), "gather_rows: index out of range");
        for (int64_t j = 0; j < c; ++j)
            out.val.at(static_cast<int64_t>(i), j) = tt.at(indices[i], j);
    }
    out.inputs = {table};
    out.needs_grad = node(table).needs_grad;
    if (out.needs_grad) {
        out.back = [idx = std::move(indices), c](Graph& g, const Node& self) {
            std::vector<double>& dt = g.grad_buffer(self.inputs[0]);
            for (size_t i = 0; i < idx.size(); ++i)
                for (int64_t j = 0; j < c; ++j)
                    dt[static_cast<size_t>(idx[i] * c + j)] +=
                        self.grad[i * static_cast<size_t>(c) + static_cast<size_t>(j)];
        };
        return push(std::move(out));
    }
    return push(std::move(out));
}

Graph::Id Graph::slice_rows(Id a, int64_t start, int64_t count) {
    const Tensor& ta = val(a);
    require(ta.shape.size() == 2, "slice_rows: rank-2 input required");
    require(start >= 0 && count >= 1 && start + count <= ta.rows(),
            "slice_rows: range out of bounds");
    const int64_t c = ta.cols();
    Node out;
    out.val = Tensor::zeros({count, c});
    std::copy(ta.data.begin() + start * c, ta.data.begin() + (start + count) * c,
              out.val.data.begin());
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [start, c](Graph& g, const Node& self) {
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            const size_t off = static_cast<size_t>(start * c);
            for (size_t i = 0; i < self.grad.size(); ++i) da[off + i] += self.grad[i];
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::concat_rows(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.cols() == tb.cols(),
            "concat_rows: column mismatch");
    Node out;
    out.val = Tensor::zeros({ta.rows() + tb.rows(), ta.cols()});
    std::copy(ta.data.begin(), ta.data.end(), out.val.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), out.val.data.begin() + ta.numel());
    out.inputs = {a, b};
    out.needs_grad = any_needs_grad(out.inputs);
    if (out.needs_grad) {
        const size_t na = ta.data.size();
        out.back = [na](Graph& g, const Node& self) {
            if (g.node(self.inputs[0]).needs_grad) {
                std::vector<double>& da = g.grad_buffer(self.inputs[0]);
                for (size_t i = 0; i < na; ++i) da[i] += self.grad[i];
            }
            if (g.node(self.inputs[1]).needs_grad) {
                std::vector<double>& db = g.grad_buffer(self.inputs[1]);
                for (size_t i = 0; i < db.size(); ++i) db[i] += self.grad[na + i];
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::replace_rows(Id a, std::vector<int64_t> rows, Tensor row_value) {
    const Tensor& ta = val(a);
    require(ta.shape.size() == 2, "replace_rows: rank-2 input required");
    require(row_value.numel() == ta.cols(), "replace_rows: row width mismatch");
    const int64_t c = ta.cols();
    Node out;
    out.val = ta;
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (int64_t r : rows) {
        require(r >= 0 && r < ta.rows(), "replace_rows: row out of range");
        for (int64_t j = 0; j < c; ++j) out.val.at(r, j) = row_value.data[static_cast<size_t>(j)];
    }
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [rs = std::move(rows), c](Graph& g, const Node& self) {
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            std::vector<uint8_t> replaced(self.grad.size() / static_cast<size_t>(c), 0);
            for (int64_t r : rs) replaced[static_cast<size_t>(r)] = 1;
            const int64_t nrows = static_cast<int64_t>(replaced.size());
            for (int64_t r = 0; r < nrows; ++r) {
                if (replaced[static_cast<size_t>(r)]) continue;
                for (int64_t j = 0; j < c; ++j)
                    da[static_cast<size_t>(r * c + j)] +=
                        self.grad[static_cast<size_t>(r * c + j)];
            }
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::pick_sum(Id a, std::vector<std::pair<int64_t, int64_t>> entries) {
    const Tensor& ta = val(a);
    require(ta.shape.size() == 2, "pick_sum: rank-2 input required");
    double s = 0.0;
    for (const auto& [r, c] : entries) {
        require(r >= 0 && r < ta.rows() && c >= 0 && c < ta.cols(),
                "pick_sum: entry out of range");
        s += ta.at(r, c);
    }
    Node out;
    out.val = Tensor::scalar(s);
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        const int64_t cols = ta.cols();
        out.back = [es = std::move(entries), cols](Graph& g, const Node& self) {
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            for (const auto& [r, c] : es)
                da[static_cast<size_t>(r * cols + c)] += self.grad[0];
        };
    }
    return push(std::move(out));
}

Graph::Id Graph::log_sigmoid(Id a) {
    Node out;
    out.val = val(a);
    out.val.requires_grad = false;
    out.val.grad.clear();
    for (double& v : out.val.data) v = hscr::log_sigmoid(v);
    out.inputs = {a};
    out.needs_grad = node(a).needs_grad;
    if (out.needs_grad) {
        out.back = [](Graph& g, const Node& self) {
            const Tensor& x = g.val(self.inputs[0]);
            std::vector<double>& da = g.grad_buffer(self.inputs[0]);
            for (size_t i = 0; i < self.grad.size(); ++i)
                da[i] += self.grad[i] * sigmoid(-x.data[i]);
        };
    }
    return push(std::move(out));
}

void Graph::backward(Id root) {
    require(root >= 0 && static_cast<size_t>(root) < nodes_.size(), "backward: bad root");
    require(val(root).is_scalar(), "backward: root must be a scalar");
    for (Node& n : nodes_) n.grad.clear();
    grad_buffer(root)[0] = 1.0;
    for (Id id = root; id >= 0; --id) {
        Node& n = node(id);
        if (n.grad.empty() || !n.needs_grad) continue;
        if (n.back) n.back(*this, n);
    }
    for (Node& n : nodes_) {
        if (!n.ext_grad || n.grad.empty()) continue;
        n.ext_grad->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) n.ext_grad->grad[i] += n.grad[i];
    }
}

}  // namespace hscr
