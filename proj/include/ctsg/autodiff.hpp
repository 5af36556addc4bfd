#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctsg/tensor.hpp"

namespace ctsg {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
public:
    Var() = default;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph& graph() const { return *graph_; }
    std::size_t id() const noexcept { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradients produced by Graph::backward, keyed by node.
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(std::vector<Tensor> grads, std::vector<Shape> shapes)
        : grads_(std::move(grads)), shapes_(std::move(shapes)) {}

    /// Gradient of the root w.r.t. v; zeros if the root does not depend on v.
    Tensor operator[](const Var& v) const {
        const std::size_t i = v.id();
        if (i < grads_.size() && grads_[i].shape() == shapes_[i]) return grads_[i];
        return Tensor::zeros(v.shape());
    }

private:
    std::vector<Tensor> grads_;
    std::vector<Shape> shapes_;
};

/// Tape of traced operations.
///
/// Nodes are appended in evaluation order, which is a topological order;
/// backward walks them once in reverse. A graph is not thread-safe; use one
/// graph per thread.
class Graph {
public:
    using BackwardFn = std::function<void(const Tensor& grad_out, std::vector<Tensor>& grads)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Differentiable input.
    Var leaf(Tensor value) { return push(std::move(value), true, {}); }
    /// Non-differentiable input.
    Var constant(Tensor value) { return push(std::move(value), false, {}); }

    Var push(Tensor value, bool requires_grad, BackwardFn backward) {
        nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward)});
        return Var(this, nodes_.size() - 1);
    }

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Gradients backward(const Var& root) {
        if (&root.graph() != this) throw UsageError("backward: root belongs to another graph");
        if (root.value().size() != 1) {
            throw UsageError("backward: root must be a scalar, got shape " + shape_string(root.shape()));
        }
        std::vector<Tensor> grads(nodes_.size(), Tensor(Shape{0}, {}));
        grads[root.id()] = Tensor::ones(root.shape());
        for (std::size_t i = root.id() + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (!node.requires_grad || !node.backward || grads[i].shape() != node.value.shape()) continue;
            node.backward(grads[i], grads);
        }
        std::vector<Shape> shapes;
        shapes.reserve(nodes_.size());
        for (const auto& n : nodes_) shapes.push_back(n.value.shape());
        return Gradients(std::move(grads), std::move(shapes));
    }

    /// Adds g into the gradient slot of node `id` (if that node tracks gradients).
    void accumulate(std::vector<Tensor>& grads, std::size_t id, const Tensor& g) const {
        if (!nodes_[id].requires_grad) return;
        Tensor& slot = grads[id];
        if (slot.shape() != nodes_[id].value.shape()) {
            slot = g;
            return;
        }
        auto dst = slot.values();
        auto src = g.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }

private:
    struct Node {
        Tensor value;
        bool requires_grad;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }
inline bool Var::requires_grad() const { return graph_->requires_grad(id_); }

namespace detail {

inline Graph& same_graph(const Var& a, const Var& b) {
    if (&a.graph() != &b.graph()) throw UsageError("operands belong to different graphs");
    return a.graph();
}

/// Reduces a gradient to the shape of an operand that may have been scalar-broadcast.
inline Tensor reduce_to(const Tensor& g, const Shape& shape) {
    if (g.shape() == shape) return g;
    return Tensor::full(shape, sum(g).item());
}

inline Tensor sign_mask(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.values()) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    return out;
}

}  // namespace detail

inline Var constant_like(const Var& like, Tensor value) { return like.graph().constant(std::move(value)); }
inline Tensor constant_like(const Tensor&, Tensor value) { return value; }

inline Var add(const Var& a, const Var& b) {
    Graph& g = detail::same_graph(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    const Shape sa = a.shape(), sb = b.shape();
    return g.push(add(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [&g, ia, ib, sa, sb](const Tensor& go, std::vector<Tensor>& grads) {
                      g.accumulate(grads, ia, detail::reduce_to(go, sa));
                      g.accumulate(grads, ib, detail::reduce_to(go, sb));
                  });
}

inline Var sub(const Var& a, const Var& b) {
    Graph& g = detail::same_graph(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    const Shape sa = a.shape(), sb = b.shape();
    return g.push(sub(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [&g, ia, ib, sa, sb](const Tensor& go, std::vector<Tensor>& grads) {
                      g.accumulate(grads, ia, detail::reduce_to(go, sa));
                      g.accumulate(grads, ib, detail::reduce_to(neg(go), sb));
                  });
}

inline Var mul(const Var& a, const Var& b) {
    Graph& g = detail::same_graph(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return g.push(mul(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [&g, ia, ib](const Tensor& go, std::vector<Tensor>& grads) {
                      const Tensor& va = g.value(ia);
                      const Tensor& vb = g.value(ib);
                      if (g.requires_grad(ia)) g.accumulate(grads, ia, detail::reduce_to(mul(go, vb), va.shape()));
                      if (g.requires_grad(ib)) g.accumulate(grads, ib, detail::reduce_to(mul(go, va), vb.shape()));
                  });
}

inline Var div(const Var& a, const Var& b) {
    Graph& g = detail::same_graph(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    Tensor out = div(a.value(), b.value());
    return g.push(std::move(out), a.requires_grad() || b.requires_grad(),
                  [&g, ia, ib](const Tensor& go, std::vector<Tensor>& grads) {
                      const Tensor& va = g.value(ia);
                      const Tensor& vb = g.value(ib);
                      if (g.requires_grad(ia)) g.accumulate(grads, ia, detail::reduce_to(div(go, vb), va.shape()));
                      if (g.requires_grad(ib)) {
                          // d(a/b)/db = -a / b^2
                          Tensor gb = neg(div(mul(go, va), square(vb)));
                          g.accumulate(grads, ib, detail::reduce_to(gb, vb.shape()));
                      }
                  });
}

namespace detail {

template <class Fwd, class Deriv>
Var unary_var(const Var& x, Fwd fwd, Deriv deriv) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    Tensor out = fwd(x.value());
    const std::size_t iout = g.size();
    return g.push(std::move(out), x.requires_grad(),
                  [&g, ix, iout, deriv](const Tensor& go, std::vector<Tensor>& grads) {
                      g.accumulate(grads, ix, mul(go, deriv(g.value(ix), g.value(iout))));
                  });
}

}  // namespace detail

inline Var neg(const Var& x) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    return g.push(neg(x.value()), x.requires_grad(),
                  [&g, ix](const Tensor& go, std::vector<Tensor>& grads) { g.accumulate(grads, ix, neg(go)); });
}

inline Var scale(const Var& x, double c) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    return g.push(scale(x.value(), c), x.requires_grad(), [&g, ix, c](const Tensor& go, std::vector<Tensor>& grads) {
        g.accumulate(grads, ix, scale(go, c));
    });
}

inline Var add_scalar(const Var& x, double c) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    return g.push(add_scalar(x.value(), c), x.requires_grad(),
                  [&g, ix](const Tensor& go, std::vector<Tensor>& grads) { g.accumulate(grads, ix, go); });
}

inline Var relu(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return relu(v); },
                             [](const Tensor& in, const Tensor&) {
                                 Tensor d = in;
                                 for (double& v : d.values()) v = v > 0.0 ? 1.0 : 0.0;
                                 return d;
                             });
}

inline Var tanh(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return tanh(v); },
                             [](const Tensor&, const Tensor& out) {
                                 Tensor d = out;
                                 for (double& v : d.values()) v = 1.0 - v * v;
                                 return d;
                             });
}

inline Var sigmoid(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return sigmoid(v); },
                             [](const Tensor&, const Tensor& out) {
                                 Tensor d = out;
                                 for (double& v : d.values()) v = v * (1.0 - v);
                                 return d;
                             });
}

inline Var softplus(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return softplus(v); },
                             [](const Tensor& in, const Tensor&) { return sigmoid(in); });
}

inline Var sin(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return sin(v); },
                             [](const Tensor& in, const Tensor&) {
                                 Tensor d = in;
                                 for (double& v : d.values()) v = std::cos(v);
                                 return d;
                             });
}

inline Var exp(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return exp(v); },
                             [](const Tensor&, const Tensor& out) { return out; });
}

inline Var log(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return log(v); },
                             [](const Tensor& in, const Tensor&) {
                                 Tensor d = in;
                                 for (double& v : d.values()) v = 1.0 / v;
                                 return d;
                             });
}

inline Var abs(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return abs(v); },
                             [](const Tensor& in, const Tensor&) { return detail::sign_mask(in); });
}

inline Var square(const Var& x) {
    return detail::unary_var(x, [](const Tensor& v) { return square(v); },
                             [](const Tensor& in, const Tensor&) { return scale(in, 2.0); });
}

inline Var matmul(const Var& a, const Var& b) {
    Graph& g = detail::same_graph(a, b);
    const std::size_t ia = a.id(), ib = b.id();
    return g.push(matmul(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [&g, ia, ib](const Tensor& go, std::vector<Tensor>& grads) {
                      if (g.requires_grad(ia)) g.accumulate(grads, ia, matmul_nt(go, g.value(ib)));
                      if (g.requires_grad(ib)) g.accumulate(grads, ib, matmul_tn(g.value(ia), go));
                  });
}

inline Var sum(const Var& x) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    return g.push(sum(x.value()), x.requires_grad(), [&g, ix, sx](const Tensor& go, std::vector<Tensor>& grads) {
        g.accumulate(grads, ix, Tensor::full(sx, go.item()));
    });
}

inline Var mean(const Var& x) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    const double n = static_cast<double>(x.value().size());
    return g.push(mean(x.value()), x.requires_grad(), [&g, ix, sx, n](const Tensor& go, std::vector<Tensor>& grads) {
        g.accumulate(grads, ix, Tensor::full(sx, go.item() / n));
    });
}

namespace detail {

/// Global max/min: the gradient flows to the first extremal element.
inline Var extremum_all(const Var& x, bool take_max) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const auto vals = x.value().values();
    const std::size_t pos = take_max ? argmax(vals) : argmin(vals);
    const Shape sx = x.shape();
    return g.push(Tensor::scalar(vals[pos]), x.requires_grad(),
                  [&g, ix, sx, pos](const Tensor& go, std::vector<Tensor>& grads) {
                      Tensor d = Tensor::zeros(sx);
                      d[pos] = go.item();
                      g.accumulate(grads, ix, d);
                  });
}

/// Row-wise max/min along the last axis.
inline Var extremum_rows(const Var& x, bool take_max) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Tensor& v = x.value();
    if (v.rank() == 0) throw DimensionError("row reduction of a scalar");
    const std::size_t inner = v.shape().back();
    const std::size_t outer = v.size() / inner;
    std::vector<std::size_t> picks(outer);
    Shape shape = v.shape();
    shape.back() = 1;
    Tensor out = Tensor::zeros(shape);
    for (std::size_t r = 0; r < outer; ++r) {
        auto row = v.values().subspan(r * inner, inner);
        const std::size_t p = take_max ? argmax(row) : argmin(row);
        picks[r] = r * inner + p;
        out[r] = row[p];
    }
    const Shape sx = v.shape();
    return g.push(std::move(out), x.requires_grad(),
                  [&g, ix, sx, picks = std::move(picks)](const Tensor& go, std::vector<Tensor>& grads) {
                      Tensor d = Tensor::zeros(sx);
                      for (std::size_t r = 0; r < picks.size(); ++r) d[picks[r]] = go[r];
                      g.accumulate(grads, ix, d);
                  });
}

}  // namespace detail

inline Var max(const Var& x) { return detail::extremum_all(x, true); }
inline Var min(const Var& x) { return detail::extremum_all(x, false); }
inline Var max_rows(const Var& x) { return detail::extremum_rows(x, true); }
inline Var min_rows(const Var& x) { return detail::extremum_rows(x, false); }

inline Var sum_rows(const Var& x) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    return g.push(sum_rows(x.value()), x.requires_grad(), [&g, ix, sx](const Tensor& go, std::vector<Tensor>& grads) {
        g.accumulate(grads, ix, broadcast(go, sx));
    });
}

inline Var mean_rows(const Var& x) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    const double n = static_cast<double>(sx.back());
    return g.push(mean_rows(x.value()), x.requires_grad(),
                  [&g, ix, sx, n](const Tensor& go, std::vector<Tensor>& grads) {
                      g.accumulate(grads, ix, scale(broadcast(go, sx), 1.0 / n));
                  });
}

inline Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    return g.push(slice(x.value(), axis, begin, end), x.requires_grad(),
                  [&g, ix, sx, axis, begin](const Tensor& go, std::vector<Tensor>& grads) {
                      Tensor d = Tensor::zeros(sx);
                      const auto v = detail::axis_view(sx, axis);
                      const std::size_t width = go.dim(axis) * v.inner;
                      for (std::size_t o = 0; o < v.outer; ++o) {
                          double* dst = d.values().data() + o * v.extent * v.inner + begin * v.inner;
                          const double* src = go.values().data() + o * width;
                          for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
                      }
                      g.accumulate(grads, ix, d);
                  });
}

inline Var gather(const Var& x, std::span<const std::size_t> indices) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    Tensor out = gather(x.value(), idx);
    return g.push(std::move(out), x.requires_grad(),
                  [&g, ix, sx, idx = std::move(idx)](const Tensor& go, std::vector<Tensor>& grads) {
                      Tensor d = Tensor::zeros(sx);
                      const std::size_t inner = sx.back();
                      const std::size_t outer = d.size() / inner;
                      for (std::size_t r = 0; r < outer; ++r)
                          for (std::size_t k = 0; k < idx.size(); ++k)
                              d[r * inner + idx[k]] += go[r * idx.size() + k];
                      g.accumulate(grads, ix, d);
                  });
}

inline Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    Graph& g = parts[0].graph();
    std::vector<Tensor> values;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> extents;
    bool rg = false;
    for (const auto& p : parts) {
        detail::same_graph(parts[0], p);
        values.push_back(p.value());
        ids.push_back(p.id());
        extents.push_back(p.value().dim(axis));
        rg = rg || p.requires_grad();
    }
    Tensor out = concat(values, axis);
    return g.push(std::move(out), rg,
                  [&g, ids = std::move(ids), extents = std::move(extents), axis](const Tensor& go,
                                                                                  std::vector<Tensor>& grads) {
                      std::size_t begin = 0;
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                          if (g.requires_grad(ids[k])) {
                              g.accumulate(grads, ids[k], slice(go, axis, begin, begin + extents[k]));
                          }
                          begin += extents[k];
                      }
                  });
}

inline Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    std::vector<Var> v(parts);
    return concat(std::span<const Var>(v), axis);
}

inline Var broadcast(const Var& x, const Shape& target) {
    Graph& g = x.graph();
    const std::size_t ix = x.id();
    const Shape sx = x.shape();
    return g.push(broadcast(x.value(), target), x.requires_grad(),
                  [&g, ix, sx](const Tensor& go, std::vector<Tensor>& grads) {
                      g.accumulate(grads, ix, unbroadcast(go, sx));
                  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }

/// Logistic function built from tanh so that it stays inside the op set.
template <class T>
T sigmoid(const T& x) {
    return add_scalar(scale(tanh(scale(x, 0.5)), 0.5), 0.5);
}

}  // namespace ctsg
