#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctsg/error.hpp"

namespace ctsg {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles.
///
/// Tensors are plain values; every kernel below returns a fresh tensor and
/// checks that the result is finite.
class Tensor {
public:
    Tensor() : shape_{}, values_(1, 0.0) {}

    Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
        if (shape_size(shape_) != values_.size()) {
            throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                                 std::to_string(values_.size()) + " values");
        }
    }

    static Tensor full(Shape shape, double value) {
        const std::size_t n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, value));
    }
    static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
    static Tensor scalar(double value) { return Tensor(Shape{}, {value}); }
    static Tensor vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(Shape{n}, std::move(values));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor(Shape{rows, cols}, std::move(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::vector<double>& storage() noexcept { return values_; }
    const std::vector<double>& storage() const noexcept { return values_; }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double at(std::size_t r, std::size_t c) const { return values_[r * shape_.back() + c]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_.back() + c]; }

    /// Value of a single-element tensor.
    double item() const {
        if (values_.size() != 1) {
            throw DimensionError("item() on tensor of shape " + shape_string(shape_));
        }
        return values_[0];
    }

    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != values_.size()) {
            throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        }
        return Tensor(std::move(shape), values_);
    }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    std::vector<double> values_;
};

namespace detail {

inline Tensor checked(Tensor t, const char* op) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite result in ") + op);
    }
    return t;
}

/// Outer/axis/inner decomposition used by axis-wise kernels.
struct AxisView {
    std::size_t outer = 1;
    std::size_t extent = 1;
    std::size_t inner = 1;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
    }
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
    v.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

template <class F>
Tensor unary(const Tensor& x, F f, const char* op) {
    Tensor out = x;
    for (double& v : out.values()) v = f(v);
    return checked(std::move(out), op);
}

/// Elementwise binary op; either operand may be a single-element tensor.
template <class F>
Tensor binary(const Tensor& a, const Tensor& b, F f, const char* op) {
    if (a.shape() == b.shape()) {
        Tensor out = a;
        auto o = out.values();
        auto bv = b.values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(o[i], bv[i]);
        return checked(std::move(out), op);
    }
    if (b.size() == 1) {
        Tensor out = a;
        const double s = b[0];
        for (double& v : out.values()) v = f(v, s);
        return checked(std::move(out), op);
    }
    if (a.size() == 1) {
        Tensor out = b;
        const double s = a[0];
        for (double& v : out.values()) v = f(s, v);
        return checked(std::move(out), op);
    }
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

inline void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
    }
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary(a, b, std::plus<>(), "add");
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary(a, b, std::minus<>(), "sub");
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary(a, b, std::multiplies<>(), "mul");
}
inline Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.values()) {
        if (v == 0.0) throw NumericError("div: division by zero");
    }
    return detail::binary(a, b, std::divides<>(), "div");
}

inline Tensor neg(const Tensor& x) {
    return detail::unary(x, [](double v) { return -v; }, "neg");
}
inline Tensor scale(const Tensor& x, double c) {
    return detail::unary(x, [c](double v) { return v * c; }, "scale");
}
inline Tensor add_scalar(const Tensor& x, double c) {
    return detail::unary(x, [c](double v) { return v + c; }, "add_scalar");
}
inline Tensor relu(const Tensor& x) {
    return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, "relu");
}
inline Tensor tanh(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::tanh(v); }, "tanh");
}
inline Tensor sigmoid(const Tensor& x) {
    return detail::unary(x, [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }, "sigmoid");
}
/// log(1 + e^x) without overflow.
inline Tensor softplus(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }, "softplus");
}
inline Tensor sin(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::sin(v); }, "sin");
}
inline Tensor exp(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::exp(v); }, "exp");
}
inline Tensor log(const Tensor& x) {
    for (double v : x.values()) {
        if (v <= 0.0) throw NumericError("log: non-positive argument");
    }
    return detail::unary(x, [](double v) { return std::log(v); }, "log");
}
inline Tensor abs(const Tensor& x) {
    return detail::unary(x, [](double v) { return std::abs(v); }, "abs");
}
inline Tensor square(const Tensor& x) {
    return detail::unary(x, [](double v) { return v * v; }, "square");
}

/// C = A B for row-major matrices. The accumulation order of every output
/// element is independent of the number of rows, so batched and single-row
/// evaluation agree bitwise.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = po + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    return detail::checked(std::move(out), "matmul");
}

/// Aᵀ B without materializing the transpose.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul_tn");
    detail::require_matrix(b, "matmul_tn");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul_tn: inner dimensions differ");
    Tensor out = Tensor::zeros({m, n});
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * m;
        const double* brow = pb + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* row = po + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
        }
    }
    return detail::checked(std::move(out), "matmul_tn");
}

/// A Bᵀ without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul_nt");
    detail::require_matrix(b, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) throw DimensionError("matmul_nt: inner dimensions differ");
    Tensor out = Tensor::zeros({m, n});
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += pa[i * k + p] * pb[j * k + p];
            po[i * n + j] = acc;
        }
    }
    return detail::checked(std::move(out), "matmul_nt");
}

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    return detail::checked(Tensor::scalar(acc), "sum");
}

inline Tensor mean(const Tensor& x) {
    return detail::checked(Tensor::scalar(sum(x).item() / static_cast<double>(x.size())), "mean");
}

/// Flat index of the first maximal (or minimal) element.
inline std::size_t argmax(std::span<const double> v, std::size_t stride = 1, std::size_t count = 0) {
    if (count == 0) count = v.size() / stride;
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i) {
        if (v[i * stride] > v[best * stride]) best = i;
    }
    return best;
}
inline std::size_t argmin(std::span<const double> v, std::size_t stride = 1, std::size_t count = 0) {
    if (count == 0) count = v.size() / stride;
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i) {
        if (v[i * stride] < v[best * stride]) best = i;
    }
    return best;
}

inline Tensor max(const Tensor& x) { return Tensor::scalar(x[argmax(x.values())]); }
inline Tensor min(const Tensor& x) { return Tensor::scalar(x[argmin(x.values())]); }

namespace detail {

/// Reduce along the last axis, keeping it with extent 1.
template <class F>
Tensor reduce_last(const Tensor& x, F f, const char* op) {
    if (x.rank() == 0) throw DimensionError(std::string(op) + " along an axis of a scalar");
    const std::size_t inner = x.shape().back();
    const std::size_t outer = x.size() / inner;
    Shape shape = x.shape();
    shape.back() = 1;
    Tensor out = Tensor::zeros(shape);
    for (std::size_t r = 0; r < outer; ++r) {
        out[r] = f(x.values().subspan(r * inner, inner));
    }
    return checked(std::move(out), op);
}

}  // namespace detail

inline Tensor sum_rows(const Tensor& x) {
    return detail::reduce_last(
        x, [](std::span<const double> s) { return std::accumulate(s.begin(), s.end(), 0.0); }, "sum_rows");
}
inline Tensor mean_rows(const Tensor& x) {
    return detail::reduce_last(
        x,
        [](std::span<const double> s) {
            return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
        },
        "mean_rows");
}
inline Tensor max_rows(const Tensor& x) {
    return detail::reduce_last(x, [](std::span<const double> s) { return s[argmax(s)]; }, "max_rows");
}
inline Tensor min_rows(const Tensor& x) {
    return detail::reduce_last(x, [](std::span<const double> s) { return s[argmin(s)]; }, "min_rows");
}

/// Contiguous range [begin, end) along an axis.
inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    const auto v = detail::axis_view(x.shape(), axis);
    if (begin > end || end > v.extent) {
        throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of range for " + shape_string(x.shape()));
    }
    Shape shape = x.shape();
    shape[axis] = end - begin;
    std::vector<double> out;
    out.reserve(shape_size(shape));
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* base = x.values().data() + o * v.extent * v.inner;
        out.insert(out.end(), base + begin * v.inner, base + end * v.inner);
    }
    return Tensor(std::move(shape), std::move(out));
}

/// Picks entries of the last axis by index (repeats allowed).
inline Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
    if (x.rank() == 0) throw DimensionError("gather on a scalar");
    const std::size_t inner = x.shape().back();
    const std::size_t outer = x.size() / inner;
    for (std::size_t idx : indices) {
        if (idx >= inner) throw DimensionError("gather index " + std::to_string(idx) + " out of range");
    }
    Shape shape = x.shape();
    shape.back() = indices.size();
    std::vector<double> out;
    out.reserve(outer * indices.size());
    for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t idx : indices) out.push_back(x[r * inner + idx]);
    }
    return Tensor(std::move(shape), std::move(out));
}

inline Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    Shape shape = parts[0].shape();
    const auto v0 = detail::axis_view(shape, axis);
    std::size_t extent = 0;
    for (const auto& p : parts) {
        if (p.rank() != shape.size()) throw DimensionError("concat: rank mismatch");
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i != axis && p.dim(i) != shape[i]) {
                throw DimensionError("concat: shape mismatch " + shape_string(p.shape()) + " vs " +
                                     shape_string(shape));
            }
        }
        extent += p.dim(axis);
    }
    shape[axis] = extent;
    std::vector<double> out;
    out.reserve(shape_size(shape));
    for (std::size_t o = 0; o < v0.outer; ++o) {
        for (const auto& p : parts) {
            const std::size_t chunk = p.dim(axis) * v0.inner;
            const double* base = p.values().data() + o * chunk;
            out.insert(out.end(), base, base + chunk);
        }
    }
    return Tensor(std::move(shape), std::move(out));
}

/// Numpy-style broadcast of x to a target shape (right-aligned, size-1 axes stretch).
inline Tensor broadcast(const Tensor& x, const Shape& target) {
    const Shape& src = x.shape();
    if (src.size() > target.size()) throw DimensionError("broadcast: source rank exceeds target rank");
    const std::size_t offset = target.size() - src.size();
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] != 1 && src[i] != target[offset + i]) {
            throw DimensionError("cannot broadcast " + shape_string(src) + " to " + shape_string(target));
        }
    }
    Tensor out = Tensor::zeros(target);
    const std::size_t n = out.size();
    std::vector<std::size_t> src_strides(target.size(), 0);
    {
        std::size_t stride = 1;
        for (std::size_t i = src.size(); i-- > 0;) {
            src_strides[offset + i] = src[i] == 1 ? 0 : stride;
            stride *= src[i];
        }
    }
    std::vector<std::size_t> idx(target.size(), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t s = 0;
        for (std::size_t d = 0; d < target.size(); ++d) s += idx[d] * src_strides[d];
        out[flat] = x[s];
        for (std::size_t d = target.size(); d-- > 0;) {
            if (++idx[d] < target[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

/// Sums a broadcast gradient back down to the source shape.
inline Tensor unbroadcast(const Tensor& grad, const Shape& src) {
    const Shape& target = grad.shape();
    const std::size_t offset = target.size() - src.size();
    std::vector<std::size_t> src_strides(target.size(), 0);
    {
        std::size_t stride = 1;
        for (std::size_t i = src.size(); i-- > 0;) {
            src_strides[offset + i] = src[i] == 1 ? 0 : stride;
            stride *= src[i];
        }
    }
    Tensor out = Tensor::zeros(src);
    std::vector<std::size_t> idx(target.size(), 0);
    for (std::size_t flat = 0; flat < grad.size(); ++flat) {
        std::size_t s = 0;
        for (std::size_t d = 0; d < target.size(); ++d) s += idx[d] * src_strides[d];
        out[s] += grad[flat];
        for (std::size_t d = target.size(); d-- > 0;) {
            if (++idx[d] < target[d]) break;
            idx[d] = 0;
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& x) {
    detail::require_matrix(x, "transpose");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    return out;
}

}  // namespace ctsg
