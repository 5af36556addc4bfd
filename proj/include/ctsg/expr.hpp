#pragma once

#include <cctype>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/error.hpp"
#include "ctsg/tensor.hpp"
#include "ctsg/textconfig.hpp"

namespace ctsg {

/// Expression over a series x (L×K). Row/column ranges are half-open.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Op { Const, Point, Min, Max, Mean, Sum, Add, Sub, Mul, Div, Neg, Abs, Square };

    Op op = Op::Const;
    double value = 0.0;                          // Const
    std::size_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // Point uses (r0, c0); aggregates use the ranges
    ExprPtr lhs, rhs;                            // rhs only for binary ops

    bool is_aggregate() const { return op == Op::Min || op == Op::Max || op == Op::Mean || op == Op::Sum; }
    bool is_binary() const { return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div; }
    bool is_unary() const { return op == Op::Neg || op == Op::Abs || op == Op::Square; }
};

namespace expr {

inline ExprPtr constant(double v) {
    auto e = std::make_shared<Expr>();
    e->op = Expr::Op::Const;
    e->value = v;
    return e;
}

inline ExprPtr point(std::size_t i, std::size_t j) {
    auto e = std::make_shared<Expr>();
    e->op = Expr::Op::Point;
    e->r0 = i;
    e->r1 = i + 1;
    e->c0 = j;
    e->c1 = j + 1;
    return e;
}

inline ExprPtr aggregate(Expr::Op op, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    if (r1 <= r0 || c1 <= c0) throw ConstraintError("aggregate over an empty range");
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->r0 = r0;
    e->r1 = r1;
    e->c0 = c0;
    e->c1 = c1;
    return e;
}

inline ExprPtr binary(Expr::Op op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
}

inline ExprPtr unary(Expr::Op op, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->lhs = std::move(a);
    return e;
}

inline ExprPtr operator+(ExprPtr a, ExprPtr b) { return binary(Expr::Op::Add, std::move(a), std::move(b)); }
inline ExprPtr operator-(ExprPtr a, ExprPtr b) { return binary(Expr::Op::Sub, std::move(a), std::move(b)); }
inline ExprPtr operator*(ExprPtr a, ExprPtr b) { return binary(Expr::Op::Mul, std::move(a), std::move(b)); }
inline ExprPtr operator/(ExprPtr a, ExprPtr b) { return binary(Expr::Op::Div, std::move(a), std::move(b)); }

/// Throws ConstraintError when any index falls outside an L×K series.
inline void validate(const Expr& e, std::size_t L, std::size_t K) {
    if (e.op == Expr::Op::Point || e.is_aggregate()) {
        if (e.r1 > L || e.c1 > K) {
            throw ConstraintError("index x[" + std::to_string(e.r0) + "," + std::to_string(e.c0) +
                                  "] out of range for a " + std::to_string(L) + "x" + std::to_string(K) + " series");
        }
    }
    if (e.lhs) validate(*e.lhs, L, K);
    if (e.rhs) validate(*e.rhs, L, K);
}

inline std::size_t depth(const Expr& e) {
    std::size_t d = 0;
    if (e.lhs) d = std::max(d, depth(*e.lhs));
    if (e.rhs) d = std::max(d, depth(*e.rhs));
    return d + 1;
}

/// Flat column indices (into a row of length L*K) covered by a point or aggregate.
inline std::vector<std::size_t> flat_indices(const Expr& e, std::size_t K) {
    std::vector<std::size_t> idx;
    for (std::size_t i = e.r0; i < e.r1; ++i)
        for (std::size_t j = e.c0; j < e.c1; ++j) idx.push_back(i * K + j);
    return idx;
}

/// Evaluates e on a batch X of shape {B, L*K}; the result has shape {B, 1}.
/// Works on plain tensors and on traced Vars alike.
template <class T>
T evaluate(const Expr& e, const T& X, std::size_t K) {
    using Op = Expr::Op;
    switch (e.op) {
        case Op::Const: return constant_like(X, Tensor::scalar(e.value));
        case Op::Point: {
            const std::size_t idx = e.r0 * K + e.c0;
            return gather(X, std::span<const std::size_t>(&idx, 1));
        }
        case Op::Min:
        case Op::Max:
        case Op::Mean:
        case Op::Sum: {
            const auto idx = flat_indices(e, K);
            const T sel = gather(X, std::span<const std::size_t>(idx));
            if (e.op == Op::Min) return min_rows(sel);
            if (e.op == Op::Max) return max_rows(sel);
            if (e.op == Op::Mean) return mean_rows(sel);
            return sum_rows(sel);
        }
        case Op::Add: return add(evaluate(*e.lhs, X, K), evaluate(*e.rhs, X, K));
        case Op::Sub: return sub(evaluate(*e.lhs, X, K), evaluate(*e.rhs, X, K));
        case Op::Mul: return mul(evaluate(*e.lhs, X, K), evaluate(*e.rhs, X, K));
        case Op::Div: return div(evaluate(*e.lhs, X, K), evaluate(*e.rhs, X, K));
        case Op::Neg: return neg(evaluate(*e.lhs, X, K));
        case Op::Abs: return abs(evaluate(*e.lhs, X, K));
        case Op::Square: return square(evaluate(*e.lhs, X, K));
    }
    throw ConstraintError("unknown expression node");
}

/// e as Σ coef·x[index] + offset over the flat series, when e is affine in x.
struct LinearForm {
    std::vector<std::pair<std::size_t, double>> terms;
    double offset = 0.0;
};

inline std::optional<LinearForm> linear_form(const Expr& e, std::size_t K) {
    using Op = Expr::Op;
    auto scaled = [](LinearForm f, double c) {
        for (auto& t : f.terms) t.second *= c;
        f.offset *= c;
        return f;
    };
    auto constant_of = [](const LinearForm& f) -> std::optional<double> {
        if (!f.terms.empty()) return std::nullopt;
        return f.offset;
    };
    switch (e.op) {
        case Op::Const: return LinearForm{{}, e.value};
        case Op::Point: return LinearForm{{{e.r0 * K + e.c0, 1.0}}, 0.0};
        case Op::Sum:
        case Op::Mean: {
            LinearForm f;
            const auto idx = flat_indices(e, K);
            const double w = e.op == Op::Sum ? 1.0 : 1.0 / static_cast<double>(idx.size());
            for (std::size_t i : idx) f.terms.emplace_back(i, w);
            return f;
        }
        case Op::Min:
        case Op::Max:
        case Op::Abs:
        case Op::Square: return std::nullopt;
        case Op::Neg: {
            auto a = linear_form(*e.lhs, K);
            if (!a) return std::nullopt;
            return scaled(*a, -1.0);
        }
        case Op::Add:
        case Op::Sub: {
            auto a = linear_form(*e.lhs, K), b = linear_form(*e.rhs, K);
            if (!a || !b) return std::nullopt;
            if (e.op == Op::Sub) *b = scaled(*b, -1.0);
            a->terms.insert(a->terms.end(), b->terms.begin(), b->terms.end());
            a->offset += b->offset;
            return a;
        }
        case Op::Mul:
        case Op::Div: {
            auto a = linear_form(*e.lhs, K), b = linear_form(*e.rhs, K);
            if (!a || !b) return std::nullopt;
            if (auto cb = constant_of(*b)) {
                if (e.op == Op::Div) {
                    if (*cb == 0.0) return std::nullopt;
                    return scaled(*a, 1.0 / *cb);
                }
                return scaled(*a, *cb);
            }
            if (auto ca = constant_of(*a); ca && e.op == Op::Mul) return scaled(*b, *ca);
            return std::nullopt;
        }
    }
    return std::nullopt;
}

/// Scalar evaluation on one series.
inline double evaluate(const Expr& e, const Tensor& x) {
    const std::size_t K = x.dim(1);
    return evaluate(e, x.reshaped({1, x.size()}), K).item();
}

// ---------------------------------------------------------------------------
// Text form: x[i,j], min/max/mean/sum(x[i0:i1, j0:j1]), abs(..), square(..),
// numbers, + - * /, unary minus and parentheses.

inline std::string to_string(const Expr& e) {
    using Op = Expr::Op;
    auto range = [](std::size_t a, std::size_t b) {
        return std::to_string(a) + ":" + std::to_string(b);
    };
    switch (e.op) {
        case Op::Const: {
            const std::string s = format_double(e.value);
            return e.value < 0 ? "(" + s + ")" : s;
        }
        case Op::Point: return "x[" + std::to_string(e.r0) + "," + std::to_string(e.c0) + "]";
        case Op::Min:
        case Op::Max:
        case Op::Mean:
        case Op::Sum: {
            const char* name = e.op == Op::Min ? "min" : e.op == Op::Max ? "max" : e.op == Op::Mean ? "mean" : "sum";
            return std::string(name) + "(x[" + range(e.r0, e.r1) + "," + range(e.c0, e.c1) + "])";
        }
        case Op::Add: return "(" + to_string(*e.lhs) + " + " + to_string(*e.rhs) + ")";
        case Op::Sub: return "(" + to_string(*e.lhs) + " - " + to_string(*e.rhs) + ")";
        case Op::Mul: return "(" + to_string(*e.lhs) + " * " + to_string(*e.rhs) + ")";
        case Op::Div: return "(" + to_string(*e.lhs) + " / " + to_string(*e.rhs) + ")";
        case Op::Neg: return "(-(" + to_string(*e.lhs) + "))";
        case Op::Abs: return "abs(" + to_string(*e.lhs) + ")";
        case Op::Square: return "square(" + to_string(*e.lhs) + ")";
    }
    return "?";
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : s_(src) {}

    ExprPtr parse() {
        ExprPtr e = sum_expr();
        skip();
        if (p_ != s_.size()) fail("unexpected '" + std::string(1, s_[p_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression '" + std::string(s_) + "' at " + std::to_string(p_) + ": " + msg);
    }
    void skip() {
        while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
    }
    bool accept(char c) {
        skip();
        if (p_ < s_.size() && s_[p_] == c) {
            ++p_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    std::size_t index() {
        skip();
        const std::size_t b = p_;
        while (p_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p_]))) ++p_;
        if (b == p_) fail("expected an index");
        return std::stoul(std::string(s_.substr(b, p_ - b)));
    }
    std::string ident() {
        skip();
        const std::size_t b = p_;
        while (p_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[p_]))) ++p_;
        return std::string(s_.substr(b, p_ - b));
    }

    ExprPtr sum_expr() {
        ExprPtr e = product();
        while (true) {
            if (accept('+')) e = binary(Expr::Op::Add, e, product());
            else if (accept('-')) e = binary(Expr::Op::Sub, e, product());
            else return e;
        }
    }
    ExprPtr product() {
        ExprPtr e = factor();
        while (true) {
            if (accept('*')) e = binary(Expr::Op::Mul, e, factor());
            else if (accept('/')) e = binary(Expr::Op::Div, e, factor());
            else return e;
        }
    }
    ExprPtr factor() {
        skip();
        if (accept('-')) {
            skip();
            // "-1.5" is a negative literal; "-(...)" and "-x[..]" are negations.
            if (p_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p_])) || s_[p_] == '.')) {
                return constant(-number()->value);
            }
            return unary(Expr::Op::Neg, factor());
        }
        if (accept('(')) {
            ExprPtr e = sum_expr();
            expect(')');
            return e;
        }
        if (p_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p_])) || s_[p_] == '.')) return number();
        const std::string name = ident();
        if (name == "x") {
            expect('[');
            const std::size_t i = index();
            expect(',');
            const std::size_t j = index();
            expect(']');
            return point(i, j);
        }
        if (name == "min" || name == "max" || name == "mean" || name == "sum") {
            expect('(');
            if (ident() != "x") fail("aggregates take x[rows, cols]");
            expect('[');
            const auto [r0, r1] = range();
            expect(',');
            const auto [c0, c1] = range();
            expect(']');
            expect(')');
            const Expr::Op op = name == "min"    ? Expr::Op::Min
                                : name == "max"  ? Expr::Op::Max
                                : name == "mean" ? Expr::Op::Mean
                                                 : Expr::Op::Sum;
            try {
                return aggregate(op, r0, r1, c0, c1);
            } catch (const ConstraintError& e) {
                fail(e.what());
            }
        }
        if (name == "abs" || name == "square") {
            expect('(');
            ExprPtr e = sum_expr();
            expect(')');
            return unary(name == "abs" ? Expr::Op::Abs : Expr::Op::Square, e);
        }
        fail(name.empty() ? "expected a term" : "unknown name '" + name + "'");
    }
    std::pair<std::size_t, std::size_t> range() {
        const std::size_t a = index();
        if (!accept(':')) return {a, a + 1};
        return {a, index()};
    }
    ExprPtr number() {
        const std::size_t b = p_;
        while (p_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[p_])) || s_[p_] == '.')) ++p_;
        if (p_ < s_.size() && (s_[p_] == 'e' || s_[p_] == 'E')) {
            ++p_;
            if (p_ < s_.size() && (s_[p_] == '+' || s_[p_] == '-')) ++p_;
            while (p_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p_]))) ++p_;
        }
        return constant(parse_double(s_.substr(b, p_ - b), "expression number"));
    }

    std::string_view s_;
    std::size_t p_ = 0;
};

}  // namespace detail

inline ExprPtr parse(std::string_view text) { return detail::Parser(text).parse(); }

/// Structural equality (constants compared exactly).
inline bool equal(const Expr& a, const Expr& b) {
    if (a.op != b.op || a.value != b.value || a.r0 != b.r0 || a.r1 != b.r1 || a.c0 != b.c0 || a.c1 != b.c1) return false;
    if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs) || static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) {
        return false;
    }
    return (!a.lhs || equal(*a.lhs, *b.lhs)) && (!a.rhs || equal(*a.rhs, *b.rhs));
}

}  // namespace expr
}  // namespace ctsg
