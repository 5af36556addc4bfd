#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/error.hpp"
#include "ctsg/expr.hpp"
#include "ctsg/textconfig.hpp"

namespace ctsg {

enum class ConstraintKind { Trend, FixedPoint, Ineq, Eq };
enum class Hardness { Soft, Hard };

struct Constraint {
    ConstraintKind kind = ConstraintKind::Ineq;
    Hardness hardness = Hardness::Hard;
    ExprPtr expr;             // Ineq: expr <= 0, Eq: expr == 0
    TimeSeries trend;         // Trend
    std::string trend_path;   // where the trend came from, if a file
    std::size_t row = 0;      // FixedPoint
    std::size_t col = 0;
    double value = 0.0;
    int builtin = -1;         // index of the builtin that produced it, -1 if explicit

    std::string describe() const {
        switch (kind) {
            case ConstraintKind::Trend: return "trend";
            case ConstraintKind::FixedPoint:
                return "x[" + std::to_string(row) + "," + std::to_string(col) + "] == " + format_double(value);
            case ConstraintKind::Ineq: return expr::to_string(*expr) + " <= 0";
            case ConstraintKind::Eq: return expr::to_string(*expr) + " == 0";
        }
        return "?";
    }
};

struct PenaltyWeights {
    double lambda_g = 1.0;
    double lambda_h = 1.0;
    double rho = 1.0;
};

/// Column roles for the OHLC builtin (Volume is never ordered).
struct OhlcRoles {
    std::size_t open = 0, high = 1, low = 2, close = 3, adj_close = 4;
};

struct BuiltinSpec {
    enum class Kind { GlobalMinAt, GlobalMaxAt, Ohlc } kind = Kind::GlobalMinAt;
    std::size_t row = 0, col = 0;
    OhlcRoles roles;
};

class ConstraintSet {
public:
    ConstraintSet() = default;
    ConstraintSet(std::size_t L, std::size_t K) : L_(L), K_(K) {}

    std::size_t length() const { return L_; }
    std::size_t features() const { return K_; }
    bool has_space() const { return L_ > 0 && K_ > 0; }
    void set_space(std::size_t L, std::size_t K) {
        L_ = L;
        K_ = K;
    }

    PenaltyWeights weights;

    const std::vector<Constraint>& items() const { return items_; }
    const std::vector<BuiltinSpec>& builtins() const { return builtins_; }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

    ConstraintSet& add(Constraint c) {
        if (c.kind == ConstraintKind::FixedPoint) c.hardness = Hardness::Hard;
        if (c.kind == ConstraintKind::Trend) c.hardness = Hardness::Soft;
        if ((c.kind == ConstraintKind::Ineq || c.kind == ConstraintKind::Eq) && !c.expr) {
            throw ConstraintError("inequality/equality constraint without an expression");
        }
        items_.push_back(std::move(c));
        return *this;
    }
    ConstraintSet& ineq(ExprPtr g, Hardness h = Hardness::Hard) {
        return add(Constraint{ConstraintKind::Ineq, h, std::move(g), {}, {}, 0, 0, 0.0, -1});
    }
    ConstraintSet& eq(ExprPtr h, Hardness hard = Hardness::Hard) {
        return add(Constraint{ConstraintKind::Eq, hard, std::move(h), {}, {}, 0, 0, 0.0, -1});
    }
    ConstraintSet& fixed_point(std::size_t i, std::size_t j, double r) {
        return add(Constraint{ConstraintKind::FixedPoint, Hardness::Hard, nullptr, {}, {}, i, j, r, -1});
    }
    ConstraintSet& trend(TimeSeries s, std::string path = {}) {
        return add(Constraint{ConstraintKind::Trend, Hardness::Soft, nullptr, std::move(s), std::move(path), 0, 0, 0.0, -1});
    }

    /// Appends a builtin family, expanded against the set's L×K space.
    ConstraintSet& builtin(const BuiltinSpec& spec);

    /// Appends all constraints of another set (its builtins keep their grouping).
    ConstraintSet& merge(const ConstraintSet& other) {
        const int offset = static_cast<int>(builtins_.size());
        builtins_.insert(builtins_.end(), other.builtins_.begin(), other.builtins_.end());
        for (Constraint c : other.items_) {
            if (c.builtin >= 0) c.builtin += offset;
            items_.push_back(std::move(c));
        }
        return *this;
    }

    bool has_trend() const {
        for (const auto& c : items_)
            if (c.kind == ConstraintKind::Trend) return true;
        return false;
    }
    const TimeSeries* first_trend() const {
        for (const auto& c : items_)
            if (c.kind == ConstraintKind::Trend) return &c.trend;
        return nullptr;
    }
    std::size_t hard_count() const {
        std::size_t n = 0;
        for (const auto& c : items_) n += c.hardness == Hardness::Hard;
        return n;
    }

    /// Only the hard constraints.
    ConstraintSet hard_only() const {
        ConstraintSet out(L_, K_);
        out.weights = weights;
        out.builtins_ = builtins_;
        for (const auto& c : items_)
            if (c.hardness == Hardness::Hard) out.items_.push_back(c);
        return out;
    }

    /// Same space, weights and builtin records, different constraints.
    ConstraintSet with_items(std::vector<Constraint> items) const {
        ConstraintSet out = *this;
        out.items_ = std::move(items);
        return out;
    }

    /// Throws ConstraintError when any constraint does not fit an L×K series.
    void validate(std::size_t L, std::size_t K) const {
        for (const auto& c : items_) {
            switch (c.kind) {
                case ConstraintKind::Trend:
                    if (c.trend.rank() != 2 || c.trend.dim(0) != L || c.trend.dim(1) != K) {
                        throw ConstraintError("trend series has shape " + shape_string(c.trend.shape()) +
                                              ", expected [" + std::to_string(L) + "," + std::to_string(K) + "]");
                    }
                    break;
                case ConstraintKind::FixedPoint:
                    if (c.row >= L || c.col >= K) {
                        throw ConstraintError("fixed point x[" + std::to_string(c.row) + "," + std::to_string(c.col) +
                                              "] out of range");
                    }
                    break;
                case ConstraintKind::Ineq:
                case ConstraintKind::Eq: expr::validate(*c.expr, L, K); break;
            }
        }
    }

private:
    std::size_t L_ = 0, K_ = 0;
    std::vector<Constraint> items_;
    std::vector<BuiltinSpec> builtins_;
};

inline ConstraintSet& ConstraintSet::builtin(const BuiltinSpec& spec) {
    if (!has_space()) throw ConfigError("builtin constraints need the series length and feature count");
    const int id = static_cast<int>(builtins_.size());
    auto push = [&](ExprPtr g) {
        items_.push_back(Constraint{ConstraintKind::Ineq, Hardness::Hard, std::move(g), {}, {}, 0, 0, 0.0, id});
    };
    using namespace expr;
    switch (spec.kind) {
        case BuiltinSpec::Kind::GlobalMinAt:
        case BuiltinSpec::Kind::GlobalMaxAt: {
            if (spec.row >= L_ || spec.col >= K_) throw ConfigError("global extremum index out of range");
            const bool is_min = spec.kind == BuiltinSpec::Kind::GlobalMinAt;
            for (std::size_t a = 0; a < L_; ++a) {
                for (std::size_t b = 0; b < K_; ++b) {
                    if (a == spec.row && b == spec.col) continue;
                    push(is_min ? point(spec.row, spec.col) - point(a, b) : point(a, b) - point(spec.row, spec.col));
                }
            }
            break;
        }
        case BuiltinSpec::Kind::Ohlc: {
            const auto& r = spec.roles;
            const std::size_t cols[] = {r.open, r.high, r.low, r.close, r.adj_close};
            for (std::size_t i = 0; i < 5; ++i) {
                if (cols[i] >= K_) throw ConfigError("OHLC column role out of range");
                for (std::size_t k = 0; k < i; ++k)
                    if (cols[i] == cols[k]) throw ConfigError("OHLC column roles must be distinct");
            }
            for (std::size_t t = 0; t < L_; ++t) {
                // High dominates every other price column; Low is dominated by
                // them. High >= Low appears once.
                for (std::size_t c : {r.open, r.low, r.close, r.adj_close}) push(point(t, c) - point(t, r.high));
                for (std::size_t c : {r.open, r.close, r.adj_close}) push(point(t, r.low) - point(t, c));
            }
            break;
        }
    }
    builtins_.push_back(spec);
    return *this;
}

inline ConstraintSet global_min_at(std::size_t L, std::size_t K, std::size_t i, std::size_t j) {
    ConstraintSet cs(L, K);
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::GlobalMinAt, i, j, {}});
    return cs;
}
inline ConstraintSet global_max_at(std::size_t L, std::size_t K, std::size_t i, std::size_t j) {
    ConstraintSet cs(L, K);
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::GlobalMaxAt, i, j, {}});
    return cs;
}
inline ConstraintSet ohlc(std::size_t L, std::size_t K, OhlcRoles roles = {}) {
    ConstraintSet cs(L, K);
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::Ohlc, 0, 0, roles});
    return cs;
}

namespace detail {

// e with every x[i,j] replaced by a_j x[i,j] + c_j
inline ExprPtr affine_substitute(const ExprPtr& e, const std::vector<double>& a, const std::vector<double>& c) {
    using Op = Expr::Op;
    using namespace expr;
    auto mapped_point = [&](std::size_t i, std::size_t j) {
        if (a[j] == 0.0) return constant(c[j]);
        return point(i, j) * constant(a[j]) + constant(c[j]);
    };
    switch (e->op) {
        case Op::Const: return e;
        case Op::Point: return mapped_point(e->r0, e->c0);
        case Op::Sum:
        case Op::Mean:
        case Op::Min:
        case Op::Max: {
            bool uniform = true;
            for (std::size_t j = e->c0; j < e->c1; ++j) uniform = uniform && a[j] == a[e->c0] && c[j] == c[e->c0];
            const double rows = static_cast<double>(e->r1 - e->r0);
            if (uniform) {
                const double aj = a[e->c0], cj = c[e->c0];
                const double count = e->op == Op::Sum ? rows * static_cast<double>(e->c1 - e->c0) : 1.0;
                if (aj == 0.0) return constant(cj * count);
                return aggregate(e->op, e->r0, e->r1, e->c0, e->c1) * constant(aj) + constant(cj * count);
            }
            if (e->op == Op::Min || e->op == Op::Max)
                throw ConstraintError("min/max over features with different scales cannot be normalized: " + to_string(*e));
            ExprPtr acc;
            for (std::size_t j = e->c0; j < e->c1; ++j) {
                ExprPtr col = aggregate(e->op, e->r0, e->r1, j, j + 1);
                const double count = e->op == Op::Sum ? rows : 1.0;
                ExprPtr term = a[j] == 0.0 ? constant(c[j] * count) : col * constant(a[j]) + constant(c[j] * count);
                acc = acc ? acc + term : term;
            }
            if (e->op == Op::Mean) acc = acc / constant(static_cast<double>(e->c1 - e->c0));
            return acc;
        }
        case Op::Neg:
        case Op::Abs:
        case Op::Square: return expr::unary(e->op, affine_substitute(e->lhs, a, c));
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return expr::binary(e->op, affine_substitute(e->lhs, a, c), affine_substitute(e->rhs, a, c));
    }
    return e;
}

}  // namespace detail

/// The constraint set expressed in the coordinates of data normalized by
/// `norm`: a series x' satisfies the result iff its denormalization satisfies cs.
inline ConstraintSet normalized_constraints(const ConstraintSet& cs, const Normalization& norm) {
    const std::size_t K = norm.features();
    std::vector<double> a(K), c(K);
    for (std::size_t j = 0; j < K; ++j) {
        a[j] = norm.constant[j] ? 0.0 : 0.5 * (norm.max[j] - norm.min[j]);
        c[j] = norm.constant[j] ? norm.min[j] : norm.min[j] + a[j];
    }
    std::vector<Constraint> items;
    for (Constraint k : cs.items()) {
        switch (k.kind) {
            case ConstraintKind::Trend: k.trend = normalize_series(k.trend, norm); break;
            case ConstraintKind::FixedPoint:
                if (k.col >= K) throw ConstraintError("fixed point column out of range");
                if (a[k.col] != 0.0) {
                    k.value = (k.value - c[k.col]) / a[k.col];
                } else if (k.value != c[k.col]) {
                    throw ConstraintError("fixed point " + k.describe() + " contradicts a constant feature");
                } else {
                    k.value = 0.0;
                }
                break;
            case ConstraintKind::Ineq:
            case ConstraintKind::Eq: k.expr = detail::affine_substitute(k.expr, a, c); break;
        }
        items.push_back(std::move(k));
    }
    return cs.with_items(std::move(items));
}

// ---------------------------------------------------------------------------
// Penalty

/// Per-sample penalty of a batch X ({B, L*K}); returns {B, 1}.
///
///   Σ λ_g ReLU(g) + Σ λ_h h² + Σ ‖s − x‖² + Σ λ_h (x_ij − r)²
template <class T>
T penalty_rows(const ConstraintSet& cs, const T& X, std::size_t K) {
    const std::size_t B = X.shape()[0];
    const auto& w = cs.weights;
    std::optional<T> acc;
    auto accumulate = [&](T term) { acc = acc ? add(*acc, term) : term; };
    for (const auto& c : cs.items()) {
        switch (c.kind) {
            case ConstraintKind::Ineq:
                accumulate(scale(relu(expr::evaluate(*c.expr, X, K)), w.lambda_g));
                break;
            case ConstraintKind::Eq:
                accumulate(scale(square(expr::evaluate(*c.expr, X, K)), w.lambda_h));
                break;
            case ConstraintKind::FixedPoint: {
                const std::size_t idx = c.row * K + c.col;
                T v = gather(X, std::span<const std::size_t>(&idx, 1));
                accumulate(scale(square(add_scalar(v, -c.value)), w.lambda_h));
                break;
            }
            case ConstraintKind::Trend: {
                const T s = constant_like(X, broadcast(c.trend.reshaped({1, c.trend.size()}), X.shape()));
                accumulate(sum_rows(square(sub(X, s))));
                break;
            }
        }
    }
    if (!acc) return constant_like(X, Tensor::zeros({B, 1}));
    return *acc;
}

namespace detail {

inline Tensor as_row(const TimeSeries& x) { return x.reshaped({1, x.size()}); }

}  // namespace detail

inline double penalty(const ConstraintSet& cs, const TimeSeries& x) {
    cs.validate(x.dim(0), x.dim(1));
    return penalty_rows(cs, detail::as_row(x), x.dim(1)).item();
}

inline double penalty(const ConstraintSet& cs, const TimeSeries& x, const PenaltyWeights& w) {
    ConstraintSet tmp = cs;
    tmp.weights = w;
    return penalty(tmp, x);
}

/// Gradient of the penalty with respect to every entry of x (shape L×K).
inline TimeSeries penalty_grad(const ConstraintSet& cs, const TimeSeries& x) {
    cs.validate(x.dim(0), x.dim(1));
    Graph g;
    Var X = g.leaf(detail::as_row(x));
    Var p = sum(penalty_rows(cs, X, x.dim(1)));
    return g.backward(p)[X].reshaped(x.shape());
}

inline TimeSeries penalty_grad(const ConstraintSet& cs, const TimeSeries& x, const PenaltyWeights& w) {
    ConstraintSet tmp = cs;
    tmp.weights = w;
    return penalty_grad(tmp, x);
}

// ---------------------------------------------------------------------------
// Satisfaction

struct Violation {
    std::size_t index = 0;   // position in ConstraintSet::items()
    std::string description;
    double residual = 0.0;   // g, |h| or |x_ij - r|
};

struct Satisfaction {
    bool satisfied = true;
    std::vector<Violation> violations;
};

/// Hard-constraint residual (≤ 0 or 0 means satisfied); soft constraints give 0.
inline double residual(const Constraint& c, const TimeSeries& x) {
    if (c.hardness == Hardness::Soft) return 0.0;
    switch (c.kind) {
        case ConstraintKind::Ineq: return expr::evaluate(*c.expr, x);
        case ConstraintKind::Eq: return std::abs(expr::evaluate(*c.expr, x));
        case ConstraintKind::FixedPoint: return std::abs(x.at(c.row, c.col) - c.value);
        case ConstraintKind::Trend: return 0.0;
    }
    return 0.0;
}

inline Satisfaction is_satisfied(const ConstraintSet& cs, const TimeSeries& x, double tol = 1e-6) {
    if (tol < 0) throw UsageError("is_satisfied: tolerance must be non-negative");
    cs.validate(x.dim(0), x.dim(1));
    Satisfaction out;
    for (std::size_t i = 0; i < cs.items().size(); ++i) {
        const auto& c = cs.items()[i];
        if (c.hardness == Hardness::Soft) continue;
        const double r = residual(c, x);
        if (!(r <= tol)) {
            out.satisfied = false;
            out.violations.push_back(Violation{i, c.describe(), r});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constraint files

namespace detail {

inline Hardness parse_hardness(const TextTable& t, Hardness fallback) {
    const std::string h = t.get_string("hardness", fallback == Hardness::Hard ? "hard" : "soft");
    if (h == "hard") return Hardness::Hard;
    if (h == "soft") return Hardness::Soft;
    throw ConfigError("hardness must be 'hard' or 'soft', got '" + h + "'");
}

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
    if (base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (std::filesystem::path(base_dir) / p).string();
}

inline std::size_t get_index(const TextTable& t, std::string_view key) {
    const long long v = t.get_int(key);
    if (v < 0) throw ConfigError("key '" + std::string(key) + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Parses a constraint document. Relative trend paths resolve against base_dir.
inline ConstraintSet constraints_from_text(const TextDocument& doc, const std::string& base_dir = {}) {
    ConstraintSet cs;
    if (const TextTable* space = doc.table("space")) {
        cs.set_space(detail::get_index(*space, "length"), detail::get_index(*space, "features"));
    }
    if (const TextTable* w = doc.table("weights")) {
        cs.weights.lambda_g = w->get_number("lambda_g", cs.weights.lambda_g);
        cs.weights.lambda_h = w->get_number("lambda_h", cs.weights.lambda_h);
        cs.weights.rho = w->get_number("rho", cs.weights.rho);
        if (cs.weights.lambda_g < 0 || cs.weights.lambda_h < 0 || cs.weights.rho < 0) {
            throw ConfigError("penalty weights must be non-negative");
        }
    }
    for (const TextTable* t : doc.items("constraint")) {
        const std::string kind = t->get_string("kind");
        try {
            if (kind == "ineq" || kind == "eq") {
                ExprPtr e = expr::parse(t->get_string("expr"));
                if (kind == "ineq") cs.ineq(e, detail::parse_hardness(*t, Hardness::Hard));
                else cs.eq(e, detail::parse_hardness(*t, Hardness::Hard));
            } else if (kind == "fixed_point") {
                if (t->has("hardness") && t->get_string("hardness") != "hard") {
                    throw ConfigError("fixed_point constraints are always hard");
                }
                cs.fixed_point(detail::get_index(*t, "row"), detail::get_index(*t, "col"), t->get_number("value"));
            } else if (kind == "trend") {
                if (t->has("hardness") && t->get_string("hardness") != "soft") {
                    throw ConfigError("trend constraints are always soft");
                }
                if (t->has("path")) {
                    const std::string path = t->get_string("path");
                    auto series = read_samples(detail::resolve_path(base_dir, path));
                    cs.trend(series.front(), path);
                } else {
                    const std::size_t L = detail::get_index(*t, "length");
                    const std::size_t K = detail::get_index(*t, "features");
                    auto v = detail::split_doubles(t->get_string("values"), "trend values");
                    cs.trend(Tensor(Shape{L, K}, std::move(v)));
                }
            } else if (kind == "global_min" || kind == "global_max") {
                cs.builtin(BuiltinSpec{kind == "global_min" ? BuiltinSpec::Kind::GlobalMinAt : BuiltinSpec::Kind::GlobalMaxAt,
                                       detail::get_index(*t, "row"), detail::get_index(*t, "col"), {}});
            } else if (kind == "ohlc") {
                OhlcRoles r;
                r.open = static_cast<std::size_t>(t->get_int("open", 0));
                r.high = static_cast<std::size_t>(t->get_int("high", 1));
                r.low = static_cast<std::size_t>(t->get_int("low", 2));
                r.close = static_cast<std::size_t>(t->get_int("close", 3));
                r.adj_close = static_cast<std::size_t>(t->get_int("adj_close", 4));
                cs.builtin(BuiltinSpec{BuiltinSpec::Kind::Ohlc, 0, 0, r});
            } else {
                throw ConfigError("unknown constraint kind '" + kind + "'");
            }
        } catch (const ParseError& e) {
            throw ConfigError(std::string("constraint file: ") + e.what());
        } catch (const DimensionError& e) {
            throw ConfigError(std::string("constraint file: ") + e.what());
        }
    }
    if (cs.has_space()) cs.validate(cs.length(), cs.features());
    return cs;
}

inline ConstraintSet load_constraints(const std::string& path) {
    return constraints_from_text(TextDocument::load(path), std::filesystem::path(path).parent_path().string());
}

inline TextDocument constraints_to_text(const ConstraintSet& cs) {
    TextDocument doc;
    if (cs.has_space()) {
        auto& s = doc.table_or_add("space");
        s.set_int("length", static_cast<long long>(cs.length()));
        s.set_int("features", static_cast<long long>(cs.features()));
    }
    auto& w = doc.table_or_add("weights");
    w.set_number("lambda_g", cs.weights.lambda_g);
    w.set_number("lambda_h", cs.weights.lambda_h);
    w.set_number("rho", cs.weights.rho);
    std::vector<bool> builtin_written(cs.builtins().size(), false);
    for (const auto& c : cs.items()) {
        if (c.builtin >= 0) {
            const auto b = static_cast<std::size_t>(c.builtin);
            if (builtin_written[b]) continue;
            builtin_written[b] = true;
            const BuiltinSpec& spec = cs.builtins()[b];
            auto& t = doc.append_item("constraint");
            if (spec.kind == BuiltinSpec::Kind::Ohlc) {
                t.set_string("kind", "ohlc");
                t.set_int("open", static_cast<long long>(spec.roles.open));
                t.set_int("high", static_cast<long long>(spec.roles.high));
                t.set_int("low", static_cast<long long>(spec.roles.low));
                t.set_int("close", static_cast<long long>(spec.roles.close));
                t.set_int("adj_close", static_cast<long long>(spec.roles.adj_close));
            } else {
                t.set_string("kind", spec.kind == BuiltinSpec::Kind::GlobalMinAt ? "global_min" : "global_max");
                t.set_int("row", static_cast<long long>(spec.row));
                t.set_int("col", static_cast<long long>(spec.col));
            }
            continue;
        }
        auto& t = doc.append_item("constraint");
        switch (c.kind) {
            case ConstraintKind::Ineq:
            case ConstraintKind::Eq:
                t.set_string("kind", c.kind == ConstraintKind::Ineq ? "ineq" : "eq");
                t.set_string("hardness", c.hardness == Hardness::Hard ? "hard" : "soft");
                t.set_string("expr", expr::to_string(*c.expr));
                break;
            case ConstraintKind::FixedPoint:
                t.set_string("kind", "fixed_point");
                t.set_int("row", static_cast<long long>(c.row));
                t.set_int("col", static_cast<long long>(c.col));
                t.set_number("value", c.value);
                break;
            case ConstraintKind::Trend:
                t.set_string("kind", "trend");
                if (!c.trend_path.empty()) {
                    t.set_string("path", c.trend_path);
                } else {
                    t.set_int("length", static_cast<long long>(c.trend.dim(0)));
                    t.set_int("features", static_cast<long long>(c.trend.dim(1)));
                    t.set_string("values", detail::join_doubles(c.trend.storage()));
                }
                break;
        }
    }
    return doc;
}

inline void save_constraints(const ConstraintSet& cs, const std::string& path) { constraints_to_text(cs).save(path); }

}  // namespace ctsg
