#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>

#include "ctsg/constraints.hpp"
#include "ctsg/dataio.hpp"
#include "support.hpp"

using namespace ctsg;
using ctsg::test::rel_error;

namespace {

// A series with distinct entries so no min/max or ReLU sits on a tie.
TimeSeries random_series(std::size_t L, std::size_t K, std::uint64_t seed) {
    Rng rng(seed);
    return ctsg::test::random_tensor({L, K}, rng);
}

// Random smooth-almost-everywhere tree of depth at most `depth`.
ExprPtr random_expr(Rng& rng, std::size_t L, std::size_t K, std::size_t depth) {
    using Op = Expr::Op;
    const auto r = [&](std::size_t n) { return static_cast<std::size_t>(rng.uniform_index(n)); };
    if (depth <= 1 || rng.uniform() < 0.2) {
        switch (r(3)) {
            case 0: return expr::constant(rng.uniform(-2.0, 2.0));
            case 1: return expr::point(r(L), r(K));
            default: {
                const std::size_t r0 = r(L), c0 = r(K);
                const Op ops[] = {Op::Min, Op::Max, Op::Mean, Op::Sum};
                return expr::aggregate(ops[r(4)], r0, r0 + 1 + r(L - r0), c0, c0 + 1 + r(K - c0));
            }
        }
    }
    auto sub = [&](std::size_t d) { return random_expr(rng, L, K, d); };
    switch (r(depth >= 4 ? 7 : 6)) {
        case 0: return expr::binary(Op::Add, sub(depth - 1), sub(depth - 1));
        case 1: return expr::binary(Op::Sub, sub(depth - 1), sub(depth - 1));
        case 2: return expr::binary(Op::Mul, sub(depth - 1), sub(depth - 1));
        case 3: return expr::unary(Op::Neg, sub(depth - 1));
        case 4: return expr::unary(Op::Abs, sub(depth - 1));
        case 5: return expr::unary(Op::Square, sub(depth - 1));
        // a / (1 + b²) keeps the denominator away from zero
        default:
            return expr::binary(Op::Div, sub(depth - 1),
                                expr::binary(Op::Add, expr::constant(1.0), expr::unary(Op::Square, sub(depth - 3))));
    }
}

// Independent long-double evaluation of an expression tree.
long double eval_long(const Expr& e, const std::vector<long double>& x, std::size_t K) {
    using Op = Expr::Op;
    switch (e.op) {
        case Op::Const: return e.value;
        case Op::Point: return x[e.r0 * K + e.c0];
        case Op::Min:
        case Op::Max:
        case Op::Mean:
        case Op::Sum: {
            long double acc = e.op == Op::Min ? INFINITY : e.op == Op::Max ? -INFINITY : 0.0L;
            std::size_t n = 0;
            for (std::size_t i = e.r0; i < e.r1; ++i)
                for (std::size_t j = e.c0; j < e.c1; ++j, ++n) {
                    const long double v = x[i * K + j];
                    acc = e.op == Op::Min ? std::min(acc, v) : e.op == Op::Max ? std::max(acc, v) : acc + v;
                }
            return e.op == Op::Mean ? acc / static_cast<long double>(n) : acc;
        }
        case Op::Add: return eval_long(*e.lhs, x, K) + eval_long(*e.rhs, x, K);
        case Op::Sub: return eval_long(*e.lhs, x, K) - eval_long(*e.rhs, x, K);
        case Op::Mul: return eval_long(*e.lhs, x, K) * eval_long(*e.rhs, x, K);
        case Op::Div: return eval_long(*e.lhs, x, K) / eval_long(*e.rhs, x, K);
        case Op::Neg: return -eval_long(*e.lhs, x, K);
        case Op::Abs: return std::fabs(eval_long(*e.lhs, x, K));
        case Op::Square: {
            const long double v = eval_long(*e.lhs, x, K);
            return v * v;
        }
    }
    return 0.0L;
}

// Builtin and expression penalties written out directly in long double.
// Cancelling terms leave roundoff in a double-precision difference quotient
// that would exceed the 1e-8 relative floor on exactly-zero gradient entries.
using LongFn = std::function<long double(const std::vector<long double>&)>;

std::vector<double> long_numeric_grad(const LongFn& f, std::vector<long double> v) {
    std::vector<double> fd(v.size());
    const long double h = 1e-5L;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const long double keep = v[k];
        v[k] = keep + h;
        const long double up = f(v);
        v[k] = keep - h;
        const long double down = f(v);
        v[k] = keep;
        fd[k] = static_cast<double>((up - down) / (2.0L * h));
    }
    return fd;
}

}  // namespace

TEST(Penalty, SatisfiedInequalityContributesNothing) {
    ConstraintSet cs(2, 1);
    cs.ineq(expr::parse("x[0,0] - 1"));
    EXPECT_EQ(penalty(cs, Tensor::matrix(2, 1, {0.7, 0.0})), 0.0);  // g = −0.3
}

TEST(Penalty, EqualityIsSquared) {
    ConstraintSet cs(2, 1);
    cs.eq(expr::parse("x[0,0] + x[1,0]"));
    EXPECT_DOUBLE_EQ(penalty(cs, Tensor::matrix(2, 1, {0.25, 0.25})), 0.25);  // h = 0.5
}

TEST(Penalty, TrendTermIsZeroOnTheTrendAndHasGradient2Diff) {
    const TimeSeries s = random_series(6, 2, 1);
    const TimeSeries x = random_series(6, 2, 2);
    ConstraintSet cs(6, 2);
    cs.trend(s);
    EXPECT_EQ(penalty(cs, s), 0.0);
    const TimeSeries g = penalty_grad(cs, x);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(g[k], 2.0 * (x[k] - s[k]), 1e-12);
}

TEST(Penalty, FixedPointAndWeights) {
    ConstraintSet cs(3, 1);
    cs.fixed_point(1, 0, 2.0);
    const TimeSeries x = Tensor::matrix(3, 1, {0, 3, 0});
    EXPECT_DOUBLE_EQ(penalty(cs, x), 1.0);
    EXPECT_DOUBLE_EQ(penalty(cs, x, PenaltyWeights{1.0, 4.0, 1.0}), 4.0);
}

TEST(Penalty, InactiveInequalityHasZeroGradient) {
    ConstraintSet cs(4, 1);
    cs.ineq(expr::parse("sum(x[0:4,0:1]) - 100"));
    const TimeSeries g = penalty_grad(cs, random_series(4, 1, 3));
    for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

namespace {

LongFn extremum_oracle(std::size_t L, std::size_t K, std::size_t i, std::size_t j, bool is_min) {
    return [=](const std::vector<long double>& x) {
        long double s = 0.0L;
        for (std::size_t a = 0; a < L * K; ++a) {
            if (a == i * K + j) continue;
            const long double g = is_min ? x[i * K + j] - x[a] : x[a] - x[i * K + j];
            s += std::max(g, 0.0L);
        }
        return s;
    };
}

LongFn ohlc_oracle(std::size_t L, std::size_t K) {
    // columns: open 0, high 1, low 2, close 3, adj close 4
    return [=](const std::vector<long double>& x) {
        long double s = 0.0L;
        for (std::size_t t = 0; t < L; ++t) {
            const auto v = [&](std::size_t c) { return x[t * K + c]; };
            for (std::size_t c : {0u, 2u, 3u, 4u}) s += std::max(v(c) - v(1), 0.0L);
            for (std::size_t c : {0u, 3u, 4u}) s += std::max(v(2) - v(c), 0.0L);
        }
        return s;
    };
}

void expect_builtin_grad(const ConstraintSet& cs, const LongFn& oracle, const TimeSeries& x) {
    const TimeSeries g = penalty_grad(cs, x);
    std::vector<long double> v(x.values().begin(), x.values().end());
    EXPECT_NEAR(static_cast<double>(oracle(v)), penalty(cs, x), 1e-12);
    const auto fd = long_numeric_grad(oracle, v);
    EXPECT_LE(rel_error(fd, g.values()), 1e-4);
}

}  // namespace

TEST(Penalty, BuiltinGradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        expect_builtin_grad(global_min_at(24, 1, 10, 0), extremum_oracle(24, 1, 10, 0, true), random_series(24, 1, seed));
        expect_builtin_grad(global_max_at(12, 3, 4, 2), extremum_oracle(12, 3, 4, 2, false), random_series(12, 3, seed + 10));
        expect_builtin_grad(ohlc(8, 6), ohlc_oracle(8, 6), random_series(8, 6, seed + 20));
    }
}

TEST(Penalty, BatchRowsAreIndependent) {
    const ConstraintSet cs = global_min_at(5, 2, 2, 1);
    const TimeSeries a = random_series(5, 2, 4), b = random_series(5, 2, 5);
    Tensor X = Tensor::zeros({2, 10});
    for (std::size_t k = 0; k < 10; ++k) {
        X[k] = a[k];
        X[10 + k] = b[k];
    }
    const Tensor rows = penalty_rows(cs, X, 2);
    EXPECT_DOUBLE_EQ(rows[0], penalty(cs, a));
    EXPECT_DOUBLE_EQ(rows[1], penalty(cs, b));
}

TEST(Penalty, RandomExpressionTreesMatchFiniteDifferences) {
    Rng rng(77);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const ExprPtr e = random_expr(rng, 6, 2, 6);
        ASSERT_LE(expr::depth(*e), 6u);
        const TimeSeries x = random_series(6, 2, 1000 + static_cast<std::uint64_t>(trial));
        ConstraintSet cs(6, 2);
        cs.ineq(e);
        cs.eq(e);
        // Skip points within difference-quotient reach of the ReLU kink.
        if (std::abs(expr::evaluate(*e, x)) < 1e-3) continue;
        const LongFn oracle = [&](const std::vector<long double>& v) {
            const long double g = eval_long(*e, v, 2);
            return std::max(g, 0.0L) + g * g;
        };
        const std::vector<long double> v(x.values().begin(), x.values().end());
        EXPECT_NEAR(static_cast<double>(oracle(v)), penalty(cs, x), 1e-9 * (1.0 + penalty(cs, x)));
        EXPECT_LE(rel_error(long_numeric_grad(oracle, v), penalty_grad(cs, x).values()), 1e-4) << expr::to_string(*e);
        ++checked;
    }
    EXPECT_GT(checked, 150);
}

TEST(Satisfaction, EmptySetIsSatisfied) {
    EXPECT_TRUE(is_satisfied(ConstraintSet(3, 1), random_series(3, 1, 1), 0.0).satisfied);
}

TEST(Satisfaction, FixedPointExactAtZeroTolerance) {
    ConstraintSet cs(4, 2);
    cs.fixed_point(2, 1, 2.5);
    TimeSeries x = Tensor::zeros({4, 2});
    x.at(2, 1) = 2.5;
    EXPECT_TRUE(is_satisfied(cs, x, 0.0).satisfied);
    x.at(2, 1) = 2.5 + 1e-12;
    EXPECT_FALSE(is_satisfied(cs, x, 0.0).satisfied);
}

TEST(Satisfaction, GlobalMinDefinitionAndTies) {
    const ConstraintSet cs = global_min_at(5, 1, 2, 0);
    EXPECT_FALSE(is_satisfied(cs, Tensor::matrix(5, 1, {0, 1, 0.5, 2, 3}), 0.0).satisfied);
    EXPECT_TRUE(is_satisfied(cs, Tensor::matrix(5, 1, {1, 1, 0.5, 2, 3}), 0.0).satisfied);
    EXPECT_TRUE(is_satisfied(cs, Tensor::full({5, 1}, 7.0), 0.0).satisfied);
}

TEST(Satisfaction, OhlcViolationListsFailingPair) {
    const std::string path = ctsg::test::temp_path("ohlc_rows.csv");
    std::ofstream(path) << synthetic_ohlcv_csv(40, 9);
    const Dataset ds = load_csv(path, ohlcv_columns(), 24, 4);
    const ConstraintSet cs = ohlc(24, 6);
    for (const auto& x : ds.samples) EXPECT_TRUE(is_satisfied(cs, x, 0.0).satisfied);

    TimeSeries x = ds.samples[0];
    x.at(5, 2) = x.at(5, 0) + 0.5;  // low above open
    const Satisfaction s = is_satisfied(cs, x, 1e-9);
    ASSERT_FALSE(s.satisfied);
    // Brute force: every (a ≤ b) pair of the OHLC ordering on every row.
    std::size_t expected = 0;
    for (std::size_t t = 0; t < 24; ++t) {
        for (std::size_t c : {0u, 2u, 3u, 4u}) expected += x.at(t, c) - x.at(t, 1) > 1e-9;
        for (std::size_t c : {0u, 3u, 4u}) expected += x.at(t, 2) - x.at(t, c) > 1e-9;
    }
    EXPECT_EQ(s.violations.size(), expected);
    bool found = false;
    for (const auto& v : s.violations) {
        found |= v.description == "(x[5,2] - x[5,0]) <= 0";
        EXPECT_GT(v.residual, 1e-9);
    }
    EXPECT_TRUE(found);
}

TEST(Satisfaction, MonotoneInTolerance) {
    ConstraintSet cs = global_min_at(10, 2, 3, 1);
    cs.fixed_point(0, 0, 0.3);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const TimeSeries x = random_series(10, 2, seed);
        bool prev = false;
        for (double tol : {0.0, 1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 100.0}) {
            const bool now = is_satisfied(cs, x, tol).satisfied;
            EXPECT_TRUE(!prev || now);
            prev = now;
        }
        EXPECT_TRUE(prev);
    }
    EXPECT_THROW(is_satisfied(cs, random_series(10, 2, 0), -1.0), UsageError);
}

TEST(Satisfaction, SoftConstraintsNeverViolate) {
    ConstraintSet cs(3, 1);
    cs.ineq(expr::parse("x[0,0] - 10"), Hardness::Soft);
    cs.ineq(expr::parse("1 - x[0,0]"), Hardness::Soft);
    EXPECT_TRUE(is_satisfied(cs, Tensor::zeros({3, 1}), 0.0).satisfied);
}

TEST(Constraints, OutOfRangeIndexIsConstraintError) {
    ConstraintSet cs(4, 1);
    cs.fixed_point(4, 0, 1.0);
    EXPECT_THROW(cs.validate(4, 1), ConstraintError);
    ConstraintSet cs2(4, 1);
    cs2.ineq(expr::parse("x[1,1]"));
    EXPECT_THROW(cs2.validate(4, 1), ConstraintError);
}

TEST(Constraints, ParserRoundTrip) {
    for (const char* text : {"x[1,0] - 2.5", "min(x[0:5,0:2]) - max(x[3:4,1:2])", "abs(x[0,0]) * -1.5 + square(mean(x[1:3,0:1]))",
                             "-(x[2,1] / 4) - sum(x[0:2,0:2])"}) {
        const ExprPtr e = expr::parse(text);
        const ExprPtr back = expr::parse(expr::to_string(*e));
        EXPECT_TRUE(expr::equal(*e, *back)) << text;
    }
    EXPECT_THROW(expr::parse("x[1,"), ParseError);
    EXPECT_THROW(expr::parse("foo(3)"), ParseError);
}

TEST(Constraints, FileRoundTrip) {
    ConstraintSet cs(24, 6);
    cs.weights.lambda_h = 2.0;
    cs.fixed_point(6, 0, 0.2);
    cs.ineq(expr::parse("x[3,1] - x[3,2]"), Hardness::Soft);
    cs.eq(expr::parse("mean(x[0:24,3:4]) - 100"));
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::GlobalMinAt, 10, 3, {}});
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::Ohlc, 0, 0, {}});
    cs.trend(random_series(24, 6, 3));
    const std::string path = ctsg::test::temp_path("roundtrip.toml");
    save_constraints(cs, path);
    const ConstraintSet back = load_constraints(path);
    ASSERT_EQ(back.size(), cs.size());
    EXPECT_EQ(back.weights.lambda_h, 2.0);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto &a = cs.items()[i], &b = back.items()[i];
        EXPECT_EQ(a.kind, b.kind);
        EXPECT_EQ(a.hardness, b.hardness);
        EXPECT_EQ(a.describe(), b.describe());
        if (a.kind == ConstraintKind::Trend) {
            EXPECT_EQ(a.trend, b.trend);
        }
    }
    // Same penalty everywhere.
    const TimeSeries x = random_series(24, 6, 8);
    EXPECT_EQ(penalty(cs, x), penalty(back, x));
}

TEST(Constraints, FileErrors) {
    const std::string path = ctsg::test::temp_path("bad.toml");
    std::ofstream(path) << "[[constraint]]\nkind = \"wobble\"\n";
    EXPECT_THROW(load_constraints(path), ConfigError);
    std::ofstream(path) << "[[constraint]]\nkind = \"ineq\"\nexpr = \"x[1,\"\n";
    EXPECT_THROW(load_constraints(path), ConfigError);
    EXPECT_THROW(load_constraints(ctsg::test::temp_path("missing.toml")), IoError);
}

TEST(LinearForm, AgreesWithEvaluation) {
    Rng rng(31);
    int linear = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const ExprPtr e = random_expr(rng, 5, 3, 4);
        const auto f = expr::linear_form(*e, 3);
        if (!f) continue;
        ++linear;
        const TimeSeries x = random_series(5, 3, 500 + static_cast<std::uint64_t>(trial));
        double v = f->offset;
        for (auto [i, c] : f->terms) v += c * x[i];
        EXPECT_NEAR(v, expr::evaluate(*e, x), 1e-9 * (1.0 + std::abs(v)));
    }
    EXPECT_GT(linear, 30);
    EXPECT_FALSE(expr::linear_form(*expr::parse("abs(x[0,0])"), 1));
    EXPECT_FALSE(expr::linear_form(*expr::parse("x[0,0] * x[1,0]"), 1));
    EXPECT_TRUE(expr::linear_form(*expr::parse("2 * (x[0,0] - mean(x[0:2,0:1])) / 4"), 1));
}

TEST(NormalizedConstraints, EquivalentAcrossTheAffineMap) {
    // A constraint in data units holds on x iff its normalized form holds on x'.
    Dataset ds;
    Rng rng(12);
    for (int i = 0; i < 5; ++i) {
        TimeSeries x = ctsg::test::random_tensor({6, 3}, rng, 10.0);
        for (std::size_t t = 0; t < 6; ++t) x.at(t, 2) = 4.0;  // constant feature
        ds.samples.push_back(std::move(x));
    }
    const Normalization norm = fit_normalization(ds);
    ConstraintSet cs(6, 3);
    cs.ineq(expr::parse("x[1,0] - x[4,1] + 3"));
    cs.eq(expr::parse("mean(x[0:6,0:3]) - 2"));
    cs.ineq(expr::parse("sum(x[0:2,0:1]) - square(x[3,1]) / 50"));
    cs.ineq(expr::parse("min(x[0:6,1:2]) + 5"));
    cs.builtin(BuiltinSpec{BuiltinSpec::Kind::GlobalMinAt, 2, 0, {}});
    cs.fixed_point(0, 2, 4.0);
    const ConstraintSet ncs = normalized_constraints(cs, norm);
    for (int trial = 0; trial < 50; ++trial) {
        TimeSeries x = ctsg::test::random_tensor({6, 3}, rng, 10.0);
        for (std::size_t t = 0; t < 6; ++t) x.at(t, 2) = 4.0;
        const TimeSeries xn = normalize_series(x, norm);
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const auto& c = cs.items()[i];
            if (c.kind == ConstraintKind::FixedPoint) {
                EXPECT_EQ(ncs.items()[i].value, 0.0);
                continue;
            }
            EXPECT_NEAR(expr::evaluate(*ncs.items()[i].expr, xn), expr::evaluate(*c.expr, x), 1e-9) << c.describe();
        }
    }
    ConstraintSet bad(6, 3);
    bad.fixed_point(0, 2, 5.0);
    EXPECT_THROW(normalized_constraints(bad, norm), ConstraintError);
    ConstraintSet mixed(6, 3);
    mixed.ineq(expr::parse("min(x[0:6,0:2])"));
    EXPECT_THROW(normalized_constraints(mixed, norm), ConstraintError);
}
