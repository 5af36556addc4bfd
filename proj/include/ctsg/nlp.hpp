#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ctsg/error.hpp"
#include "ctsg/linalg.hpp"
#include "ctsg/qp.hpp"

namespace ctsg {

/// Value and gradient of a smooth function; grad is resized by the caller.
using NlpFunction = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

/// Constraints are h(x) = 0 and g(x) <= 0.
struct NlpProblem {
    NlpFunction objective;
    std::vector<NlpFunction> eq;
    std::vector<NlpFunction> ineq;
    std::vector<double> lower;   // empty means unbounded; ±inf allowed per entry
    std::vector<double> upper;
};

enum class NlpStatus { Success, Infeasible };

inline const char* to_string(NlpStatus s) { return s == NlpStatus::Success ? "success" : "infeasible"; }

struct NlpResult {
    NlpStatus status = NlpStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    double max_violation = 0.0;
    std::size_t iterations = 0;
    bool used_fallback = false;
    std::string message;
};

namespace detail {

struct NlpEval {
    double f = 0.0;
    linalg::Vec grad;
    linalg::Vec h, g;
    linalg::Mat Jh, Jg;   // rows are constraint gradients
};

class NlpContext {
public:
    NlpContext(const NlpProblem& p, std::size_t n) : p_(p), n_(n), buf_(n) {
        lo_ = linalg::Vec::Constant(static_cast<Eigen::Index>(n), -std::numeric_limits<double>::infinity());
        hi_ = linalg::Vec::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
        if (!p.lower.empty()) {
            if (p.lower.size() != n) throw DimensionError("nlp_solve: lower bound size differs from x0");
            lo_ = linalg::to_eigen(p.lower);
        }
        if (!p.upper.empty()) {
            if (p.upper.size() != n) throw DimensionError("nlp_solve: upper bound size differs from x0");
            hi_ = linalg::to_eigen(p.upper);
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (lo_(static_cast<Eigen::Index>(i)) > hi_(static_cast<Eigen::Index>(i))) {
                throw UsageError("nlp_solve: lower bound above upper bound at " + std::to_string(i));
            }
        }
    }

    const linalg::Vec& lo() const { return lo_; }
    const linalg::Vec& hi() const { return hi_; }

    linalg::Vec clip(linalg::Vec x) const { return x.cwiseMax(lo_).cwiseMin(hi_); }

    double call(const NlpFunction& fn, const linalg::Vec& x, linalg::Vec* grad) {
        const std::vector<double> xs = linalg::to_std(x);
        std::fill(buf_.begin(), buf_.end(), 0.0);
        const double v = fn(xs, buf_);
        if (!std::isfinite(v)) throw NumericError("nlp_solve: non-finite function value");
        if (grad) *grad = linalg::to_eigen(buf_);
        return v;
    }

    NlpEval eval(const linalg::Vec& x, bool with_grad = true) {
        NlpEval e;
        const auto n = static_cast<Eigen::Index>(n_);
        linalg::Vec gr;
        e.f = call(p_.objective, x, with_grad ? &e.grad : nullptr);
        e.h.resize(static_cast<Eigen::Index>(p_.eq.size()));
        e.g.resize(static_cast<Eigen::Index>(p_.ineq.size()));
        if (with_grad) {
            e.Jh.resize(e.h.size(), n);
            e.Jg.resize(e.g.size(), n);
        }
        for (std::size_t i = 0; i < p_.eq.size(); ++i) {
            e.h(static_cast<Eigen::Index>(i)) = call(p_.eq[i], x, with_grad ? &gr : nullptr);
            if (with_grad) e.Jh.row(static_cast<Eigen::Index>(i)) = gr.transpose();
        }
        for (std::size_t i = 0; i < p_.ineq.size(); ++i) {
            e.g(static_cast<Eigen::Index>(i)) = call(p_.ineq[i], x, with_grad ? &gr : nullptr);
            if (with_grad) e.Jg.row(static_cast<Eigen::Index>(i)) = gr.transpose();
        }
        return e;
    }

    static double violation(const NlpEval& e) {
        double v = 0.0;
        if (e.h.size()) v = std::max(v, e.h.cwiseAbs().maxCoeff());
        if (e.g.size()) v = std::max(v, e.g.maxCoeff());
        return v;
    }

    static double l1_violation(const NlpEval& e) { return e.h.cwiseAbs().sum() + e.g.cwiseMax(0.0).sum(); }

private:
    const NlpProblem& p_;
    std::size_t n_;
    std::vector<double> buf_;
    linalg::Vec lo_, hi_;
};

// Projected spectral gradient on the box: minimizes fn from x.
inline linalg::Vec projected_descent(NlpContext& ctx, const std::function<double(const linalg::Vec&, linalg::Vec*)>& fn,
                                     linalg::Vec x, std::size_t max_iter, double tol) {
    linalg::Vec g;
    double fx = fn(x, &g);
    double step = 1.0;
    linalg::Vec x_prev, g_prev;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const linalg::Vec pg = ctx.clip(x - g) - x;
        if (pg.lpNorm<Eigen::Infinity>() <= tol) break;
        double alpha = step;
        linalg::Vec xn;
        double fn_val = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            xn = ctx.clip(x - alpha * g);
            fn_val = fn(xn, nullptr);
            if (fn_val <= fx + 1e-4 * g.dot(xn - x)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        x_prev = x;
        g_prev = g;
        x = xn;
        fx = fn(x, &g);
        const linalg::Vec s = x - x_prev, y = g - g_prev;
        const double sy = s.dot(y);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : 1.0;
    }
    return x;
}

}  // namespace detail

/// Local solver for smooth problems: SQP with a damped BFGS Hessian, L1 merit
/// line search, and an augmented-Lagrangian restart when the QP subproblem is
/// inconsistent or the line search stalls. Bounds are kept exactly.
inline NlpResult nlp_solve(const std::vector<double>& x0, const NlpProblem& prob, double tol = 1e-6,
                           std::size_t max_iter = 200) {
    if (!prob.objective) throw UsageError("nlp_solve: missing objective");
    if (!(tol > 0.0)) throw UsageError("nlp_solve: tolerance must be positive");
    const std::size_t n = x0.size();
    const auto N = static_cast<Eigen::Index>(n);
    detail::NlpContext ctx(prob, n);
    const auto me = static_cast<Eigen::Index>(prob.eq.size());
    const auto mi = static_cast<Eigen::Index>(prob.ineq.size());

    NlpResult out;
    linalg::Vec x = ctx.clip(linalg::to_eigen(x0));
    detail::NlpEval e = ctx.eval(x);
    linalg::Mat B = linalg::Mat::Identity(N, N);
    double mu = 1.0;
    bool stalled = false;

    // Steps are limited to an ∞-norm radius that grows after full steps and
    // shrinks to the accepted length otherwise.
    const double max_radius = 0.25 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    double radius = 0.4 * max_radius;

    auto converged = [&](const linalg::Vec& d, const qp::Result& r) {
        if (detail::NlpContext::violation(e) > tol) return false;
        double comp = std::abs(e.grad.dot(d));
        for (Eigen::Index i = 0; i < mi; ++i) comp += std::abs(r.lambda_in(i) * e.g(i));
        // comp is quadratic in the distance to a stationary point, so compare it against tol²
        return d.lpNorm<Eigen::Infinity>() <= tol || comp <= tol * tol * (1.0 + std::abs(e.f));
    };

    auto subproblem = [&](double rad) {
        qp::Problem q;
        q.G = B;
        q.g = e.grad;
        q.Aeq = e.Jh;
        q.beq = -e.h;
        q.Ain = -e.Jg;
        q.bin = e.g;
        q.lower = (ctx.lo() - x).cwiseMax(-rad);
        q.upper = (ctx.hi() - x).cwiseMin(rad);
        return qp::solve(q);
    };

    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        qp::Result r = subproblem(radius);
        if (r.status == qp::Status::NotConvex) {
            // BFGS update lost definiteness to roundoff
            B = linalg::Mat::Identity(N, N);
            r = subproblem(radius);
        }
        if (r.status == qp::Status::Infeasible && std::isfinite(radius)) r = subproblem(std::numeric_limits<double>::infinity());
        if (r.status != qp::Status::Optimal) {
            stalled = true;
            break;
        }
        const linalg::Vec& d = r.x;
        if (converged(d, r)) {
            out.status = NlpStatus::Success;
            break;
        }

        double lam_max = 0.0;
        if (me) lam_max = std::max(lam_max, r.lambda_eq.cwiseAbs().maxCoeff());
        if (mi) lam_max = std::max(lam_max, r.lambda_in.maxCoeff());
        mu = std::max(mu, lam_max * 1.1 + 1e-8);

        const double phi0 = e.f + mu * detail::NlpContext::l1_violation(e);
        const double dphi = e.grad.dot(d) - mu * detail::NlpContext::l1_violation(e);
        double alpha = 1.0;
        linalg::Vec xn;
        detail::NlpEval en;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            xn = ctx.clip(x + alpha * d);
            en = ctx.eval(xn, false);
            const double phi = en.f + mu * detail::NlpContext::l1_violation(en);
            if (phi <= phi0 + 1e-4 * alpha * std::min(dphi, 0.0)) {
                ok = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!ok) {
            stalled = true;
            break;
        }
        radius = alpha == 1.0 ? std::min(2.0 * radius, max_radius) : std::max(alpha * d.lpNorm<Eigen::Infinity>(), 1e-10);
        en = ctx.eval(xn);

        // damped BFGS on the Lagrangian gradient
        auto lag_grad = [&](const detail::NlpEval& ev) {
            linalg::Vec gl = ev.grad;
            if (me) gl -= ev.Jh.transpose() * r.lambda_eq;
            if (mi) gl += ev.Jg.transpose() * r.lambda_in;
            return gl;
        };
        const linalg::Vec s = xn - x;
        linalg::Vec y = lag_grad(en) - lag_grad(e);
        const linalg::Vec Bs = B * s;
        const double sBs = s.dot(Bs);
        if (sBs > 1e-16) {
            double sy = s.dot(y);
            if (sy < 0.2 * sBs) {
                const double th = 0.8 * sBs / (sBs - sy);
                y = th * y + (1.0 - th) * Bs;
                sy = s.dot(y);
            }
            B += (y * y.transpose()) / sy - (Bs * Bs.transpose()) / sBs;
            B = 0.5 * (B + B.transpose());
        }
        const double df = std::abs(en.f - e.f);
        x = xn;
        e = std::move(en);
        if (s.lpNorm<Eigen::Infinity>() <= tol * 1e-3 && df <= tol * 1e-3 && detail::NlpContext::violation(e) <= tol) {
            out.status = NlpStatus::Success;
            break;
        }
    }
    out.iterations = it;

    if (out.status != NlpStatus::Success && (stalled || it == max_iter)) {
        // augmented Lagrangian on the box
        out.used_fallback = true;
        linalg::Vec lh = linalg::Vec::Zero(me), lg = linalg::Vec::Zero(mi);
        double rho = 10.0;
        double prev_viol = detail::NlpContext::violation(e), best_viol = prev_viol;
        std::size_t no_progress = 0;
        for (std::size_t outer = 0; outer < 20 && no_progress < 3; ++outer) {
            auto merit = [&](const linalg::Vec& z, linalg::Vec* grad) {
                detail::NlpEval ev = ctx.eval(z, grad != nullptr);
                double v = ev.f;
                if (grad) *grad = ev.grad;
                for (Eigen::Index i = 0; i < me; ++i) {
                    v += lh(i) * ev.h(i) + 0.5 * rho * ev.h(i) * ev.h(i);
                    if (grad) *grad += (lh(i) + rho * ev.h(i)) * ev.Jh.row(i).transpose();
                }
                for (Eigen::Index i = 0; i < mi; ++i) {
                    const double m = std::max(0.0, lg(i) + rho * ev.g(i));
                    v += (m * m - lg(i) * lg(i)) / (2.0 * rho);
                    if (grad && m > 0.0) *grad += m * ev.Jg.row(i).transpose();
                }
                return v;
            };
            x = detail::projected_descent(ctx, merit, x, 300, tol * 1e-2);
            e = ctx.eval(x);
            for (Eigen::Index i = 0; i < me; ++i) lh(i) += rho * e.h(i);
            for (Eigen::Index i = 0; i < mi; ++i) lg(i) = std::max(0.0, lg(i) + rho * e.g(i));
            const double viol = detail::NlpContext::violation(e);
            if (viol <= tol) {
                out.status = NlpStatus::Success;
                break;
            }
            if (viol > 0.25 * prev_viol) rho = std::min(rho * 10.0, 1e12);
            no_progress = viol < 0.99 * best_viol ? 0 : no_progress + 1;
            best_viol = std::min(best_viol, viol);
            prev_viol = viol;
        }
    }

    out.x = linalg::to_std(x);
    out.objective = e.f;
    out.max_violation = detail::NlpContext::violation(e);
    if (out.status == NlpStatus::Success && out.max_violation > tol) out.status = NlpStatus::Infeasible;
    out.message = out.status == NlpStatus::Success ? "converged"
                  : stalled                        ? "no feasible descent step"
                                                   : "iteration limit";
    return out;
}

}  // namespace ctsg
