#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ctsg/linalg.hpp"

namespace ctsg::qp {

using linalg::Mat;
using linalg::Vec;

/// min ½xᵀGx + gᵀx  s.t.  Aeq x = beq,  Ain x >= bin,  lower <= x <= upper.
/// G must be positive definite. Empty bound vectors mean unbounded; entries may be ±inf.
struct Problem {
    Mat G;
    Vec g;
    Mat Aeq;
    Vec beq;
    Mat Ain;
    Vec bin;
    Vec lower;
    Vec upper;
};

enum class Status { Optimal, Infeasible, NotConvex, IterationLimit };

struct Result {
    Status status = Status::Infeasible;
    Vec x;
    Vec lambda_eq;   // multipliers of Aeq x = beq (sign free)
    Vec lambda_in;   // multipliers of Ain x >= bin (non-negative)
    Vec lambda_lower;
    Vec lambda_upper;
    double objective = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

// Active-set factorization of Goldfarb and Idnani: J = L⁻ᵀQ, R upper
// triangular, with the active normals N satisfying L⁻¹N = Q [R; 0].
class ActiveSet {
public:
    ActiveSet(Mat J, Eigen::Index n) : J_(std::move(J)), R_(Mat::Zero(n, n)), n_(n) {}

    Eigen::Index size() const { return q_; }

    // d = Jᵀ np, z = J₂ d₂ (primal direction), r = R⁻¹ d₁ (dual direction)
    void directions(const Vec& np, Vec& d, Vec& z, Vec& r) const {
        d = J_.transpose() * np;
        from_d(d, z, r);
    }

    // np = sign·e_j
    void directions_unit(Eigen::Index j, double sign, Vec& d, Vec& z, Vec& r) const {
        d = sign * J_.row(j).transpose();
        from_d(d, z, r);
    }

    void from_d(const Vec& d, Vec& z, Vec& r) const {
        z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
        r = Vec::Zero(q_);
        for (Eigen::Index i = q_ - 1; i >= 0; --i) {
            double s = d(i);
            for (Eigen::Index j = i + 1; j < q_; ++j) s -= R_(i, j) * r(j);
            r(i) = s / R_(i, i);
        }
    }

    // Adds the normal whose d = Jᵀ np was computed last. False when it is
    // linearly dependent on the active ones.
    bool add(Vec d) {
        for (Eigen::Index j = n_ - 1; j >= q_ + 1; --j) {
            double cc = d(j - 1), ss = d(j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            d(j) = 0.0;
            cc /= h;
            ss /= h;
            if (cc < 0.0) {
                cc = -cc;
                ss = -ss;
                d(j - 1) = -h;
            } else {
                d(j - 1) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double t1 = J_(k, j - 1), t2 = J_(k, j);
                J_(k, j - 1) = t1 * cc + t2 * ss;
                J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
            }
        }
        ++q_;
        for (Eigen::Index i = 0; i < q_; ++i) R_(i, q_ - 1) = d(i);
        if (std::abs(d(q_ - 1)) <= std::numeric_limits<double>::epsilon() * r_norm_) return false;
        r_norm_ = std::max(r_norm_, std::abs(d(q_ - 1)));
        return true;
    }

    // Removes active position `pos` and restores the triangular form.
    void remove(Eigen::Index pos) {
        for (Eigen::Index i = pos; i < q_ - 1; ++i) R_.col(i) = R_.col(i + 1);
        R_.col(q_ - 1).setZero();
        --q_;
        for (Eigen::Index j = pos; j < q_; ++j) {
            double cc = R_(j, j), ss = R_(j + 1, j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            cc /= h;
            ss /= h;
            R_(j + 1, j) = 0.0;
            if (cc < 0.0) {
                R_(j, j) = -h;
                cc = -cc;
                ss = -ss;
            } else {
                R_(j, j) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Eigen::Index k = j + 1; k < q_; ++k) {
                const double t1 = R_(j, k), t2 = R_(j + 1, k);
                R_(j, k) = t1 * cc + t2 * ss;
                R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
            }
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double t1 = J_(k, j), t2 = J_(k, j + 1);
                J_(k, j) = t1 * cc + t2 * ss;
                J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
            }
        }
    }

private:
    Mat J_;
    Mat R_;
    Eigen::Index n_;
    Eigen::Index q_ = 0;
    double r_norm_ = 1.0;
};

}  // namespace detail

/// Dual active-set method of Goldfarb and Idnani.
inline Result solve(const Problem& p, std::size_t max_iter = 0) {
    const Eigen::Index n = p.G.rows();
    const Eigen::Index me = p.Aeq.rows(), mg = p.Ain.rows();
    const double inf = std::numeric_limits<double>::infinity();
    const double eps = std::numeric_limits<double>::epsilon();

    // Inequality rows: general rows first, then finite simple bounds.
    struct Row {
        Eigen::Index index;   // row of Ain, or variable for a bound
        double sign;          // 0 for a general row, ±1 for x_j >= b / −x_j >= b
        double b;
    };
    std::vector<Row> rows;
    for (Eigen::Index i = 0; i < mg; ++i) rows.push_back({i, 0.0, p.bin(i)});
    if (p.lower.size()) {
        for (Eigen::Index j = 0; j < n; ++j)
            if (std::isfinite(p.lower(j))) rows.push_back({j, 1.0, p.lower(j)});
    }
    if (p.upper.size()) {
        for (Eigen::Index j = 0; j < n; ++j)
            if (std::isfinite(p.upper(j))) rows.push_back({j, -1.0, -p.upper(j)});
    }
    const auto mi = static_cast<Eigen::Index>(rows.size());
    if (max_iter == 0) max_iter = static_cast<std::size_t>(50 * (n + me + mi) + 100);

    Result res;
    res.lambda_eq = Vec::Zero(me);
    res.lambda_in = Vec::Zero(mg);
    res.lambda_lower = Vec::Zero(p.lower.size());
    res.lambda_upper = Vec::Zero(p.upper.size());

    Eigen::LLT<Mat> llt(p.G);
    if (llt.info() != Eigen::Success) {
        res.status = Status::NotConvex;
        res.x = Vec::Zero(n);
        return res;
    }
    const Mat Lt = llt.matrixU();
    const Mat J0 = Lt.triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));
    detail::ActiveSet act(J0, n);

    Vec x = llt.solve(-p.g);
    double f = 0.5 * p.g.dot(x);

    // active[k] = constraint id: equality i is i, inequality row k is me + k
    std::vector<Eigen::Index> active;
    std::vector<double> u;
    Vec d, z, r;

    for (Eigen::Index i = 0; i < me; ++i) {
        const Vec np = p.Aeq.row(i).transpose();
        act.directions(np, d, z, r);
        double t2 = 0.0;
        const double znp = z.dot(np);
        if (z.squaredNorm() > eps) t2 = (p.beq(i) - np.dot(x)) / znp;
        x += t2 * z;
        for (std::size_t k = 0; k < u.size(); ++k) u[k] -= t2 * r(static_cast<Eigen::Index>(k));
        u.push_back(t2);
        active.push_back(i);
        f += 0.5 * t2 * t2 * znp;
        if (!act.add(d)) {
            // dependent row: consistent only if already satisfied
            if (std::abs(np.dot(x) - p.beq(i)) > 1e-9 * (1.0 + std::abs(p.beq(i)))) {
                res.status = Status::Infeasible;
                res.x = x;
                return res;
            }
            act.remove(act.size() - 1);
            active.pop_back();
            u.pop_back();
        }
    }

    auto row_dirs = [&](Eigen::Index k) {
        const Row& rw = rows[static_cast<std::size_t>(k)];
        if (rw.sign == 0.0) act.directions(p.Ain.row(rw.index).transpose(), d, z, r);
        else act.directions_unit(rw.index, rw.sign, d, z, r);
    };
    auto row_dot = [&](Eigen::Index k, const Vec& v) {
        const Row& rw = rows[static_cast<std::size_t>(k)];
        return rw.sign == 0.0 ? p.Ain.row(rw.index).dot(v) : rw.sign * v(rw.index);
    };
    auto slack = [&](Eigen::Index k) { return row_dot(k, x) - rows[static_cast<std::size_t>(k)].b; };

    std::vector<bool> is_active(static_cast<std::size_t>(mi), false), excluded(static_cast<std::size_t>(mi), false);
    Vec s(mi);
    auto all_slacks = [&] {
        if (mg) s.head(mg) = p.Ain * x - p.bin;
        for (Eigen::Index k = mg; k < mi; ++k) s(k) = slack(k);
    };
    double scale = 1.0;
    for (const Row& rw : rows) scale = std::max(scale, std::abs(rw.b));

    auto finish = [&](Status st) {
        res.status = st;
        res.x = x;
        res.objective = f;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index c = active[k];
            if (c < me) {
                res.lambda_eq(c) = u[k];
                continue;
            }
            const Row& rw = rows[static_cast<std::size_t>(c - me)];
            if (rw.sign == 0.0) res.lambda_in(rw.index) = u[k];
            else if (rw.sign > 0.0) res.lambda_lower(rw.index) = u[k];
            else res.lambda_upper(rw.index) = u[k];
        }
        return res;
    };

    const std::size_t n_eq_active = active.size();
    for (;;) {
        // Step 1: pick the most violated inactive inequality.
        if (++res.iterations > max_iter) return finish(Status::IterationLimit);
        all_slacks();
        const std::vector<Eigen::Index> active_old = active;
        const std::vector<double> u_old = u;
        const Vec x_old = x;

    step2:
        Eigen::Index ip = -1;
        double worst = -1e-12 * scale;
        for (Eigen::Index i = 0; i < mi; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            if (!is_active[ui] && !excluded[ui] && s(i) < worst) {
                worst = s(i);
                ip = i;
            }
        }
        if (ip < 0) return finish(Status::Optimal);
        double u_new = 0.0;

        for (;;) {
            if (++res.iterations > max_iter) return finish(Status::IterationLimit);
            row_dirs(ip);
            // partial step length: first active inequality whose multiplier hits 0
            double t1 = inf;
            std::size_t drop = 0;
            for (std::size_t k = n_eq_active; k < active.size(); ++k) {
                const double rk = r(static_cast<Eigen::Index>(k));
                if (active[k] >= me && rk > 0.0 && u[k] / rk < t1) {
                    t1 = u[k] / rk;
                    drop = k;
                }
            }
            double t2 = inf;
            const double znp = row_dot(ip, z);
            if (z.squaredNorm() > eps) {
                t2 = -s(ip) / znp;
                if (t2 < 0.0) t2 = inf;
            }
            const double t = std::min(t1, t2);
            if (t == inf) return finish(Status::Infeasible);

            if (t2 == inf) {
                // step in dual space only
                for (std::size_t k = 0; k < u.size(); ++k) u[k] -= t * r(static_cast<Eigen::Index>(k));
                u_new += t;
                is_active[static_cast<std::size_t>(active[drop] - me)] = false;
                act.remove(static_cast<Eigen::Index>(drop));
                active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
                u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
                continue;
            }

            x += t * z;
            f += t * znp * (0.5 * t + u_new);
            for (std::size_t k = 0; k < u.size(); ++k) u[k] -= t * r(static_cast<Eigen::Index>(k));
            u_new += t;

            if (t == t2) {
                if (!act.add(d)) {
                    // degenerate: roll back and never pick this row again
                    excluded[static_cast<std::size_t>(ip)] = true;
                    act = detail::ActiveSet(J0, n);
                    for (Eigen::Index c : active_old) {
                        if (c < me) act.directions(p.Aeq.row(c).transpose(), d, z, r);
                        else row_dirs(c - me);
                        act.add(d);
                    }
                    std::fill(is_active.begin(), is_active.end(), false);
                    for (Eigen::Index c : active_old)
                        if (c >= me) is_active[static_cast<std::size_t>(c - me)] = true;
                    active = active_old;
                    u = u_old;
                    x = x_old;
                    f = 0.5 * x.dot(p.G * x) + p.g.dot(x);
                    all_slacks();
                    goto step2;
                }
                active.push_back(me + ip);
                u.push_back(u_new);
                is_active[static_cast<std::size_t>(ip)] = true;
                break;
            }

            // partial step: drop the blocking constraint and retry the same row
            is_active[static_cast<std::size_t>(active[drop] - me)] = false;
            act.remove(static_cast<Eigen::Index>(drop));
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
            u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
            s(ip) = slack(ip);
        }
    }
}

}  // namespace ctsg::qp
