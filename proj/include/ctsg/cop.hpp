#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/constraints.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/error.hpp"
#include "ctsg/nlp.hpp"
#include "ctsg/parallel.hpp"
#include "ctsg/rng.hpp"

namespace ctsg {

// ---------------------------------------------------------------------------
// Realism properties

/// Percentage change r(t) = (x_t − x_{t−1}) / x_{t−1}, per feature; shape (L−1)×K.
inline TimeSeries returns(const TimeSeries& x) {
    check_series(x, "returns input");
    const std::size_t L = x.dim(0), K = x.dim(1);
    if (L < 2) throw DimensionError("returns: series needs at least two steps");
    TimeSeries r = Tensor::zeros({L - 1, K});
    for (std::size_t t = 1; t < L; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            const double prev = x.at(t - 1, j);
            if (prev == 0.0) {
                throw NumericError("returns: zero value at step " + std::to_string(t - 1) + ", feature " +
                                   std::to_string(j));
            }
            r.at(t - 1, j) = (x.at(t, j) - prev) / prev;
        }
    }
    return r;
}

/// ρ(τ) for τ = 1..lag: mean over available pairs of the centred product,
/// divided by the population variance.
inline std::vector<double> autocorr(const std::vector<double>& x, std::size_t lag) {
    const std::size_t n = x.size();
    if (lag == 0 || lag >= n) throw UsageError("autocorr: lag must be in [1, n)");
    const double mu = mean_of(x);
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) throw NumericError("autocorr: series has zero variance");
    std::vector<double> out(lag);
    for (std::size_t tau = 1; tau <= lag; ++tau) {
        double s = 0.0;
        for (std::size_t t = 0; t + tau < n; ++t) s += (x[t + tau] - mu) * (x[t] - mu);
        out[tau - 1] = s / static_cast<double>(n - tau) / var;
    }
    return out;
}

struct RealismSpec {
    enum class Kind { AutocorrOfReturns, AutocorrOfValues } kind = Kind::AutocorrOfReturns;
    std::size_t lag = 5;

    void validate(std::size_t L) const {
        const std::size_t n = kind == Kind::AutocorrOfReturns ? L - 1 : L;
        if (L < 2 || lag == 0 || lag >= n) {
            throw ConfigError("realism lag " + std::to_string(lag) + " must be in [1, " + std::to_string(n) + ")");
        }
    }
};

inline const char* to_string(RealismSpec::Kind k) {
    return k == RealismSpec::Kind::AutocorrOfReturns ? "autocorr_of_returns" : "autocorr_of_values";
}

inline RealismSpec::Kind parse_realism_kind(const std::string& s) {
    if (s == "autocorr_of_returns" || s == "returns") return RealismSpec::Kind::AutocorrOfReturns;
    if (s == "autocorr_of_values" || s == "values") return RealismSpec::Kind::AutocorrOfValues;
    throw ConfigError("unknown realism property '" + s + "' (autocorr_of_returns, autocorr_of_values)");
}

/// z(x): per-feature autocorrelations concatenated (feature-major).
inline std::vector<double> realism_property(const TimeSeries& x, const RealismSpec& spec) {
    spec.validate(x.dim(0));
    const TimeSeries base = spec.kind == RealismSpec::Kind::AutocorrOfReturns ? returns(x) : x;
    std::vector<double> z;
    for (std::size_t j = 0; j < base.dim(1); ++j) {
        const auto a = autocorr(column(base, j), spec.lag);
        z.insert(z.end(), a.begin(), a.end());
    }
    return z;
}

/// e(z(x), z(ref)) = L2 norm of the property difference.
inline double realism_error(const TimeSeries& x, const TimeSeries& ref, const RealismSpec& spec) {
    const auto a = realism_property(x, spec), b = realism_property(ref, spec);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

namespace detail {

// Traced squared realism error. X is the flat {1, L*K} series.
// Squared realism error ‖z(x) − z_ref‖² of a flat {L, K} series and its gradient in x.
inline double realism_sq_error(std::span<const double> x, std::size_t L, std::size_t K,
                               const std::vector<double>& z_ref, const RealismSpec& spec, std::vector<double>& grad) {
    const bool rets = spec.kind == RealismSpec::Kind::AutocorrOfReturns;
    grad.assign(L * K, 0.0);
    double acc = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < K; ++j) {
        auto at = [&](std::size_t t) { return x[t * K + j]; };
        const std::size_t n = rets ? L - 1 : L;
        std::vector<double> r(n);
        for (std::size_t t = 0; t < n; ++t) {
            if (!rets) {
                r[t] = at(t);
            } else if (at(t) == 0.0) {
                throw NumericError("returns: zero value at step " + std::to_string(t) + ", feature " + std::to_string(j));
            } else {
                r[t] = at(t + 1) / at(t) - 1.0;
            }
        }
        const double nd = static_cast<double>(n);
        double m = 0.0;
        for (double v : r) m += v;
        m /= nd;
        std::vector<double> c(n);
        double var = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            c[t] = r[t] - m;
            var += c[t] * c[t];
        }
        var /= nd;
        if (!(var > 0.0)) throw NumericError("autocorr: series has zero variance");

        std::vector<double> gr(n, 0.0), da(n);
        for (std::size_t tau = 1; tau <= spec.lag; ++tau) {
            const double w = 1.0 / static_cast<double>(n - tau);
            double a = 0.0;
            std::fill(da.begin(), da.end(), 0.0);
            for (std::size_t t = 0; t + tau < n; ++t) {
                a += c[t] * c[t + tau];
                da[t] += c[t + tau] * w;
                da[t + tau] += c[t] * w;
            }
            a *= w;
            const double rho = a / var, d = rho - z_ref[k++];
            acc += d * d;
            double da_mean = 0.0;
            for (double v : da) da_mean += v;
            da_mean /= nd;
            // centring removes the mean component of da; dvar/dr = 2c/n already has none
            for (std::size_t t = 0; t < n; ++t) gr[t] += 2.0 * d * ((da[t] - da_mean) - rho * 2.0 * c[t] / nd) / var;
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (!rets) {
                grad[t * K + j] += gr[t];
            } else {
                grad[(t + 1) * K + j] += gr[t] / at(t);
                grad[t * K + j] -= gr[t] * at(t + 1) / (at(t) * at(t));
            }
        }
    }
    return acc;
}

inline void collect_rows(const Expr& e, std::set<std::size_t>& rows) {
    if (e.op == Expr::Op::Point || e.is_aggregate()) {
        const std::size_t r1 = e.op == Expr::Op::Point ? e.r0 + 1 : e.r1;
        for (std::size_t r = e.r0; r < r1; ++r) rows.insert(r);
    }
    if (e.lhs) collect_rows(*e.lhs, rows);
    if (e.rhs) collect_rows(*e.rhs, rows);
}

// Rows a hard constraint reads.
inline std::set<std::size_t> constraint_rows(const Constraint& c) {
    std::set<std::size_t> rows;
    if (c.kind == ConstraintKind::FixedPoint) rows.insert(c.row);
    else if (c.expr) collect_rows(*c.expr, rows);
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration and report

enum class CopMode { Generate, Finetune };

inline const char* to_string(CopMode m) { return m == CopMode::Generate ? "generate" : "finetune"; }

inline CopMode parse_cop_mode(const std::string& s) {
    if (s == "generate") return CopMode::Generate;
    if (s == "finetune") return CopMode::Finetune;
    throw ConfigError("unknown COP mode '" + s + "' (generate, finetune)");
}

struct CopConfig {
    double budget = 0.1;
    std::size_t window = 3;
    double overlap = 0.5;
    std::size_t retries = 10;
    std::size_t iterations = 2;
    std::optional<double> trend_weight;   // unset: 1 with a trend, 0 without
    CopMode mode = CopMode::Generate;
    double tol = 1e-6;                    // solver tolerance
    std::size_t max_iter = 200;           // solver iterations per window
    double report_tol = 1e-4;             // hard-constraint verification tolerance
    std::uint64_t seed = 0;               // start perturbation in generate mode

    void validate() const {
        if (!(budget > 0.0)) throw ConfigError("COP budget must be positive");
        if (window < 2) throw ConfigError("COP window size must be at least 2");
        if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("COP window overlap must be in [0, 1)");
        if (retries < 1 || iterations < 1) throw ConfigError("COP retries and iterations must be at least 1");
        if (trend_weight && !(*trend_weight >= 0.0 && *trend_weight <= 1.0)) {
            throw ConfigError("COP trend weight must be in [0, 1]");
        }
        if (!(tol > 0.0) || !(report_tol >= 0.0)) throw ConfigError("COP tolerances must be positive");
    }
};

enum class SolveStatus { Success, Infeasible, MaxRetries };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Success: return "success";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxRetries: return "max-retries";
    }
    return "?";
}

struct SolveReport {
    SolveStatus status = SolveStatus::MaxRetries;
    std::size_t retry = 0;        // r of the accepted attempt (budget b·2^r)
    double budget = 0.0;          // b·2^r
    double objective = 0.0;       // f of the returned series, in data units
    double realism_error = 0.0;
    std::size_t window = 0;       // window size actually used
    std::size_t windows_accepted = 0;
    std::size_t solves = 0;
    std::vector<Violation> residuals;   // every hard constraint with its residual
    double wall_seconds = 0.0;
};

struct CopResult {
    std::optional<TimeSeries> series;   // empty unless status is success
    SolveReport report;
};

/// Window start/end pairs covering [0, L); the stride is ⌈θ_w(1−θ_v)⌉ and the
/// last window is aligned to the end.
inline std::vector<std::pair<std::size_t, std::size_t>> window_positions(std::size_t L, std::size_t w, double overlap) {
    w = std::min(w, L);
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(w) * (1.0 - overlap) - 1e-9)));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t b = 0;; b += stride) {
        if (b + w >= L) {
            out.emplace_back(L - w, L);
            break;
        }
        out.emplace_back(b, b + w);
    }
    return out;
}

/// Box [lo, hi] from the seed: 0.98·min and 1.02·max, widened outward for negative values.
inline std::pair<double, double> cop_bounds(const TimeSeries& seed) {
    const auto v = seed.values();
    const double mn = *std::min_element(v.begin(), v.end()), mx = *std::max_element(v.begin(), v.end());
    double lo = mn - 0.02 * std::abs(mn), hi = mx + 0.02 * std::abs(mx);
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

/// Blend of a dataset sample and a Brownian seed.
inline TimeSeries blended_seed(const TimeSeries& sample, std::uint64_t seed, double weight = 0.5) {
    const TimeSeries b = brownian_seed(sample, seed);
    TimeSeries out = sample;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = (1.0 - weight) * sample.values()[i] + weight * b.values()[i];
    return out;
}

namespace detail {

struct CopProblem {
    const TimeSeries& seed;
    const TimeSeries& ref;
    const ConstraintSet& hard;
    const TimeSeries* trend;
    double omega;
    CopMode mode;
    RealismSpec realism;
    std::vector<double> z_ref;
    double lo, hi;
    std::size_t L, K;

    // Objective to minimize, in data units.
    double objective(const TimeSeries& x) const {
        double d_seed = 0.0, d_trend = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double a = x.values()[i] - seed.values()[i];
            d_seed += a * a;
            if (trend) {
                const double b = x.values()[i] - trend->values()[i];
                d_trend += b * b;
            }
        }
        const double sign = mode == CopMode::Generate ? -1.0 : 1.0;
        return sign * (1.0 - omega) * d_seed + omega * d_trend;
    }
};

// Objective and constraint values/gradients of one window at u, cached on u
// so the solver's separate callbacks share the work. Only nonlinear
// expression constraints go through a tape.
class WindowEval {
public:
    WindowEval(const CopProblem& p, const TimeSeries& current, std::size_t b, std::size_t e, double budget,
               std::vector<const Constraint*> active)
        : p_(p), cur_(current), b_(b), e_(e), budget_(budget), active_(std::move(active)) {
        for (const Constraint* c : active_)
            linear_.push_back(c->kind == ConstraintKind::FixedPoint ? std::nullopt : expr::linear_form(*c->expr, p_.K));
        // u_k = (x_k − current_k) / scale of feature k, so price and volume columns are equally conditioned
        std::vector<double> fs(p_.K);
        for (std::size_t j = 0; j < p_.K; ++j) {
            const auto col = column(p_.seed, j);
            const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
            fs[j] = std::max(*mx - *mn, 1e-6 * (p_.hi - p_.lo));
        }
        sc_.resize(size());
        for (std::size_t k = 0; k < sc_.size(); ++k) sc_[k] = fs[k % p_.K];
        obj_scale_ = *std::max_element(fs.begin(), fs.end());
    }

    std::size_t size() const { return (e_ - b_) * p_.K; }
    std::size_t constraint_count() const { return active_.size(); }
    bool is_eq(std::size_t i) const { return active_[i]->kind != ConstraintKind::Ineq; }

    double scale(std::size_t k) const { return sc_[k]; }
    double lower(std::size_t k) const { return (p_.lo - cur_.values()[b_ * p_.K + k]) / sc_[k]; }
    double upper(std::size_t k) const { return (p_.hi - cur_.values()[b_ * p_.K + k]) / sc_[k]; }

    TimeSeries assemble(const std::vector<double>& u) const {
        TimeSeries x = cur_;
        for (std::size_t k = 0; k < u.size(); ++k) {
            double& v = x.values()[b_ * p_.K + k];
            v = std::clamp(v + sc_[k] * u[k], p_.lo, p_.hi);
        }
        return x;
    }

    // index 0 objective, 1 realism, 2.. hard constraints
    double value(std::size_t which, const std::vector<double>& u, std::vector<double>& grad) {
        refresh(u);
        std::copy(grads_[which].begin(), grads_[which].end(), grad.begin());
        return values_[which];
    }

private:
    void refresh(const std::vector<double>& u) {
        if (!values_.empty() && u == u_) return;
        u_ = u;
        const std::size_t n = size(), off = b_ * p_.K;
        const TimeSeries x = assemble(u);
        const Tensor row = x.reshaped({1, x.size()});
        values_.assign(2 + active_.size(), 0.0);
        grads_.assign(values_.size(), std::vector<double>(n, 0.0));

        // traced value of fn(X) and its gradient mapped to the window variables
        auto traced = [&](std::size_t slot, auto&& fn) {
            Graph g;
            Var X = g.leaf(row);
            Var root = fn(X);
            values_[slot] = root.value().item();
            const Tensor gx = g.backward(root)[X];
            for (std::size_t k = 0; k < n; ++k) grads_[slot][k] = gx.values()[off + k] * sc_[k];
        };

        // objective, divided by the largest feature scale squared so the solver sees O(1) values
        const double sign = p_.mode == CopMode::Generate ? -1.0 : 1.0;
        double obj = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double xv = x.values()[off + k];
            const double ds = xv - p_.seed.values()[off + k];
            double v = sign * (1.0 - p_.omega) * ds * ds, d = 2.0 * sign * (1.0 - p_.omega) * ds;
            if (p_.trend) {
                const double dt = xv - p_.trend->values()[off + k];
                v += p_.omega * dt * dt;
                d += 2.0 * p_.omega * dt;
            }
            obj += v;
            grads_[0][k] = d * sc_[k] / (obj_scale_ * obj_scale_);
        }
        values_[0] = obj / (obj_scale_ * obj_scale_);

        // realism: (e² − b'²) / b'² <= 0 with b' slightly inside the budget
        const double bb = budget_ * (1.0 - 1e-4);
        {
            std::vector<double> gx;
            values_[1] = (realism_sq_error(x.values(), p_.L, p_.K, p_.z_ref, p_.realism, gx) - bb * bb) / (bb * bb);
            for (std::size_t k = 0; k < n; ++k) grads_[1][k] = gx[off + k] * sc_[k] / (bb * bb);
        }

        for (std::size_t i = 0; i < active_.size(); ++i) {
            const Constraint* c = active_[i];
            if (c->kind == ConstraintKind::FixedPoint) {
                const std::size_t idx = c->row * p_.K + c->col;
                values_[2 + i] = x.values()[idx] - c->value;
                grads_[2 + i][idx - off] = sc_[idx - off];
            } else if (const auto& lf = linear_[i]) {
                double v = lf->offset;
                for (const auto& [idx, coef] : lf->terms) {
                    v += coef * x.values()[idx];
                    if (idx >= off && idx < off + n) grads_[2 + i][idx - off] += coef * sc_[idx - off];
                }
                values_[2 + i] = v;
            } else {
                traced(2 + i, [&](const Var& X) { return expr::evaluate(*c->expr, X, p_.K); });
            }
        }
    }

    const CopProblem& p_;
    const TimeSeries& cur_;
    std::size_t b_, e_;
    double budget_;
    std::vector<const Constraint*> active_;
    std::vector<std::optional<expr::LinearForm>> linear_;
    std::vector<double> sc_;
    double obj_scale_ = 1.0;
    std::vector<double> u_;
    std::vector<double> values_;
    std::vector<std::vector<double>> grads_;
};

struct WindowOutcome {
    bool ok = false;
    TimeSeries x;
    double objective = 0.0;
};

inline WindowOutcome solve_window(const CopProblem& p, const TimeSeries& cur, std::size_t b, std::size_t e,
                                  double budget, const CopConfig& cfg, const Rng& rng) {
    WindowOutcome out;
    std::vector<const Constraint*> active;
    for (const auto& c : p.hard.items()) {
        const auto rows = constraint_rows(c);
        const bool touches = std::any_of(rows.begin(), rows.end(), [&](std::size_t r) { return r >= b && r < e; });
        if (touches) {
            active.push_back(&c);
        } else if (residual(c, cur) > cfg.tol) {
            return out;   // violated outside the window: this window cannot fix it
        }
    }
    WindowEval ev(p, cur, b, e, budget, active);
    std::vector<double> u0(ev.size(), 0.0);
    if (p.mode == CopMode::Generate) {
        // the distance objective is flat at the seed; start slightly off it
        Rng r = rng;
        for (std::size_t k = 0; k < u0.size(); ++k) u0[k] = std::clamp(r.uniform(-0.01, 0.01), ev.lower(k), ev.upper(k));
    }
    NlpProblem np;
    np.objective = [&](const std::vector<double>& u, std::vector<double>& g) { return ev.value(0, u, g); };
    np.ineq.push_back([&](const std::vector<double>& u, std::vector<double>& g) { return ev.value(1, u, g); });
    for (std::size_t i = 0; i < ev.constraint_count(); ++i) {
        auto fn = [&ev, i](const std::vector<double>& u, std::vector<double>& g) { return ev.value(2 + i, u, g); };
        if (ev.is_eq(i)) np.eq.push_back(fn);
        else np.ineq.push_back(fn);
    }
    for (std::size_t k = 0; k < ev.size(); ++k) {
        np.lower.push_back(ev.lower(k));
        np.upper.push_back(ev.upper(k));
    }
    NlpResult r;
    try {
        r = nlp_solve(u0, np, cfg.tol, cfg.max_iter);
    } catch (const NumericError&) {
        return out;   // e.g. a return denominator reached zero
    }
    if (r.status != NlpStatus::Success) return out;
    out.x = ev.assemble(r.x);
    out.objective = p.objective(out.x);
    out.ok = true;
    return out;
}

inline bool uses_full_window(const CopProblem& p, const TimeSeries& seed, std::size_t w, double tol) {
    if (p.trend) return true;
    if (!p.hard.builtins().empty()) {
        for (const auto& bs : p.hard.builtins())
            if (bs.kind != BuiltinSpec::Kind::Ohlc) return true;
    }
    std::set<std::size_t> violated_rows;
    for (const auto& c : p.hard.items()) {
        const auto rows = constraint_rows(c);
        if (!rows.empty() && *rows.rbegin() - *rows.begin() + 1 > w) return true;
        if (residual(c, seed) > tol) violated_rows.insert(rows.begin(), rows.end());
    }
    return !violated_rows.empty() && *violated_rows.rbegin() - *violated_rows.begin() + 1 > w;
}

}  // namespace detail

/// Sliding-window constrained search. `reference` supplies z(x) for the
/// realism budget; it defaults to the seed.
inline CopResult cop_solve(const TimeSeries& seed, const ConstraintSet& cset, const RealismSpec& realism,
                           const CopConfig& cfg, const TimeSeries* reference = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    check_series(seed, "COP seed");
    cfg.validate();
    const std::size_t L = seed.dim(0), K = seed.dim(1);
    cset.validate(L, K);
    realism.validate(L);
    const TimeSeries& ref = reference ? *reference : seed;
    if (ref.shape() != seed.shape()) throw DimensionError("COP realism reference differs in shape from the seed");

    const ConstraintSet hard = cset.hard_only();
    const TimeSeries* trend = cset.first_trend();
    const double omega = cfg.trend_weight ? *cfg.trend_weight : (trend ? 1.0 : 0.0);
    const auto [lo, hi] = cop_bounds(seed);
    detail::CopProblem prob{seed, ref, hard, trend, omega, cfg.mode, realism, realism_property(ref, realism), lo, hi, L, K};

    CopResult result;
    SolveReport& rep = result.report;
    rep.window = detail::uses_full_window(prob, seed, cfg.window, cfg.tol) ? L : std::min(cfg.window, L);
    const auto positions = window_positions(L, rep.window, cfg.overlap);
    const Rng base = Rng(cfg.seed).derive("cop");
    bool any_changed = false;

    auto verify = [&](const TimeSeries& x, double budget) {
        if (!is_satisfied(hard, x, cfg.report_tol).satisfied) return false;
        for (double v : x.values())
            if (v < lo || v > hi) return false;
        return realism_error(x, ref, realism) <= budget;
    };

    for (std::size_t r = 1; r <= cfg.retries; ++r) {
        const double budget = cfg.budget * std::ldexp(1.0, static_cast<int>(r));
        TimeSeries x = seed;
        auto remaining = positions;
        std::size_t accepted = 0;
        for (std::size_t it = 0; it < cfg.iterations && !remaining.empty(); ++it) {
            double best_v = std::numeric_limits<double>::infinity();
            std::optional<std::size_t> best_w;
            TimeSeries best_x;
            for (std::size_t w = 0; w < remaining.size(); ++w) {
                const auto [b, e] = remaining[w];
                const Rng rng = base.derive(static_cast<std::uint64_t>(r)).derive(static_cast<std::uint64_t>(it)).derive(
                    static_cast<std::uint64_t>(b));
                ++rep.solves;
                auto o = detail::solve_window(prob, x, b, e, budget, cfg, rng);
                if (o.ok && o.objective < best_v) {
                    best_v = o.objective;
                    best_x = std::move(o.x);
                    best_w = w;
                }
            }
            if (best_w) {
                remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(*best_w));
                x = std::move(best_x);
                ++accepted;
            }
        }
        const bool changed = !(x == seed);
        if (changed) any_changed = true;
        if ((changed || cfg.mode == CopMode::Finetune) && verify(x, budget)) {
            rep.status = SolveStatus::Success;
            rep.retry = r;
            rep.budget = budget;
            rep.objective = prob.objective(x);
            rep.realism_error = realism_error(x, ref, realism);
            rep.windows_accepted = accepted;
            for (std::size_t i = 0; i < hard.items().size(); ++i) {
                rep.residuals.push_back(Violation{i, hard.items()[i].describe(), residual(hard.items()[i], x)});
            }
            result.series = std::move(x);
            break;
        }
    }
    if (rep.status != SolveStatus::Success) rep.status = any_changed ? SolveStatus::Infeasible : SolveStatus::MaxRetries;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

/// cop_solve over many seeds; result i belongs to seed i.
inline std::vector<CopResult> cop_batch(const std::vector<TimeSeries>& seeds, const ConstraintSet& cset,
                                        const RealismSpec& realism, const CopConfig& cfg, std::size_t jobs = 1,
                                        const std::vector<TimeSeries>* references = nullptr) {
    if (references && references->size() != seeds.size()) throw DimensionError("COP: one reference per seed");
    std::vector<CopResult> out(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        CopConfig c = cfg;
        c.seed = Rng(cfg.seed).derive("cop-batch").derive(static_cast<std::uint64_t>(i)).next_u64();
        out[i] = cop_solve(seeds[i], cset, realism, c, references ? &(*references)[i] : nullptr);
    });
    return out;
}

}  // namespace ctsg
