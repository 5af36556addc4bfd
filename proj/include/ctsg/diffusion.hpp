#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/constraints.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/denoiser.hpp"
#include "ctsg/error.hpp"
#include "ctsg/optim.hpp"
#include "ctsg/parallel.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/schedule.hpp"

namespace ctsg {

// ---------------------------------------------------------------------------
// Closed forms

/// x_t = √α̂_t x₀ + √(1 − α̂_t) ε
inline Tensor forward_sample(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& s) {
    s.check_step(t);
    if (x0.shape() != eps.shape()) throw DimensionError("forward_sample: noise shape differs from x0");
    const double ab = s.alpha_bar[t];
    return add(scale(x0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

/// x̂₀ = (x_t − √(1 − α̂_t) ε̂) / √α̂_t
inline Tensor reconstruct_x0(const Tensor& x_t, std::size_t t, const Tensor& eps_hat, const NoiseSchedule& s) {
    s.check_step(t);
    const double ab = s.alpha_bar[t];
    return scale(sub(x_t, scale(eps_hat, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
}

/// Variance of the ancestral DDPM step: √β_t (default), β_t, or the
/// posterior variance β_t (1 − α̂_{t−1}) / (1 − α̂_t).
enum class VarianceRule { SqrtBeta, Beta, Posterior };

inline const char* to_string(VarianceRule v) {
    switch (v) {
        case VarianceRule::SqrtBeta: return "sqrt-beta";
        case VarianceRule::Beta: return "beta";
        case VarianceRule::Posterior: return "posterior";
    }
    return "?";
}

inline VarianceRule parse_variance_rule(const std::string& s) {
    if (s == "sqrt-beta") return VarianceRule::SqrtBeta;
    if (s == "beta") return VarianceRule::Beta;
    if (s == "posterior") return VarianceRule::Posterior;
    throw ConfigError("unknown variance rule '" + s + "' (sqrt-beta, beta, posterior)");
}

inline double ddpm_sigma(const NoiseSchedule& s, std::size_t t, VarianceRule rule) {
    s.check_step(t);
    switch (rule) {
        case VarianceRule::SqrtBeta: return std::sqrt(std::sqrt(s.beta[t]));
        case VarianceRule::Beta: return std::sqrt(s.beta[t]);
        case VarianceRule::Posterior:
            return std::sqrt(s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]));
    }
    return 0.0;
}

/// x_{t−1} = (x_t − (1 − α_t)/√(1 − α̂_t) ε̂) / √α_t + σ_t z; z is ignored at t = 1.
inline Tensor ddpm_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, const NoiseSchedule& s,
                        const Tensor& z, VarianceRule rule = VarianceRule::SqrtBeta) {
    s.check_step(t);
    const double coef = (1.0 - s.alpha[t]) / std::sqrt(1.0 - s.alpha_bar[t]);
    Tensor mean = scale(sub(x_t, scale(eps_hat, coef)), 1.0 / std::sqrt(s.alpha[t]));
    if (t == 1) return mean;
    return add(mean, scale(z, ddpm_sigma(s, t, rule)));
}

/// x_prev = √α̂_prev x̂₀ + √(1 − α̂_prev − σ²) ε̂ + σ z, with α̂₀ = 1.
inline Tensor ddim_step(const Tensor& x_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                        const NoiseSchedule& s, double sigma, const Tensor* z) {
    const Tensor x0 = reconstruct_x0(x_t, t, eps_hat, s);
    const double ab_prev = s.alpha_bar[t_prev];
    const double dir = std::max(0.0, 1.0 - ab_prev - sigma * sigma);
    Tensor out = add(scale(x0, std::sqrt(ab_prev)), scale(eps_hat, std::sqrt(dir)));
    if (sigma > 0.0 && z) out = add(out, scale(*z, sigma));
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t epochs = 10000;  // optimizer steps, one minibatch each
    std::size_t batch = 16;
    double lr = 1e-4;
    double weight_decay = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs == 0 || batch == 0) throw ConfigError("epochs and batch size must be positive");
        if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("learning rate and weight decay must be >= 0");
    }
};

struct TrainResult {
    DenoiserModel model;
    std::vector<double> loss;  // one entry per step
};

namespace detail {

inline Tensor rows_of(const std::vector<TimeSeries>& pool, const std::vector<std::size_t>& idx, std::size_t d) {
    Tensor out = Tensor::zeros({idx.size(), d});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto v = pool[idx[b]].values();
        std::copy(v.begin(), v.end(), out.values().begin() + static_cast<std::ptrdiff_t>(b * d));
    }
    return out;
}

/// Per-row constant {B, d} built from a per-row scalar.
inline Tensor row_constant(const std::vector<double>& per_row, std::size_t d) {
    Tensor out = Tensor::zeros({per_row.size(), d});
    for (std::size_t b = 0; b < per_row.size(); ++b)
        for (std::size_t k = 0; k < d; ++k) out[b * d + k] = per_row[b];
    return out;
}

inline TrainResult train_impl(DenoiserModel model, const Dataset& ds, const TrainConfig& cfg,
                              const ConstraintSet* cs, double rho) {
    cfg.validate();
    check_dataset(ds);
    require_normalized(ds, 1e-6);
    const auto& sp = model.spec;
    if (ds.length() != sp.length || ds.features() != sp.features) {
        throw DimensionError("dataset series are " + std::to_string(ds.length()) + "x" + std::to_string(ds.features()) +
                             ", model expects " + std::to_string(sp.length) + "x" + std::to_string(sp.features));
    }
    if (cs) cs->validate(sp.length, sp.features);
    if (rho < 0.0) throw ConfigError("rho must be non-negative");
    const bool with_penalty = cs != nullptr && rho > 0.0 && !cs->empty();
    const bool cond = sp.conditioning == Conditioning::Trend;
    const std::size_t d = sp.series_size();
    const std::size_t N = ds.size();
    const std::size_t B = cfg.batch;
    const auto& sched = model.schedule;

    std::vector<TimeSeries> trends;
    if (cond) {
        trends.reserve(N);
        for (const auto& x : ds.samples) trends.push_back(piecewise_linear_trend(x));
    }
    if (ds.norm) model.norm = ds.norm;

    AdamW opt({cfg.lr, cfg.weight_decay});
    TrainResult result;
    result.loss.reserve(cfg.epochs);
    const Rng base = Rng(cfg.seed).derive("training");
    for (std::size_t step = 0; step < cfg.epochs; ++step) {
        Rng rng = base.derive(static_cast<std::uint64_t>(step));
        std::vector<std::size_t> idx(B), ts(B);
        for (std::size_t b = 0; b < B; ++b) idx[b] = static_cast<std::size_t>(rng.uniform_index(N));
        for (std::size_t b = 0; b < B; ++b) ts[b] = 1 + static_cast<std::size_t>(rng.uniform_index(sched.T));
        Tensor eps = Tensor::zeros({B, d});
        for (double& v : eps.values()) v = rng.normal();
        const Tensor x0 = rows_of(ds.samples, idx, d);
        std::vector<double> sa(B), sn(B);
        for (std::size_t b = 0; b < B; ++b) {
            sa[b] = std::sqrt(sched.alpha_bar[ts[b]]);
            sn[b] = std::sqrt(1.0 - sched.alpha_bar[ts[b]]);
        }
        const Tensor xt = add(mul(x0, row_constant(sa, d)), mul(eps, row_constant(sn, d)));
        std::optional<Tensor> trend_rows;
        if (cond) trend_rows = rows_of(trends, idx, d);

        Graph g;
        std::vector<Var> P;
        P.reserve(model.params.size());
        for (const auto& p : model.params) P.push_back(g.leaf(p));
        const Var input = g.constant(denoiser_input(model, xt, ts, trend_rows ? &*trend_rows : nullptr));
        const Var eps_hat = denoiser_forward(sp, P, input);
        Var loss = scale(sum(square(sub(g.constant(eps), eps_hat))), 1.0 / static_cast<double>(B));
        if (with_penalty) {
            std::vector<double> inv(B);
            for (std::size_t b = 0; b < B; ++b) inv[b] = 1.0 / sa[b];
            const Var x0_hat = mul(sub(g.constant(xt), mul(eps_hat, g.constant(row_constant(sn, d)))),
                                   g.constant(row_constant(inv, d)));
            const Var pen = sum(penalty_rows(*cs, x0_hat, sp.features));
            loss = add(loss, scale(pen, rho / static_cast<double>(B)));
        }
        result.loss.push_back(loss.value().item());
        const Gradients grads = g.backward(loss);
        std::vector<Tensor> gs;
        gs.reserve(P.size());
        for (const auto& p : P) gs.push_back(grads[p]);
        opt.step(model.params, gs);
    }
    result.model = std::move(model);
    return result;
}

}  // namespace detail

/// Minimizes ‖ε − ε_θ(√α̂_t x₀ + √(1 − α̂_t) ε, t | s)‖². In trend mode s is
/// the two-half piecewise-linear fit of x₀.
inline TrainResult train_difftime(DenoiserModel model, const Dataset& ds, const TrainConfig& cfg) {
    return detail::train_impl(std::move(model), ds, cfg, nullptr, 0.0);
}

/// As train_difftime plus ρ · penalty(x̂₀) on the reconstruction
/// x̂₀ = (x_t − √(1 − α̂_t) ε̂) / √α̂_t.
inline TrainResult train_lossdifftime(DenoiserModel model, const Dataset& ds, const TrainConfig& cfg,
                                      const ConstraintSet& cs, double rho) {
    return detail::train_impl(std::move(model), ds, cfg, &cs, rho);
}

// ---------------------------------------------------------------------------
// Sampling

struct FixedPoint {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

inline std::vector<FixedPoint> fixed_points_of(const ConstraintSet& cs) {
    std::vector<FixedPoint> out;
    for (const auto& c : cs.items())
        if (c.kind == ConstraintKind::FixedPoint) out.push_back({c.row, c.col, c.value});
    return out;
}

struct SampleOptions {
    std::size_t n = 1;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::size_t chunk = 250;  // samples per batched forward pass
    VarianceRule variance = VarianceRule::SqrtBeta;
};

/// ∇_{x_t} penalty(x̂₀) with x̂₀ = (x_t − √(1 − α̂_t) ε̂)/√α̂_t and ε̂ held
/// constant. Rows of x_t and ε̂ are samples ({B, L*K}).
inline Tensor guidance_gradient(const ConstraintSet& cs, const Tensor& x_t, const Tensor& eps_hat, std::size_t t,
                                const NoiseSchedule& s, std::size_t K) {
    const double ab = s.alpha_bar[t];
    Graph g;
    const Var X = g.leaf(x_t);
    const Var x0 = scale(sub(X, g.constant(scale(eps_hat, std::sqrt(1.0 - ab)))), 1.0 / std::sqrt(ab));
    const Var pen = sum(penalty_rows(cs, x0, K));
    return g.backward(pen)[X];
}

namespace detail {

enum class SamplerKind { Ddpm, Ddim };

struct SamplerSetup {
    SamplerKind kind = SamplerKind::Ddpm;
    const DdimPlan* plan = nullptr;
    const std::vector<TimeSeries>* trends = nullptr;  // empty, one shared, or one per sample
    std::vector<FixedPoint> fixed;
    const ConstraintSet* guide = nullptr;
    double rho = 0.0;
};

inline void draw_rows(std::vector<Rng>& rngs, Tensor& out) {
    const std::size_t d = out.dim(1);
    for (std::size_t b = 0; b < rngs.size(); ++b)
        for (std::size_t k = 0; k < d; ++k) out[b * d + k] = rngs[b].normal();
}

inline void overwrite_fixed(Tensor& X, const std::vector<FixedPoint>& fixed, std::size_t K) {
    const std::size_t d = X.dim(1);
    for (std::size_t b = 0; b < X.dim(0); ++b)
        for (const auto& f : fixed) X[b * d + f.row * K + f.col] = f.value;
}

inline std::vector<TimeSeries> run_sampler(const DenoiserModel& m, const SampleOptions& opt, const SamplerSetup& setup) {
    const auto& sp = m.spec;
    const auto& s = m.schedule;
    const std::size_t d = sp.series_size();
    const std::size_t K = sp.features;
    if (opt.n == 0) return {};
    for (const auto& f : setup.fixed) {
        if (f.row >= sp.length || f.col >= K) {
            throw ConstraintError("fixed point x[" + std::to_string(f.row) + "," + std::to_string(f.col) +
                                  "] out of range");
        }
    }
    const bool cond = sp.conditioning == Conditioning::Trend;
    const std::size_t n_trends = setup.trends ? setup.trends->size() : 0;
    if (cond && n_trends == 0) throw UsageError("trend-conditioned model needs a trend");
    if (!cond && n_trends > 0) throw UsageError("model is unconditional but a trend was given");
    if (n_trends > 1 && n_trends != opt.n) throw UsageError("give one trend or one per sample");
    for (std::size_t i = 0; i < n_trends; ++i) {
        const auto& tr = (*setup.trends)[i];
        if (tr.rank() != 2 || tr.dim(0) != sp.length || tr.dim(1) != K) throw DimensionError("trend shape differs from model");
    }
    if (setup.guide) setup.guide->validate(sp.length, K);
    if (setup.plan) setup.plan->validate(s);

    const Rng base = Rng(opt.seed).derive("sampling");
    const std::size_t chunk = std::max<std::size_t>(1, opt.chunk);
    const std::size_t n_chunks = (opt.n + chunk - 1) / chunk;
    std::vector<TimeSeries> out(opt.n);

    parallel_for(n_chunks, opt.jobs, [&](std::size_t c) {
        const std::size_t lo = c * chunk;
        const std::size_t hi = std::min(opt.n, lo + chunk);
        const std::size_t B = hi - lo;
        std::vector<Rng> rngs;
        rngs.reserve(B);
        for (std::size_t i = lo; i < hi; ++i) rngs.push_back(base.derive(static_cast<std::uint64_t>(i)));
        std::optional<Tensor> trend_rows;
        if (cond) {
            trend_rows = Tensor::zeros({B, d});
            for (std::size_t b = 0; b < B; ++b) {
                const auto& tr = (*setup.trends)[n_trends == 1 ? 0 : lo + b];
                std::copy(tr.values().begin(), tr.values().end(),
                          trend_rows->values().begin() + static_cast<std::ptrdiff_t>(b * d));
            }
        }
        const Tensor* trend_ptr = trend_rows ? &*trend_rows : nullptr;

        Tensor X = Tensor::zeros({B, d});
        draw_rows(rngs, X);
        Tensor z = Tensor::zeros({B, d});

        auto eps_at = [&](std::size_t t) {
            Tensor e = predict_batch(m, X, std::vector<std::size_t>(B, t), trend_ptr);
            if (setup.guide && setup.rho != 0.0) {
                // Descend the penalty: ε̂ + ρ √(1 − α̂_t) ∇_{x_t} penalty(x̂₀).
                const Tensor grad = guidance_gradient(*setup.guide, X, e, t, s, K);
                e = add(e, scale(grad, setup.rho * std::sqrt(1.0 - s.alpha_bar[t])));
            }
            return e;
        };

        if (setup.kind == SamplerKind::Ddpm) {
            for (std::size_t t = s.T; t >= 1; --t) {
                const Tensor e = eps_at(t);
                if (t > 1) draw_rows(rngs, z);
                X = ddpm_step(X, e, t, s, z, opt.variance);
                overwrite_fixed(X, setup.fixed, K);
            }
        } else {
            const auto& tau = setup.plan->tau;
            for (std::size_t i = tau.size(); i-- > 0;) {
                const std::size_t t = tau[i];
                const std::size_t t_prev = i == 0 ? 0 : tau[i - 1];
                const Tensor e = eps_at(t);
                const double sigma = setup.plan->sigma_at(s, t, t_prev);
                if (sigma > 0.0) draw_rows(rngs, z);
                X = ddim_step(X, e, t, t_prev, s, sigma, sigma > 0.0 ? &z : nullptr);
                overwrite_fixed(X, setup.fixed, K);
            }
        }
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<double> row(X.values().begin() + static_cast<std::ptrdiff_t>(b * d),
                                    X.values().begin() + static_cast<std::ptrdiff_t>((b + 1) * d));
            out[lo + b] = Tensor(Shape{sp.length, K}, std::move(row));
        }
    });
    return out;
}

}  // namespace detail

/// Ancestral DDPM sampling; fixed points are written into x_{t−1} after every step.
inline std::vector<TimeSeries> sample_difftime(const DenoiserModel& m, const SampleOptions& opt,
                                               const std::vector<TimeSeries>& trends = {},
                                               const std::vector<FixedPoint>& fixed = {}) {
    detail::SamplerSetup setup;
    setup.kind = detail::SamplerKind::Ddpm;
    setup.trends = &trends;
    setup.fixed = fixed;
    return detail::run_sampler(m, opt, setup);
}

inline std::vector<TimeSeries> sample_ddim(const DenoiserModel& m, const DdimPlan& plan, const SampleOptions& opt,
                                           const std::vector<TimeSeries>& trends = {}) {
    detail::SamplerSetup setup;
    setup.kind = detail::SamplerKind::Ddim;
    setup.plan = &plan;
    setup.trends = &trends;
    return detail::run_sampler(m, opt, setup);
}

/// DDIM sampling with constraint guidance on every step; no weights change.
inline std::vector<TimeSeries> sample_guided(const DenoiserModel& m, const DdimPlan& plan, const ConstraintSet& cs,
                                             double rho, const SampleOptions& opt,
                                             const std::vector<TimeSeries>& trends = {}) {
    detail::SamplerSetup setup;
    setup.kind = detail::SamplerKind::Ddim;
    setup.plan = &plan;
    setup.trends = &trends;
    setup.guide = &cs;
    setup.rho = rho;
    return detail::run_sampler(m, opt, setup);
}

}  // namespace ctsg
