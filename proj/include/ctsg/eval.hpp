#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "ctsg/autodiff.hpp"
#include "ctsg/constraints.hpp"
#include "ctsg/cop.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/error.hpp"
#include "ctsg/optim.hpp"
#include "ctsg/parallel.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/textconfig.hpp"

namespace ctsg {

struct MetricReport {
    std::string name;
    double value = 0.0;
    double std = 0.0;               // over repeats
    std::size_t n = 0;              // samples involved
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string head;               // "gru", "mlp" or "" for closed-form metrics
    std::vector<double> repeats;

    void write(TextTable& t) const {
        t.set_string("metric", name);
        t.set_number("value", value);
        t.set_number("std", std);
        t.set_int("n", static_cast<long long>(n));
        t.set_string("seed", std::to_string(seed));
        t.set_string("config_hash", std::to_string(config_hash));
        if (!head.empty()) t.set_string("head", head);
    }
};

enum class HeadKind { Auto, Gru, Mlp };

inline std::string to_string(HeadKind h) {
    switch (h) {
        case HeadKind::Auto: return "auto";
        case HeadKind::Gru: return "gru";
        case HeadKind::Mlp: return "mlp";
    }
    return "?";
}

inline HeadKind parse_head_kind(const std::string& s) {
    if (s == "auto") return HeadKind::Auto;
    if (s == "gru") return HeadKind::Gru;
    if (s == "mlp") return HeadKind::Mlp;
    throw UsageError("unknown metric head '" + s + "' (expected auto, gru, mlp)");
}

/// Settings for the learned metrics.
struct MetricConfig {
    std::size_t repeats = 5;
    double train_fraction = 0.8;
    std::size_t steps = 400;
    std::size_t batch = 64;
    double lr = 5e-3;
    HeadKind head = HeadKind::Auto;
    std::size_t jobs = 1;

    void validate() const {
        if (repeats == 0) throw UsageError("metric repeats must be positive");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
        if (steps == 0 || batch == 0) throw UsageError("metric steps and batch must be positive");
        if (!(lr > 0.0)) throw UsageError("metric learning rate must be positive");
    }

    std::string describe() const {
        std::ostringstream s;
        s << "repeats=" << repeats << " train_fraction=" << format_double(train_fraction) << " steps=" << steps
          << " batch=" << batch << " lr=" << format_double(lr) << " head=" << to_string(head);
        return s.str();
    }
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = mean_of(v);
    sd = v.size() > 1 ? std_of(v) : 0.0;
}

// Per-feature affine standardization; constant features keep scale 1.
struct FeatureScale {
    std::vector<double> mu, sd;

    static FeatureScale fit(const std::vector<const TimeSeries*>& xs, std::size_t steps) {
        const std::size_t K = xs.front()->dim(1);
        FeatureScale f{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
        double n = 0.0;
        for (const auto* x : xs)
            for (std::size_t t = 0; t < steps; ++t, n += 1.0)
                for (std::size_t j = 0; j < K; ++j) f.mu[j] += x->at(t, j);
        for (double& m : f.mu) m /= n;
        for (const auto* x : xs)
            for (std::size_t t = 0; t < steps; ++t)
                for (std::size_t j = 0; j < K; ++j) f.sd[j] += (x->at(t, j) - f.mu[j]) * (x->at(t, j) - f.mu[j]);
        for (double& s : f.sd) s = s > 0.0 ? std::sqrt(s / n) : 1.0;
        return f;
    }
};

// A single-layer GRU or a one-hidden-layer MLP over the first `steps` rows,
// followed by a linear readout of width `out`.
class Head {
public:
    Head(HeadKind kind, std::size_t steps, std::size_t K, std::size_t out, bool zero_readout, Rng rng)
        : kind_(kind), steps_(steps), K_(K), H_(std::max<std::size_t>(4 * K, 8)) {
        auto init = [&](std::size_t rows, std::size_t cols) {
            const double a = 1.0 / std::sqrt(static_cast<double>(rows));
            Tensor w = Tensor::zeros({rows, cols});
            for (double& v : w.values()) v = rng.uniform(-a, a);
            return w;
        };
        if (kind_ == HeadKind::Gru) {
            params_.push_back(init(K_, 3 * H_));
            params_.push_back(init(H_, 3 * H_));
            params_.push_back(Tensor::zeros({1, 3 * H_}));
        } else {
            params_.push_back(init(steps_ * K_, H_));
            params_.push_back(Tensor::zeros({1, H_}));
        }
        params_.push_back(zero_readout ? Tensor::zeros({H_, out}) : init(H_, out));
        params_.push_back(Tensor::zeros({1, out}));
    }

    std::vector<Tensor>& params() { return params_; }

    // rows: standardized inputs, one {B, K} tensor per step (GRU) or one {B, steps*K} tensor (MLP)
    Var forward(Graph& g, const std::vector<Var>& p, const std::vector<Tensor>& rows) const {
        const std::size_t B = rows.front().dim(0);
        Var h = g.constant(Tensor::zeros({B, H_}));
        std::size_t q = 0;
        if (kind_ == HeadKind::Gru) {
            const Var& Wx = p[q++];
            const Var& Wh = p[q++];
            const Var bias = broadcast(p[q++], Shape{B, 3 * H_});
            for (const Tensor& xt : rows) {
                Var xw = add(matmul(g.constant(xt), Wx), bias);
                Var hw = matmul(h, Wh);
                Var z = sigmoid(add(slice(xw, 1, 0, H_), slice(hw, 1, 0, H_)));
                Var r = sigmoid(add(slice(xw, 1, H_, 2 * H_), slice(hw, 1, H_, 2 * H_)));
                Var n = tanh(add(slice(xw, 1, 2 * H_, 3 * H_), mul(r, slice(hw, 1, 2 * H_, 3 * H_))));
                h = add(n, mul(z, sub(h, n)));
            }
        } else {
            const Var& W = p[q++];
            h = tanh(add(matmul(g.constant(rows.front()), W), broadcast(p[q++], Shape{B, H_})));
        }
        const Var& Wo = p[q++];
        return add(matmul(h, Wo), broadcast(p[q], Shape{B, Wo.shape()[1]}));
    }

    std::vector<Tensor> inputs(const std::vector<const TimeSeries*>& xs, const FeatureScale& fs) const {
        const std::size_t B = xs.size();
        if (kind_ == HeadKind::Gru) {
            std::vector<Tensor> rows(steps_, Tensor::zeros({B, K_}));
            for (std::size_t t = 0; t < steps_; ++t)
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t j = 0; j < K_; ++j) rows[t].at(b, j) = (xs[b]->at(t, j) - fs.mu[j]) / fs.sd[j];
            return rows;
        }
        Tensor flat = Tensor::zeros({B, steps_ * K_});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < steps_; ++t)
                for (std::size_t j = 0; j < K_; ++j) flat.at(b, t * K_ + j) = (xs[b]->at(t, j) - fs.mu[j]) / fs.sd[j];
        return {flat};
    }

private:
    HeadKind kind_;
    std::size_t steps_, K_, H_;
    std::vector<Tensor> params_;
};

inline HeadKind resolve_head(HeadKind h, std::size_t steps) {
    if (h != HeadKind::Auto) return h;
    return steps >= 2 ? HeadKind::Gru : HeadKind::Mlp;
}

// Trains head on (xs, targets) with loss(output, batch indices), plain minibatch AdamW.
template <class Loss>
void fit_head(Head& head, const std::vector<const TimeSeries*>& xs, const FeatureScale& fs, const MetricConfig& cfg,
              Rng rng, Loss loss) {
    AdamW opt(AdamW::Options{cfg.lr, 0.0});
    const std::size_t B = std::min(cfg.batch, xs.size());
    std::vector<const TimeSeries*> bx(B);
    std::vector<std::size_t> idx(B);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t b = 0; b < B; ++b) {
            idx[b] = rng.uniform_index(xs.size());
            bx[b] = xs[idx[b]];
        }
        Graph g;
        std::vector<Var> p;
        for (const auto& t : head.params()) p.push_back(g.leaf(t));
        Var out = head.forward(g, p, head.inputs(bx, fs));
        Var l = loss(g, out, idx);
        const Gradients grads = g.backward(l);
        std::vector<Tensor> gs;
        for (const auto& v : p) gs.push_back(grads[v]);
        opt.step(head.params(), gs);
    }
}

inline Tensor predict(Head& head, const std::vector<const TimeSeries*>& xs, const FeatureScale& fs) {
    Graph g;
    std::vector<Var> p;
    for (const auto& t : head.params()) p.push_back(g.constant(t));
    return head.forward(g, p, head.inputs(xs, fs)).value();
}

inline void require_compatible(const Dataset& real, const Dataset& synth) {
    check_dataset(real);
    check_dataset(synth);
    if (real.samples.front().shape() != synth.samples.front().shape())
        throw DimensionError("real and synthetic samples differ in shape");
}

}  // namespace detail

/// |held-out accuracy − 0.5| of a real-vs-synthetic classifier, mean over repeats.
inline MetricReport discriminative_score(const Dataset& real, const Dataset& synth, const MetricConfig& cfg,
                                         std::uint64_t seed) {
    cfg.validate();
    detail::require_compatible(real, synth);
    const std::size_t L = real.length(), K = real.features();
    const auto n_train = [&](std::size_t n) { return static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(n))); };
    for (std::size_t n : {real.size(), synth.size()}) {
        if (n_train(n) == 0 || n_train(n) == n) throw UsageError("discriminative score: too few samples for a train/test split");
    }
    const HeadKind kind = detail::resolve_head(cfg.head, L);

    std::vector<double> scores(cfg.repeats);
    parallel_for(cfg.repeats, cfg.jobs, [&](std::size_t rep) {
        const Rng rng = Rng(seed).derive("discriminative").derive(rep);
        std::vector<const TimeSeries*> train, test;
        std::vector<double> y_train, y_test;
        auto split = [&](const Dataset& ds, double label, const char* name) {
            std::vector<std::size_t> order(ds.size());
            std::iota(order.begin(), order.end(), 0);
            Rng r = rng.derive(name);
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[r.uniform_index(i)]);
            const std::size_t m = n_train(ds.size());
            for (std::size_t i = 0; i < order.size(); ++i) {
                (i < m ? train : test).push_back(&ds.samples[order[i]]);
                (i < m ? y_train : y_test).push_back(label);
            }
        };
        split(real, 1.0, "real");
        split(synth, 0.0, "synth");

        const auto fs = detail::FeatureScale::fit(train, L);
        detail::Head head(kind, L, K, 1, false, rng.derive("init"));
        detail::fit_head(head, train, fs, cfg, rng.derive("batches"),
                         [&](Graph& g, const Var& logit, const std::vector<std::size_t>& idx) {
                             Tensor y = Tensor::zeros({idx.size(), 1});
                             for (std::size_t b = 0; b < idx.size(); ++b) y.at(b, 0) = y_train[idx[b]];
                             // logistic loss: softplus(z) − y z
                             return sub(mean(softplus(logit)), mean(mul(g.constant(y), logit)));
                         });
        const Tensor z = detail::predict(head, test, fs);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test.size(); ++i) correct += (z.at(i, 0) > 0.0) == (y_test[i] > 0.5);
        scores[rep] = std::abs(static_cast<double>(correct) / static_cast<double>(test.size()) - 0.5);
    });

    MetricReport r;
    r.name = "discriminative";
    detail::mean_std(scores, r.value, r.std);
    r.n = real.size() + synth.size();
    r.seed = seed;
    r.config_hash = detail::fnv1a("discriminative " + cfg.describe());
    r.head = to_string(kind);
    r.repeats = scores;
    return r;
}

/// Train on synthetic, test on real: MAE of a one-step-ahead predictor of the
/// last step from the first L−1 steps.
inline MetricReport predictive_score(const Dataset& real, const Dataset& synth, const MetricConfig& cfg,
                                     std::uint64_t seed) {
    cfg.validate();
    detail::require_compatible(real, synth);
    const std::size_t L = real.length(), K = real.features();
    if (L < 3) throw UsageError("predictive score needs series of length at least 3");
    const HeadKind kind = detail::resolve_head(cfg.head, L - 1);

    std::vector<const TimeSeries*> train, test;
    for (const auto& x : synth.samples) train.push_back(&x);
    for (const auto& x : real.samples) test.push_back(&x);
    const auto fs = detail::FeatureScale::fit(train, L - 1);

    std::vector<double> scores(cfg.repeats);
    parallel_for(cfg.repeats, cfg.jobs, [&](std::size_t rep) {
        const Rng rng = Rng(seed).derive("predictive").derive(rep);
        // the head predicts the standardized change from step L−2 to L−1
        detail::Head head(kind, L - 1, K, K, true, rng.derive("init"));
        detail::fit_head(head, train, fs, cfg, rng.derive("batches"),
                         [&](Graph& g, const Var& delta, const std::vector<std::size_t>& idx) {
                             Tensor target = Tensor::zeros({idx.size(), K});
                             for (std::size_t b = 0; b < idx.size(); ++b)
                                 for (std::size_t j = 0; j < K; ++j)
                                     target.at(b, j) = (train[idx[b]]->at(L - 1, j) - train[idx[b]]->at(L - 2, j)) / fs.sd[j];
                             return mean(abs(sub(delta, g.constant(target))));
                         });
        const Tensor d = detail::predict(head, test, fs);
        double err = 0.0;
        for (std::size_t i = 0; i < test.size(); ++i)
            for (std::size_t j = 0; j < K; ++j)
                err += std::abs(test[i]->at(L - 2, j) + fs.sd[j] * d.at(i, j) - test[i]->at(L - 1, j));
        scores[rep] = err / static_cast<double>(test.size() * K);
    });

    MetricReport r;
    r.name = "predictive";
    detail::mean_std(scores, r.value, r.std);
    r.n = real.size() + synth.size();
    r.seed = seed;
    r.config_hash = detail::fnv1a("predictive " + cfg.describe());
    r.head = to_string(kind);
    r.repeats = scores;
    return r;
}

/// Fraction of samples meeting every hard constraint at tol.
inline MetricReport satisfaction_rate(const std::vector<TimeSeries>& synth, const ConstraintSet& cset, double tol) {
    if (tol < 0.0) throw UsageError("satisfaction tolerance must be non-negative");
    if (synth.empty()) throw UsageError("satisfaction rate of an empty sample set");
    std::size_t ok = 0;
    for (const auto& x : synth) ok += is_satisfied(cset, x, tol).satisfied;
    MetricReport r;
    r.name = "satisfaction";
    r.value = static_cast<double>(ok) / static_cast<double>(synth.size());
    r.n = synth.size();
    r.config_hash = detail::fnv1a("satisfaction tol=" + format_double(tol));
    return r;
}

// ---------------------------------------------------------------- trend distances

inline double l2_distance(const TimeSeries& a, const TimeSeries& b) {
    if (a.shape() != b.shape()) throw DimensionError("l2 distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Square root of the minimal accumulated squared row distance over warping
/// paths with steps (1,0), (0,1), (1,1).
inline double dtw_distance(const TimeSeries& a, const TimeSeries& b) {
    if (a.dim(1) != b.dim(1)) throw DimensionError("dtw: feature counts differ");
    const std::size_t n = a.dim(0), m = b.dim(0), K = a.dim(1);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < K; ++k) c += (a.at(i - 1, k) - b.at(j - 1, k)) * (a.at(i - 1, k) - b.at(j - 1, k));
            cur[j] = c + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return std::sqrt(prev[m]);
}

/// Magnitudes of the unitary DFT of x zero-padded to n.
inline std::vector<double> magnitude_spectrum(const std::vector<double>& x, std::size_t n) {
    std::vector<double> in(x);
    in.resize(n, 0.0);
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    std::vector<double> mag(out.size());
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::abs(out[k]) * s;
    return mag;
}

/// L2 distance between per-feature magnitude spectra.
inline double fourier_distance(const TimeSeries& a, const TimeSeries& b) {
    if (a.dim(1) != b.dim(1)) throw DimensionError("fourier distance: feature counts differ");
    const std::size_t n = std::max(a.dim(0), b.dim(0));
    double s = 0.0;
    for (std::size_t j = 0; j < a.dim(1); ++j) {
        const auto fa = magnitude_spectrum(column(a, j), n), fb = magnitude_spectrum(column(b, j), n);
        for (std::size_t k = 0; k < n; ++k) s += (fa[k] - fb[k]) * (fa[k] - fb[k]);
    }
    return std::sqrt(s);
}

struct TrendErrors {
    double perc_error = 0.0;
    double l2 = 0.0;
    double dtw = 0.0;
    double fourier = 0.0;
};

/// Mean distances between samples and their trends.
inline TrendErrors trend_error(const std::vector<TimeSeries>& synth, const std::vector<TimeSeries>& trends) {
    if (synth.empty()) throw UsageError("trend error of an empty sample set");
    if (synth.size() != trends.size()) throw DimensionError("trend error: sample and trend counts differ");
    TrendErrors e;
    for (std::size_t i = 0; i < synth.size(); ++i) {
        const TimeSeries& x = synth[i];
        const TimeSeries& s = trends[i];
        if (x.shape() != s.shape()) throw DimensionError("trend error: sample " + std::to_string(i) + " differs in shape from its trend");
        const double norm = l2_distance(s, TimeSeries::zeros(s.shape()));
        if (norm == 0.0) throw NumericError("trend error: trend " + std::to_string(i) + " has zero norm");
        const double d = l2_distance(s, x);
        e.perc_error += d / norm;
        e.l2 += d;
        e.dtw += dtw_distance(s, x);
        e.fourier += fourier_distance(s, x);
    }
    const double n = static_cast<double>(synth.size());
    e.perc_error /= n;
    e.l2 /= n;
    e.dtw /= n;
    e.fourier /= n;
    return e;
}

// ---------------------------------------------------------------- stylized facts

/// 1-Wasserstein distance between two empirical distributions.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw UsageError("wasserstein distance of an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // integrate |F_a − F_b| over the merged support
    std::size_t i = 0, j = 0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double x = std::min(a[0], b[0]), w = 0.0;
    while (i < a.size() || j < b.size()) {
        const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        w += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
        x = next;
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
    }
    return w;
}

struct StylizedFacts {
    static constexpr std::size_t lags = 6;

    std::vector<double> bin_edges;                     // bins + 1 edges over the pooled return range
    std::vector<double> hist_real, hist_synth;         // fraction of returns per bin
    std::vector<std::vector<double>> acf_real, acf_synth;  // [lag − 1][series]
    std::vector<double> abs_acf_real, abs_acf_synth;   // mean |r| autocorrelation per lag
    double wasserstein = 0.0;                          // between pooled returns

    std::string histogram_csv() const {
        std::ostringstream s;
        s << "bin_lo,bin_hi,real,synth\n";
        for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b)
            s << format_double(bin_edges[b]) << ',' << format_double(bin_edges[b + 1]) << ','
              << format_double(hist_real[b]) << ',' << format_double(hist_synth[b]) << '\n';
        return s.str();
    }

    std::string acf_csv() const {
        std::ostringstream s;
        s << "lag,source,series,acf\n";
        for (std::size_t l = 0; l < lags; ++l) {
            for (std::size_t i = 0; i < acf_real[l].size(); ++i) s << l + 1 << ",real," << i << ',' << format_double(acf_real[l][i]) << '\n';
            for (std::size_t i = 0; i < acf_synth[l].size(); ++i) s << l + 1 << ",synth," << i << ',' << format_double(acf_synth[l][i]) << '\n';
        }
        return s.str();
    }

    std::string decay_csv() const {
        std::ostringstream s;
        s << "lag,real,synth\n";
        for (std::size_t l = 0; l < lags; ++l)
            s << l + 1 << ',' << format_double(abs_acf_real[l]) << ',' << format_double(abs_acf_synth[l]) << '\n';
        return s.str();
    }
};

namespace detail {

struct ReturnStats {
    std::vector<double> pooled;
    std::vector<std::vector<double>> acf;  // [lag − 1][series]
    std::vector<double> abs_acf;
};

inline ReturnStats return_stats(const Dataset& ds, std::optional<std::size_t> feature) {
    constexpr std::size_t lags = StylizedFacts::lags;
    ReturnStats st{{}, std::vector<std::vector<double>>(lags), std::vector<double>(lags, 0.0)};
    std::size_t series = 0;
    for (const auto& x : ds.samples) {
        for (double v : x.values())
            if (!(v > 0.0)) throw NumericError("stylized facts need positive values");
        const TimeSeries r = returns(x);
        if (r.dim(0) <= lags) throw UsageError("stylized facts need more than 7 steps per series");
        for (std::size_t j = 0; j < r.dim(1); ++j) {
            if (feature && j != *feature) continue;
            auto col = column(r, j);
            st.pooled.insert(st.pooled.end(), col.begin(), col.end());
            const auto a = autocorr(col, lags);
            for (double& v : col) v = std::abs(v);
            const auto aa = autocorr(col, lags);
            for (std::size_t l = 0; l < lags; ++l) {
                st.acf[l].push_back(a[l]);
                st.abs_acf[l] += aa[l];
            }
            ++series;
        }
    }
    for (double& v : st.abs_acf) v /= static_cast<double>(series);
    return st;
}

}  // namespace detail

/// Return histograms, return autocorrelations at lags 1..6 and the |return|
/// autocorrelation decay, real vs synthetic. `feature` restricts to one column.
inline StylizedFacts stylized_facts(const Dataset& real, const Dataset& synth, std::optional<std::size_t> feature = {},
                                    std::size_t bins = 50) {
    detail::require_compatible(real, synth);
    if (feature && *feature >= real.features()) throw UsageError("stylized facts: feature index out of range");
    if (bins == 0) throw UsageError("stylized facts: bin count must be positive");
    const auto a = detail::return_stats(real, feature), b = detail::return_stats(synth, feature);
    StylizedFacts f;
    double lo = std::min(*std::min_element(a.pooled.begin(), a.pooled.end()), *std::min_element(b.pooled.begin(), b.pooled.end()));
    double hi = std::max(*std::max_element(a.pooled.begin(), a.pooled.end()), *std::max_element(b.pooled.begin(), b.pooled.end()));
    if (hi == lo) hi = lo + 1.0;
    for (std::size_t i = 0; i <= bins; ++i) f.bin_edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins));
    auto hist = [&](const std::vector<double>& v) {
        std::vector<double> h(bins, 0.0);
        for (double x : v) h[std::min(bins - 1, static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins)))] += 1.0;
        for (double& c : h) c /= static_cast<double>(v.size());
        return h;
    };
    f.hist_real = hist(a.pooled);
    f.hist_synth = hist(b.pooled);
    f.acf_real = a.acf;
    f.acf_synth = b.acf;
    f.abs_acf_real = a.abs_acf;
    f.abs_acf_synth = b.abs_acf;
    f.wasserstein = wasserstein1(a.pooled, b.pooled);
    return f;
}

}  // namespace ctsg
