// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../unit/support.hpp"
#include "ctsg.hpp"

using namespace ctsg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------
// Shared desk-scale models on univariate sines, L = 24.

constexpr std::size_t kL = 24;

const Dataset& sines() {
    static const Dataset ds = normalize(generate_sines({1, kL, 5000, 42}));
    return ds;
}

TrainConfig desk_training() {
    TrainConfig cfg;
    cfg.epochs = 16000;
    cfg.batch = 64;
    cfg.lr = 1e-3;
    cfg.seed = 3;
    return cfg;
}

DenoiserModel fresh_model(Conditioning cond = Conditioning::None) {
    DenoiserSpec sp;
    sp.length = kL;
    sp.features = 1;
    sp.conditioning = cond;
    return init_denoiser(sp, make_schedule(), 1);
}

ConstraintSet global_min_10() { return global_min_at(kL, 1, 10, 0); }

const DenoiserModel& plain_model() {
    static const DenoiserModel m = train_difftime(fresh_model(), sines(), desk_training()).model;
    return m;
}

const DenoiserModel& penalty_model() {
    static const DenoiserModel m =
        train_lossdifftime(fresh_model(), sines(), desk_training(), global_min_10(), 3.5).model;
    return m;
}

const DenoiserModel& trend_model() {
    static const DenoiserModel m = train_difftime(fresh_model(Conditioning::Trend), sines(), desk_training()).model;
    return m;
}

SampleOptions sample_options(std::size_t n, std::uint64_t seed) {
    SampleOptions o;
    o.n = n;
    o.seed = seed;
    o.jobs = jobs();
    return o;
}

// ---------------------------------------------------------------------------

Outcome fixed_point_exactness() {
    const auto t0 = Clock::now();
    const DenoiserModel& m = plain_model();
    const double train_s = seconds_since(t0);
    ConstraintSet cs(kL, 1);
    cs.fixed_point(6, 0, 0.5);
    cs.fixed_point(18, 0, -0.25);
    const auto t1 = Clock::now();
    const auto xs = sample_difftime(m, sample_options(1000, 7), {}, fixed_points_of(cs));
    const double sample_s = seconds_since(t1);
    const double rate = satisfaction_rate(xs, cs, 0.0).value;
    return {rate == 1.0 && xs.size() == 1000, "rate " + fmt(rate) + " over " + std::to_string(xs.size()) +
                                                  " samples; sampling " + fmt(sample_s, 3) + " s on " +
                                                  std::to_string(jobs()) + " core(s), training " + fmt(train_s, 3) + " s"};
}

// Criteria 2 and 3 share the solves.
struct CopRun {
    std::size_t attempted = 0, solved = 0, satisfied = 0, within_budget = 0;
    double seconds = 0.0;
    std::vector<std::string> per_set;
};

const CopRun& cop_run() {
    static const CopRun run = [] {
        CopRun r;
        const fs::path csv = fs::temp_directory_path() / "ctsg_acceptance_ohlcv.csv";
        std::ofstream(csv) << synthetic_ohlcv_csv(200 * kL, 2024);
        const Dataset windows = load_csv(csv.string(), ohlcv_columns(), kL, kL);
        const std::vector<TimeSeries>& seeds = windows.samples;
        const std::size_t K = ohlcv_columns().size();
        const RealismSpec realism;
        CopConfig cfg;
        cfg.seed = 11;

        std::vector<std::pair<std::string, std::vector<ConstraintSet>>> sets;
        {
            std::vector<ConstraintSet> fp;
            for (const auto& s : seeds) {
                ConstraintSet cs(kL, K);
                cs.fixed_point(6, 3, s.at(6, 3) * 1.01);
                cs.fixed_point(18, 3, s.at(18, 3) * 0.99);
                fp.push_back(cs);
            }
            sets.emplace_back("fixed-point", fp);
        }
        sets.emplace_back("global-min", std::vector<ConstraintSet>(seeds.size(), global_min_at(kL, K, 10, 3)));
        sets.emplace_back("ohlc", std::vector<ConstraintSet>(seeds.size(), ohlc(kL, K)));

        const auto t0 = Clock::now();
        for (const auto& [name, css] : sets) {
            std::vector<CopResult> res(seeds.size());
            parallel_for(seeds.size(), jobs(), [&](std::size_t i) {
                CopConfig c = cfg;
                c.seed = Rng(cfg.seed).derive(name).derive(static_cast<std::uint64_t>(i)).next_u64();
                res[i] = cop_solve(seeds[i], css[i], realism, c);
            });
            std::size_t ok = 0;
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                ++r.attempted;
                if (res[i].report.status != SolveStatus::Success) continue;
                ++ok;
                ++r.solved;
                const TimeSeries& x = *res[i].series;
                if (is_satisfied(css[i], x, 1e-4).satisfied) ++r.satisfied;
                const double bound = cfg.budget * std::ldexp(1.0, static_cast<int>(res[i].report.retry));
                if (realism_error(x, seeds[i], realism) <= bound && res[i].report.budget == bound) ++r.within_budget;
            }
            r.per_set.push_back(name + " " + std::to_string(ok) + "/" + std::to_string(seeds.size()));
        }
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

Outcome cop_feasibility() {
    const CopRun& r = cop_run();
    const double success = double(r.solved) / double(r.attempted);
    const double rate = r.solved ? double(r.satisfied) / double(r.solved) : 0.0;
    std::string sets;
    for (const auto& s : r.per_set) sets += (sets.empty() ? "" : ", ") + s;
    return {rate == 1.0 && success >= 0.95 && r.seconds < 600.0,
            "satisfaction " + fmt(rate) + " on solved, success " + fmt(success) + " (" + sets + "), " +
                fmt(r.seconds, 4) + " s"};
}

Outcome cop_budget() {
    const CopRun& r = cop_run();
    return {r.solved > 0 && r.within_budget == r.solved,
            std::to_string(r.within_budget) + "/" + std::to_string(r.solved) + " solutions within b*2^r"};
}

Outcome guided_identity() {
    const DenoiserModel& m = plain_model();
    const NoiseSchedule& s = m.schedule;
    const DdimPlan plan = DdimPlan::full(s);
    const auto a = sample_ddim(m, plan, sample_options(100, 5));
    const auto b = sample_guided(m, plan, global_min_10(), 0.0, sample_options(100, 5));
    bool bitwise = a.size() == b.size();
    for (std::size_t i = 0; bitwise && i < a.size(); ++i) bitwise = a[i].storage() == b[i].storage();

    // per-step comparison with a trained ε̂ on noisy inputs
    Rng rng(9);
    const DdimPlan eq = DdimPlan::full(s, SigmaRule::DdpmEquivalent);
    double worst = 0.0;
    const std::size_t d = m.spec.series_size();
    for (std::size_t t = 1; t <= s.T; ++t) {
        const Tensor x = ctsg::test::random_tensor({8, d}, rng);
        const Tensor z = ctsg::test::random_tensor({8, d}, rng);
        const Tensor e = predict_batch(m, x, std::vector<std::size_t>(8, t));
        const Tensor p = ddim_step(x, e, t, t - 1, s, eq.sigma_at(s, t, t - 1), &z);
        const Tensor q = ddpm_step(x, e, t, s, z, VarianceRule::Posterior);
        for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, std::abs(p[k] - q[k]));
    }
    return {bitwise && worst <= 1e-9,
            std::string("rho=0 guided ") + (bitwise ? "bitwise equal" : "DIFFERS") + " to DDIM; max per-step |DDIM - DDPM| " +
                fmt(worst, 3)};
}

Outcome guided_effectiveness() {
    const DenoiserModel& m = plain_model();
    const auto t0 = Clock::now();
    const auto xs = sample_guided(m, DdimPlan::full(m.schedule), global_min_10(), 2.0, sample_options(1000, 7));
    const double secs = seconds_since(t0);
    const double rate = satisfaction_rate(xs, global_min_10(), 0.0).value;
    const double base = satisfaction_rate(sample_ddim(m, DdimPlan::full(m.schedule), sample_options(1000, 7)),
                                          global_min_10(), 0.0)
                            .value;
    return {rate >= 0.8 && secs < 300.0,
            "rate " + fmt(rate) + " (unguided " + fmt(base) + "), sampling " + fmt(secs, 3) + " s"};
}

Outcome loss_direction() {
    const DdimPlan plan = DdimPlan::full(plain_model().schedule);
    const double with = satisfaction_rate(sample_ddim(penalty_model(), plan, sample_options(1000, 7)), global_min_10(), 0.0).value;
    const double without =
        satisfaction_rate(sample_ddim(plain_model(), plan, sample_options(1000, 7)), global_min_10(), 0.0).value;
    return {with - without >= 0.2, "rho=3.5 rate " + fmt(with) + " vs rho=0 rate " + fmt(without)};
}

Outcome trend_following() {
    // held-out sines; trends are their cubic fits
    const Dataset test = normalize(generate_sines({1, kL, 500, 77}), *sines().norm);
    std::vector<TimeSeries> trends;
    for (const auto& x : test.samples) trends.push_back(polynomial_trend(x, 3));
    const DdimPlan plan = DdimPlan::full(plain_model().schedule);
    const auto cond = sample_ddim(trend_model(), plan, sample_options(trends.size(), 7), trends);
    const auto uncond = sample_ddim(plain_model(), plan, sample_options(trends.size(), 7));
    const double ec = trend_error(cond, trends).perc_error;
    const double eu = trend_error(uncond, trends).perc_error;
    const double floor = trend_error(test.samples, trends).perc_error;
    return {ec <= 0.10 && ec < eu, "conditional perc error " + fmt(ec) + ", unconditional " + fmt(eu) +
                                       ", held-out data vs own trends " + fmt(floor)};
}

Outcome diffusion_numerics() {
    const NoiseSchedule s = make_schedule();
    Rng rng(17);
    const std::size_t n = 100000;
    bool moments = true;
    std::string detail;
    for (std::size_t t : {1, 25, 50}) {
        const double x0 = 0.7;
        double sum = 0.0, sq = 0.0;
        const Tensor x = Tensor::full({1, 1}, x0);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = forward_sample(x, t, Tensor::full({1, 1}, rng.normal()), s)[0];
            sum += v[i];
        }
        const double mean = sum / double(n);
        for (double a : v) sq += (a - mean) * (a - mean);
        const double sd = std::sqrt(sq / double(n - 1));
        const double want_mean = std::sqrt(s.alpha_bar[t]) * x0, want_sd = std::sqrt(1.0 - s.alpha_bar[t]);
        // standard errors of the sample mean and sample std of a normal
        const double se_mean = want_sd / std::sqrt(double(n)), se_sd = want_sd / std::sqrt(2.0 * double(n - 1));
        const bool ok = std::abs(mean - want_mean) <= 3 * se_mean && std::abs(sd - want_sd) <= 3 * se_sd;
        moments = moments && ok;
        detail += "t=" + std::to_string(t) + (ok ? " ok" : " off") + ", ";
    }
    bool monotone = true;
    for (auto kind : {ScheduleKind::Linear, ScheduleKind::Quadratic, ScheduleKind::Cosine}) {
        const NoiseSchedule k = make_schedule(kind);
        for (std::size_t t = 1; t <= k.T; ++t) monotone = monotone && k.alpha_bar[t] < k.alpha_bar[t - 1];
    }
    double recon = 0.0;
    for (std::size_t t = 1; t <= s.T; ++t) {
        const Tensor x0 = ctsg::test::random_tensor({4, 24}, rng);
        const Tensor eps = ctsg::test::random_tensor({4, 24}, rng);
        const Tensor back = reconstruct_x0(forward_sample(x0, t, eps, s), t, eps, s);
        for (std::size_t k = 0; k < back.size(); ++k) recon = std::max(recon, std::abs(back[k] - x0[k]));
    }
    return {moments && monotone && recon <= 1e-9, detail + "alpha_bar " + (monotone ? "decreasing" : "NOT decreasing") +
                                                      ", reconstruction " + fmt(recon, 3)};
}

Outcome gradient_suite() {
    using ctsg::test::numeric_grad;
    using ctsg::test::rel_error;
    double worst_loss = 0.0, worst_pen = 0.0, worst_guide = 0.0;
    Rng rng(23);

    // (a) training loss over every parameter of a small network
    {
        DenoiserSpec sp;
        sp.length = 6;
        sp.features = 2;
        sp.channels = 8;
        sp.hidden_layers = 2;
        sp.embedding_dim = 6;
        sp.conditioning = Conditioning::Trend;
        DenoiserModel m = init_denoiser(sp, make_schedule(), 4);
        for (auto& p : m.params)
            for (double& v : p.values()) v = 0.4 * rng.normal();
        const std::size_t B = 5, d = sp.series_size();
        const Tensor x = ctsg::test::random_tensor({B, d}, rng), s = ctsg::test::random_tensor({B, d}, rng);
        std::vector<std::size_t> ts(B);
        for (auto& t : ts) t = 1 + rng.uniform_index(50);
        const Tensor input = denoiser_input(m, x, ts, &s);
        const Tensor eps = ctsg::test::random_tensor({B, d}, rng);
        Graph g;
        std::vector<Var> P;
        for (const auto& p : m.params) P.push_back(g.leaf(p));
        const Var loss = scale(sum(square(sub(g.constant(eps), denoiser_forward(sp, P, g.constant(input))))), 1.0 / B);
        const Gradients grads = g.backward(loss);
        for (std::size_t k = 0; k < m.params.size(); ++k) {
            auto f = [&](const std::vector<double>& v) {
                std::vector<Tensor> ps = m.params;
                ps[k] = Tensor(ps[k].shape(), v);
                return sum(square(sub(eps, denoiser_forward(sp, ps, input)))).item() / double(B);
            };
            worst_loss = std::max(worst_loss, rel_error(numeric_grad(f, m.params[k].storage()), grads[P[k]].storage(), 1e-6));
        }
    }

    // (b) each builtin penalty, plus fixed points, trends and expressions
    {
        const std::size_t L = 12, K = 6;
        TimeSeries x = ctsg::test::random_tensor({L, K}, rng);
        std::vector<ConstraintSet> sets{global_min_at(L, K, 4, 1), global_max_at(L, K, 7, 2), ohlc(L, K)};
        ConstraintSet mixed(L, K);
        mixed.fixed_point(3, 0, 0.4);
        mixed.trend(ctsg::test::random_tensor({L, K}, rng));
        mixed.ineq(expr::parse("sum(x[0:6,0:1]) - 1"));
        mixed.eq(expr::parse("x[2,3] * x[5,4] - 0.1"));
        sets.push_back(mixed);
        // Squared hinges are piecewise quadratic, so central differences are
        // exact between kinks; h = 1e-3 keeps the roundoff (ulp(f)/h) well
        // below 1e-6 where the true gradient is exactly zero.
        for (const auto& cs : sets) {
            auto f = [&](const std::vector<double>& v) { return penalty(cs, Tensor(x.shape(), v)); };
            worst_pen =
                std::max(worst_pen, rel_error(numeric_grad(f, x.storage(), 1e-3), penalty_grad(cs, x).storage(), 1e-6));
        }
    }

    // (c) guidance: ∇_{x_t} penalty(x̂₀(x_t, ε̂))
    {
        const NoiseSchedule s = make_schedule();
        const std::size_t L = 24, K = 1;
        const ConstraintSet cs = global_min_at(L, K, 10, 0);
        const Tensor xt = ctsg::test::random_tensor({3, L * K}, rng);
        const Tensor eps = ctsg::test::random_tensor({3, L * K}, rng);
        for (std::size_t t : {2, 25, 49}) {
            const Tensor g = guidance_gradient(cs, xt, eps, t, s, K);
            auto f = [&](const std::vector<double>& v) {
                const Tensor x0 = reconstruct_x0(Tensor(xt.shape(), v), t, eps, s);
                return sum(penalty_rows(cs, x0, K)).item();
            };
            worst_guide = std::max(worst_guide, rel_error(numeric_grad(f, xt.storage(), 1e-6), g.storage(), 1e-6));
        }
    }
    return {worst_loss <= 1e-4 && worst_pen <= 1e-4 && worst_guide <= 1e-4,
            "max rel err: training loss " + fmt(worst_loss, 3) + ", penalties " + fmt(worst_pen, 3) + ", guidance " +
                fmt(worst_guide, 3)};
}

Outcome solver_oracle() {
    NlpProblem disk;
    disk.objective = [](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = g[1] = 1.0;
        return x[0] + x[1];
    };
    disk.ineq.push_back([](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = 2.0 * x[0];
        g[1] = 2.0 * x[1];
        return x[0] * x[0] + x[1] * x[1] - 1.0;
    });
    const NlpResult r = nlp_solve({0.2, 0.1}, disk);
    const double err = std::max(std::abs(r.x[0] + std::sqrt(0.5)), std::abs(r.x[1] + std::sqrt(0.5)));

    NlpProblem bad;
    bad.objective = [](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = 2.0 * x[0];
        return x[0] * x[0];
    };
    bad.ineq.push_back([](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = 1.0;
        return x[0];
    });
    bad.ineq.push_back([](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = -1.0;
        return 1.0 - x[0];
    });
    const NlpResult q = nlp_solve({0.5}, bad);
    return {r.status == NlpStatus::Success && err <= 1e-4 && q.status == NlpStatus::Infeasible,
            "disk optimum error " + fmt(err, 3) + ", contradictory bounds reported " + to_string(q.status)};
}

Outcome metric_sanity() {
    const MetricConfig cfg;
    const Dataset real = generate_sines({1, kL, 1000, 1});
    const double same = discriminative_score(real, generate_sines({1, kL, 1000, 2}), cfg, 7).value;
    Dataset offset = generate_sines({1, kL, 1000, 3});
    for (auto& x : offset.samples)
        for (double& v : x.values()) v += 5.0;
    const double apart = discriminative_score(real, offset, cfg, 7).value;
    Dataset constant;
    for (int i = 0; i < 100; ++i) constant.samples.push_back(Tensor::full({kL, 2}, 0.05 * i - 2.0));
    const double pred = predictive_score(constant, constant, cfg, 1).value;
    return {same <= 0.1 && apart >= 0.4 && pred <= 1e-6,
            "disc same " + fmt(same) + ", disc offset " + fmt(apart) + ", pred constant " + fmt(pred, 3)};
}

// ---------------------------------------------------------------------------
// CLI determinism

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" CTSG_CLI_PATH "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli_determinism() {
    struct Step {
        std::string args;
        std::vector<std::string> outputs;
    };
    const std::string model = "--channels 16 --layers 1 --embedding 8";
    const std::vector<Step> steps{
        {"--seed 1 gen-data sines --k 1 --l 12 --n 80 --out s.csv", {"s.csv", "s.csv.manifest"}},
        {"--seed 1 gen-data ohlcv --rows 120 --out o.csv", {"o.csv", "o.csv.manifest"}},
        {"--seed 2 train --data s.csv --out m.ckpt --steps 60 " + model, {"m.ckpt", "m.ckpt.loss.csv", "m.ckpt.manifest"}},
        {"--seed 2 train --data s.csv --out p.ckpt --steps 40 --method loss-difftime --rho 3.5 --constraints gm.toml " + model,
         {"p.ckpt", "p.ckpt.loss.csv", "p.ckpt.manifest"}},
        {"--seed 3 sample difftime --ckpt m.ckpt --n 8 --fixed-points \"2,0=0.5;9,0=-0.5\" --out d.csv",
         {"d.csv", "d.csv.manifest"}},
        {"--seed 3 sample ddim --ckpt m.ckpt --n 8 --steps 10 --out i.csv", {"i.csv", "i.csv.manifest"}},
        {"--seed 3 --jobs 2 sample guided --ckpt m.ckpt --n 8 --rho 2 --constraints gm.toml --out g.csv",
         {"g.csv", "g.csv.manifest"}},
        {"--seed 4 sample cop --seed-data o.csv --window 24 --stride 24 --n 3 --constraints fp.toml --out c.csv",
         {"c.csv", "c.csv.report", "c.csv.manifest"}},
        {"--seed 4 finetune --seed-data o.csv --window 24 --stride 24 --n 3 --constraints fp.toml --out f.csv",
         {"f.csv", "f.csv.report", "f.csv.manifest"}},
        {"--seed 5 eval --real s.csv --synth g.csv --metrics disc,pred,sat --constraints gm.toml --repeats 2 "
         "--metric-steps 30 --out e1.txt",
         {"e1.txt"}},
        {"--seed 5 eval --synth d.csv --trend i.csv --metrics trend --out e2.txt", {"e2.txt"}},
        {"--seed 5 eval --real o.csv --window 24 --stride 24 --synth c.csv --metrics facts --out e3.txt", {"e3.txt"}},
    };
    const fs::path root = fs::temp_directory_path() / "ctsg_acceptance_cli";
    fs::remove_all(root);
    std::vector<fs::path> dirs{root / "a", root / "b"};
    for (const auto& d : dirs) {
        fs::create_directories(d);
        std::ofstream(d / "gm.toml") << "[space]\nlength = 12\nfeatures = 1\n\n[[constraint]]\nkind = \"global_min\"\nrow = 5\ncol = 0\n";
        std::ofstream(d / "fp.toml") << "[[constraint]]\nkind = \"fixed_point\"\nrow = 6\ncol = 3\nvalue = 101\n";
    }
    std::size_t compared = 0;
    for (const auto& st : steps) {
        for (const auto& d : dirs) {
            if (run_cli(d, st.args) != 0) return {false, "command failed: " + st.args + ": " + slurp(d / "stderr.txt")};
        }
        for (const auto& f : st.outputs) {
            if (!fs::exists(dirs[0] / f)) return {false, "missing output " + f};
            if (slurp(dirs[0] / f) != slurp(dirs[1] / f)) return {false, "output differs on rerun: " + f};
            ++compared;
        }
    }
    return {true, std::to_string(steps.size()) + " commands, " + std::to_string(compared) + " outputs byte-identical"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"fixed-point exactness", fixed_point_exactness},
        {"COP hard-constraint feasibility", cop_feasibility},
        {"COP realism budget", cop_budget},
        {"guided sampling identity", guided_identity},
        {"guided sampling effectiveness", guided_effectiveness},
        {"penalty-trained direction", loss_direction},
        {"trend following", trend_following},
        {"diffusion numerics", diffusion_numerics},
        {"gradient suite", gradient_suite},
        {"solver oracle", solver_oracle},
        {"metric sanity", metric_sanity},
        {"CLI determinism", cli_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2zu: %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
