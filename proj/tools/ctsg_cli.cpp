#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctsg.hpp"

using namespace ctsg;

namespace {

enum ExitCode { Ok = 0, Usage = 1, Io = 2, Solver = 3 };

// Failure of a numeric routine reported with exit code 3.
struct SolverFailure : Error {
    using Error::Error;
};

struct Globals {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

std::uint64_t stream(std::uint64_t seed, const char* name) { return Rng(seed).derive(name).next_u64(); }

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        const auto t = detail::trim(cur);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

// ------------------------------------------------------------------ files

struct DataSource {
    std::string path;
    std::string columns;  // comma separated; empty picks every numeric column
    std::size_t window = 24;
    std::size_t stride = 1;

    void add_options(CLI::App* cmd, const std::string& flag, const std::string& what) {
        cmd->add_option(flag, path, what)->required();
        cmd->add_option("--columns", columns, "CSV columns to read (default: all numeric columns)");
        cmd->add_option("--window", window, "window length for raw CSV input");
        cmd->add_option("--stride", stride, "window stride for raw CSV input");
    }
};

bool is_samples_file(const std::string& path) {
    const auto lines = detail::read_lines(path);
    return !lines.empty() && lines[0].rfind("sample_id,t", 0) == 0;
}

std::vector<std::string> numeric_columns(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.size() < 2) throw SchemaError(path + ": no data rows");
    const auto header = detail::split_csv_line(lines[0]);
    const auto first = detail::split_csv_line(lines[1]);
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < header.size() && i < first.size(); ++i) {
        try {
            parse_double(first[i], "");
            cols.push_back(header[i]);
        } catch (const ParseError&) {
        }
    }
    if (cols.empty()) throw SchemaError(path + ": no numeric columns");
    return cols;
}

// Either a samples CSV (sample_id,t,...) or a raw table cut into windows.
Dataset load_dataset(const DataSource& src) {
    if (is_samples_file(src.path)) {
        Dataset ds;
        ds.name = src.path;
        ds.source = src.path;
        ds.samples = read_samples(src.path);
        check_dataset(ds);
        return ds;
    }
    const auto cols = src.columns.empty() ? numeric_columns(src.path) : split(src.columns, ',');
    return load_csv(src.path, cols, src.window, src.stride);
}

std::vector<TimeSeries> load_series(const std::string& path) {
    auto s = read_samples(path);
    if (s.empty()) throw SchemaError(path + ": no samples");
    return s;
}

void write_csv_file(const std::string& path, const std::string& text) { detail::write_text(path, text); }

// Echo of every option of the command chain, defaults included, plus the seed.
TextDocument manifest(const std::vector<const CLI::App*>& chain, const Globals& g) {
    TextDocument doc;
    auto& run = doc.table_or_add("run");
    std::string command;
    for (const auto* app : chain)
        if (app->get_parent()) command += (command.empty() ? "" : " ") + app->get_name();
    run.set_string("command", command);
    run.set_string("seed", std::to_string(g.seed));
    auto& cfg = doc.table_or_add("config");
    for (const auto* app : chain) {
        for (const CLI::Option* opt : app->get_options()) {
            const std::string name = opt->get_single_name();
            if (name == "help" || name == "config" || name == "seed" || name == "jobs" || name.empty()) continue;
            std::string value;
            if (opt->count() > 0) {
                const auto res = opt->results();
                for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
            } else {
                value = opt->get_default_str();
            }
            cfg.set_string(name, value);
        }
    }
    return doc;
}

struct Manifested {
    std::vector<const CLI::App*> chain;
    const Globals* globals = nullptr;

    TextDocument doc() const { return manifest(chain, *globals); }
};

ConstraintSet load_constraints_for(const std::string& path, std::size_t L, std::size_t K) {
    ConstraintSet cs = load_constraints(path);
    if (!cs.has_space()) cs.set_space(L, K);
    cs.validate(L, K);
    return cs;
}

// Constraints in the model's coordinates; identity when the model was trained on raw data.
ConstraintSet model_space(const ConstraintSet& cs, const DenoiserModel& m) {
    return m.norm ? normalized_constraints(cs, *m.norm) : cs;
}

std::vector<TimeSeries> to_data_space(std::vector<TimeSeries> xs, const DenoiserModel& m) {
    if (m.norm)
        for (auto& x : xs) x = denormalize_series(x, *m.norm);
    return xs;
}

std::vector<TimeSeries> trends_for(const std::string& path, const DenoiserModel& m) {
    if (path.empty()) return {};
    auto tr = load_series(path);
    if (m.norm)
        for (auto& t : tr) t = normalize_series(t, *m.norm);
    return tr;
}

ConstraintSet parse_fixed_points(const std::string& text, std::size_t L, std::size_t K) {
    ConstraintSet cs(L, K);
    for (const auto& item : split(text, ';')) {
        const auto eq = item.find('=');
        const auto comma = item.find(',');
        if (eq == std::string::npos || comma == std::string::npos || comma > eq)
            throw UsageError("fixed point '" + item + "' is not of the form row,col=value");
        const double row = parse_double(item.substr(0, comma), "fixed point row");
        const double col = parse_double(item.substr(comma + 1, eq - comma - 1), "fixed point column");
        if (row < 0 || col < 0 || row != std::floor(row) || col != std::floor(col))
            throw UsageError("fixed point indices must be non-negative integers: '" + item + "'");
        cs.fixed_point(static_cast<std::size_t>(row), static_cast<std::size_t>(col),
                       parse_double(item.substr(eq + 1), "fixed point value"));
    }
    cs.validate(L, K);
    return cs;
}

// ------------------------------------------------------------------ gen-data

struct GenSines {
    std::size_t k = 5, l = 24, n = 10000;
    std::string out;
};

struct GenOhlcv {
    std::size_t rows = 3000;
    std::string out;
};

void run_gen_sines(const GenSines& o, const Manifested& m) {
    if (o.k == 0 || o.l == 0 || o.n == 0) throw UsageError("gen-data sines: --k, --l and --n must be positive");
    const Dataset ds = generate_sines({o.k, o.l, o.n, m.globals->seed});
    write_samples(o.out, ds.samples);
    TextDocument doc = m.doc();
    const TextDocument dm = dataset_manifest(ds);
    doc.table_or_add("dataset") = *dm.table("dataset");
    doc.save(o.out + ".manifest");
}

void run_gen_ohlcv(const GenOhlcv& o, const Manifested& m) {
    if (o.rows < 2) throw UsageError("gen-data ohlcv: --rows must be at least 2");
    write_csv_file(o.out, synthetic_ohlcv_csv(o.rows, stream(m.globals->seed, "data")));
    m.doc().save(o.out + ".manifest");
}

// ------------------------------------------------------------------ train

struct TrainOpts {
    DataSource data;
    std::string out;
    std::string method = "difftime";
    std::string constraints;
    double rho = 0.0;
    std::size_t steps = TrainConfig{}.epochs;
    std::size_t batch = TrainConfig{}.batch;
    double lr = TrainConfig{}.lr;
    double weight_decay = TrainConfig{}.weight_decay;
    std::string schedule = "quadratic";
    std::size_t T = 50;
    double beta_start = 1e-6, beta_end = 0.5;
    std::size_t channels = DenoiserSpec{}.channels;
    std::size_t layers = DenoiserSpec{}.hidden_layers;
    std::size_t embedding = DenoiserSpec{}.embedding_dim;
    std::string conditioning = "none";
    bool no_gated_skip = false;
};

void run_train(const TrainOpts& o, const Manifested& m) {
    if (o.method != "difftime" && o.method != "loss-difftime")
        throw UsageError("unknown training method '" + o.method + "' (difftime, loss-difftime)");
    if (o.conditioning != "none" && o.conditioning != "trend")
        throw UsageError("unknown conditioning '" + o.conditioning + "' (none, trend)");
    const Dataset ds = normalize(load_dataset(o.data));

    DenoiserSpec spec;
    spec.length = ds.length();
    spec.features = ds.features();
    spec.channels = o.channels;
    spec.hidden_layers = o.layers;
    spec.embedding_dim = o.embedding;
    spec.conditioning = o.conditioning == "trend" ? Conditioning::Trend : Conditioning::None;
    spec.gated_skip = !o.no_gated_skip;
    const NoiseSchedule sched = make_schedule(parse_schedule_kind(o.schedule), o.T, o.beta_start, o.beta_end);
    DenoiserModel model = init_denoiser(spec, sched, stream(m.globals->seed, "init"));

    TrainConfig cfg;
    cfg.epochs = o.steps;
    cfg.batch = o.batch;
    cfg.lr = o.lr;
    cfg.weight_decay = o.weight_decay;
    cfg.seed = stream(m.globals->seed, "training");

    TrainResult r;
    if (o.method == "loss-difftime") {
        if (o.constraints.empty()) throw UsageError("loss-difftime needs --constraints");
        const ConstraintSet cs = load_constraints_for(o.constraints, ds.length(), ds.features());
        r = train_lossdifftime(std::move(model), ds, cfg, normalized_constraints(cs, *ds.norm), o.rho);
    } else {
        r = train_difftime(std::move(model), ds, cfg);
    }
    save_denoiser(r.model, o.out);
    std::string trace = "step,loss\n";
    for (std::size_t i = 0; i < r.loss.size(); ++i) trace += std::to_string(i + 1) + ',' + format_double(r.loss[i]) + '\n';
    write_csv_file(o.out + ".loss.csv", trace);
    TextDocument doc = m.doc();
    doc.table_or_add("dataset") = *dataset_manifest(ds).table("dataset");
    auto& res = doc.table_or_add("result");
    res.set_number("final_loss", r.loss.empty() ? 0.0 : r.loss.back());
    doc.save(o.out + ".manifest");
}

// ------------------------------------------------------------------ sample

struct SampleCommon {
    std::string ckpt, out, trend, constraints;
    std::size_t n = 1000;
    double tol = 1e-6;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--ckpt", ckpt, "trained model checkpoint")->required();
        cmd->add_option("--n", n, "number of samples");
        cmd->add_option("--out", out, "output samples CSV")->required();
        cmd->add_option("--trend", trend, "trend samples CSV (one shared trend or one per sample)");
        cmd->add_option("--tol", tol, "tolerance for the reported satisfaction rate");
    }
};

struct SampleOpts {
    SampleCommon common;
    std::string variance = "sqrt-beta";
    std::string fixed_points;
    std::size_t steps = 0;  // 0: every diffusion step
    std::string sigma = "zero";
    double rho = 2.0;
};

void finish_sampling(const SampleCommon& c, const Manifested& m, const std::vector<TimeSeries>& xs,
                     const std::optional<ConstraintSet>& cs) {
    write_samples(c.out, xs);
    TextDocument doc = m.doc();
    if (cs) {
        const MetricReport sat = satisfaction_rate(xs, *cs, c.tol);
        sat.write(doc.table_or_add("satisfaction"));
    }
    doc.save(c.out + ".manifest");
}

SampleOptions sample_options(const SampleOpts& o, const Globals& g) {
    SampleOptions opt;
    opt.n = o.common.n;
    opt.seed = stream(g.seed, "sampling");
    opt.jobs = g.jobs;
    opt.variance = parse_variance_rule(o.variance);
    if (o.common.n == 0) throw UsageError("--n must be positive");
    return opt;
}

DdimPlan ddim_plan(const SampleOpts& o, const NoiseSchedule& s) {
    SigmaRule rule;
    if (o.sigma == "zero") rule = SigmaRule::Zero;
    else if (o.sigma == "ddpm") rule = SigmaRule::DdpmEquivalent;
    else throw UsageError("unknown sigma rule '" + o.sigma + "' (zero, ddpm)");
    return o.steps == 0 ? DdimPlan::full(s, rule) : DdimPlan::strided(s, o.steps, rule);
}

void run_sample_difftime(const SampleOpts& o, const Manifested& m) {
    const DenoiserModel model = load_denoiser(o.common.ckpt);
    const std::size_t L = model.spec.length, K = model.spec.features;
    ConstraintSet cs(L, K);
    if (!o.common.constraints.empty()) cs.merge(load_constraints_for(o.common.constraints, L, K));
    if (!o.fixed_points.empty()) cs.merge(parse_fixed_points(o.fixed_points, L, K));
    const auto fixed_model = fixed_points_of(model_space(cs, model));
    auto xs = to_data_space(
        sample_difftime(model, sample_options(o, *m.globals), trends_for(o.common.trend, model), fixed_model), model);
    // rewrite the data-space values so rounding in denormalization cannot move them
    for (auto& x : xs)
        for (const auto& f : fixed_points_of(cs)) x.at(f.row, f.col) = f.value;
    finish_sampling(o.common, m, xs, cs.empty() ? std::nullopt : std::optional<ConstraintSet>(cs));
}

void run_sample_ddim(const SampleOpts& o, const Manifested& m) {
    const DenoiserModel model = load_denoiser(o.common.ckpt);
    const auto xs = to_data_space(sample_ddim(model, ddim_plan(o, model.schedule), sample_options(o, *m.globals),
                                              trends_for(o.common.trend, model)),
                                  model);
    std::optional<ConstraintSet> cs;
    if (!o.common.constraints.empty())
        cs = load_constraints_for(o.common.constraints, model.spec.length, model.spec.features);
    finish_sampling(o.common, m, xs, cs);
}

void run_sample_guided(const SampleOpts& o, const Manifested& m) {
    const DenoiserModel model = load_denoiser(o.common.ckpt);
    const ConstraintSet cs = load_constraints_for(o.common.constraints, model.spec.length, model.spec.features);
    if (o.rho < 0.0) throw UsageError("--rho must be non-negative");
    const auto xs = to_data_space(sample_guided(model, ddim_plan(o, model.schedule), model_space(cs, model), o.rho,
                                                sample_options(o, *m.globals), trends_for(o.common.trend, model)),
                                  model);
    finish_sampling(o.common, m, xs, cs);
}

// ------------------------------------------------------------------ cop

struct CopOpts {
    DataSource seed_data;
    std::string in, out, constraints;
    std::string mode = "generate";
    std::string seed_source = "data";
    std::size_t n = 0;  // 0: every seed
    double budget = CopConfig{}.budget;
    std::size_t window_size = CopConfig{}.window;
    double overlap = CopConfig{}.overlap;
    std::size_t retries = CopConfig{}.retries;
    std::size_t iterations = CopConfig{}.iterations;
    double trend_weight = -1.0;  // negative: automatic
    std::string realism = "returns";
    std::size_t lag = 5;
    std::size_t max_iter = CopConfig{}.max_iter;
    double report_tol = CopConfig{}.report_tol;
};

std::size_t nearest(const std::vector<TimeSeries>& pool, const TimeSeries& x) {
    std::size_t best = 0;
    double d_best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].shape() != x.shape()) continue;
        const double d = l2_distance(pool[i], x);
        if (d < d_best) {
            d_best = d;
            best = i;
        }
    }
    if (!std::isfinite(d_best)) throw DimensionError("no --seed-data window matches the candidate shape");
    return best;
}

void run_cop(const CopOpts& o, const Manifested& m) {
    const std::uint64_t seed = m.globals->seed;
    CopConfig cfg;
    cfg.budget = o.budget;
    cfg.window = o.window_size;
    cfg.overlap = o.overlap;
    cfg.retries = o.retries;
    cfg.iterations = o.iterations;
    if (o.trend_weight >= 0.0) cfg.trend_weight = o.trend_weight;
    cfg.mode = parse_cop_mode(o.mode);
    cfg.max_iter = o.max_iter;
    cfg.report_tol = o.report_tol;
    cfg.seed = stream(seed, "cop");
    cfg.validate();
    RealismSpec realism;
    realism.kind = parse_realism_kind(o.realism);
    realism.lag = o.lag;

    std::vector<TimeSeries> real;
    if (!o.seed_data.path.empty()) real = load_dataset(o.seed_data).samples;
    std::vector<TimeSeries> seeds, refs;
    bool use_refs = false;
    if (!o.in.empty()) {
        seeds = load_series(o.in);
        if (o.n > 0 && o.n < seeds.size()) seeds.resize(o.n);
        if (!real.empty()) {
            for (const auto& s : seeds) refs.push_back(real[nearest(real, s)]);
            use_refs = true;
        }
    } else {
        if (real.empty()) throw UsageError("sample cop needs --in candidates or --seed-data");
        std::vector<std::size_t> order(real.size());
        std::iota(order.begin(), order.end(), 0);
        Rng pick = Rng(seed).derive("cop-seeds");
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[pick.uniform_index(i)]);
        const std::size_t count = o.n == 0 ? real.size() : std::min(o.n, real.size());
        for (std::size_t i = 0; i < count; ++i) {
            const TimeSeries& w = real[order[i]];
            const std::uint64_t s = Rng(seed).derive("cop-seed-walk").derive(i).next_u64();
            if (o.seed_source == "data") seeds.push_back(w);
            else if (o.seed_source == "brownian") seeds.push_back(brownian_seed(w, s));
            else if (o.seed_source == "blend") seeds.push_back(blended_seed(w, s));
            else throw UsageError("unknown seed source '" + o.seed_source + "' (data, brownian, blend)");
            refs.push_back(w);
        }
        use_refs = o.seed_source != "data";
    }
    const std::size_t L = seeds.front().dim(0), K = seeds.front().dim(1);
    const ConstraintSet cs = o.constraints.empty() ? ConstraintSet(L, K) : load_constraints_for(o.constraints, L, K);

    const auto results = cop_batch(seeds, cs, realism, cfg, m.globals->jobs, use_refs ? &refs : nullptr);

    std::vector<TimeSeries> solved;
    TextDocument report;
    std::string timing = "seed_index,wall_seconds\n";
    std::size_t ok = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i].report;
        auto& t = report.append_item("solve");
        t.set_int("seed_index", static_cast<long long>(i));
        t.set_string("status", to_string(r.status));
        t.set_int("retry", static_cast<long long>(r.retry));
        t.set_number("budget", r.budget);
        t.set_number("objective", r.objective);
        t.set_number("realism_error", r.realism_error);
        t.set_int("window", static_cast<long long>(r.window));
        t.set_int("windows_accepted", static_cast<long long>(r.windows_accepted));
        t.set_int("solves", static_cast<long long>(r.solves));
        double worst = 0.0;
        for (const auto& v : r.residuals) worst = std::max(worst, v.residual);
        t.set_number("max_residual", worst);
        if (results[i].series) {
            t.set_int("output_index", static_cast<long long>(solved.size()));
            solved.push_back(*results[i].series);
            ++ok;
        }
        timing += std::to_string(i) + ',' + format_double(r.wall_seconds) + '\n';
    }
    write_samples(o.out, solved);
    report.save(o.out + ".report");
    write_csv_file(o.out + ".timing.csv", timing);
    TextDocument doc = m.doc();
    auto& s = doc.table_or_add("result");
    s.set_int("seeds", static_cast<long long>(seeds.size()));
    s.set_int("solved", static_cast<long long>(ok));
    if (!solved.empty()) satisfaction_rate(solved, cs, cfg.report_tol).write(doc.table_or_add("satisfaction"));
    doc.save(o.out + ".manifest");
    if (ok == 0) throw SolverFailure("COP found no feasible series for any seed");
}

// ------------------------------------------------------------------ eval

struct EvalOpts {
    DataSource real;
    std::string synth, metrics = "disc,pred", constraints, trend, out;
    double tol = 1e-6;
    std::size_t repeats = MetricConfig{}.repeats;
    std::size_t metric_steps = MetricConfig{}.steps;
    std::string head = "auto";
    long long feature = -1;
};

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"disc", "pred", "sat", "trend", "facts"};
    return names;
}

void run_eval(const EvalOpts& o, const Manifested& m) {
    std::vector<std::string> wanted = split(o.metrics, ',');
    if (wanted.empty()) throw UsageError("no metrics requested");
    for (const auto& w : wanted) {
        if (std::find(metric_names().begin(), metric_names().end(), w) == metric_names().end()) {
            std::string list;
            for (const auto& n : metric_names()) list += (list.empty() ? "" : ", ") + n;
            throw UsageError("unknown metric '" + w + "' (valid: " + list + ")");
        }
    }
    const auto wants = [&](const char* n) { return std::find(wanted.begin(), wanted.end(), n) != wanted.end(); };

    Dataset synth;
    synth.name = o.synth;
    synth.samples = load_series(o.synth);
    check_dataset(synth);
    const std::size_t L = synth.length(), K = synth.features();
    std::optional<Dataset> real;
    if (wants("disc") || wants("pred") || wants("facts")) {
        if (o.real.path.empty()) throw UsageError("metrics disc, pred and facts need --real");
        real = load_dataset(o.real);
        detail::require_compatible(*real, synth);
    }

    MetricConfig mc;
    mc.repeats = o.repeats;
    mc.steps = o.metric_steps;
    mc.head = parse_head_kind(o.head);
    mc.jobs = m.globals->jobs;
    const std::uint64_t seed = stream(m.globals->seed, "eval");

    TextDocument doc = m.doc();
    auto emit = [&](const MetricReport& r) {
        r.write(doc.append_item("metric"));
        std::printf("%s %s ± %s\n", r.name.c_str(), format_double(r.value).c_str(), format_double(r.std).c_str());
    };
    if (wants("disc")) emit(discriminative_score(*real, synth, mc, seed));
    if (wants("pred")) emit(predictive_score(*real, synth, mc, seed));
    if (wants("sat")) {
        if (o.constraints.empty()) throw UsageError("metric sat needs --constraints");
        emit(satisfaction_rate(synth.samples, load_constraints_for(o.constraints, L, K), o.tol));
    }
    if (wants("trend")) {
        if (o.trend.empty()) throw UsageError("metric trend needs --trend");
        auto trends = load_series(o.trend);
        if (trends.size() == 1) trends.assign(synth.size(), trends.front());
        const TrendErrors e = trend_error(synth.samples, trends);
        const std::pair<const char*, double> parts[] = {
            {"trend_perc_error", e.perc_error}, {"trend_l2", e.l2}, {"trend_dtw", e.dtw}, {"trend_fourier", e.fourier}};
        for (const auto& [name, v] : parts) {
            MetricReport r;
            r.name = name;
            r.value = v;
            r.n = synth.size();
            emit(r);
        }
    }
    if (wants("facts")) {
        std::optional<std::size_t> feature;
        if (o.feature >= 0) feature = static_cast<std::size_t>(o.feature);
        const StylizedFacts f = stylized_facts(*real, synth, feature);
        write_csv_file(o.out + ".hist.csv", f.histogram_csv());
        write_csv_file(o.out + ".acf.csv", f.acf_csv());
        write_csv_file(o.out + ".decay.csv", f.decay_csv());
        MetricReport r;
        r.name = "returns_wasserstein";
        r.value = f.wasserstein;
        r.n = real->size() + synth.size();
        emit(r);
    }
    doc.save(o.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained time-series generation: diffusion sampling, guidance and constrained optimization"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "config file (key = value with [command] sections); flags override it");
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->envname("CTSG_SEED");
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset")->require_subcommand(1);
    GenSines sines;
    auto* gen_sines = gen->add_subcommand("sines", "multivariate sines with random frequency and phase");
    gen_sines->add_option("--k", sines.k, "features");
    gen_sines->add_option("--l", sines.l, "series length");
    gen_sines->add_option("--n", sines.n, "number of series");
    gen_sines->add_option("--out", sines.out, "output samples CSV")->required();
    GenOhlcv ohlcv;
    auto* gen_ohlcv = gen->add_subcommand("ohlcv", "daily OHLCV table from a GARCH(1,1) price model");
    gen_ohlcv->add_option("--rows", ohlcv.rows, "trading days");
    gen_ohlcv->add_option("--out", ohlcv.out, "output CSV")->required();

    // train
    TrainOpts tr;
    auto* train = app.add_subcommand("train", "train a denoiser");
    tr.data.add_options(train, "--data", "training data (samples CSV or raw table)");
    train->add_option("--out", tr.out, "checkpoint path")->required();
    train->add_option("--method", tr.method, "difftime or loss-difftime");
    train->add_option("--constraints", tr.constraints, "constraint file for loss-difftime");
    train->add_option("--rho", tr.rho, "penalty weight for loss-difftime");
    train->add_option("--steps", tr.steps, "optimizer steps");
    train->add_option("--batch", tr.batch, "batch size");
    train->add_option("--lr", tr.lr, "learning rate");
    train->add_option("--weight-decay", tr.weight_decay, "AdamW weight decay");
    train->add_option("--schedule", tr.schedule, "linear, quadratic or cosine");
    train->add_option("--T", tr.T, "diffusion steps");
    train->add_option("--beta-start", tr.beta_start, "first noise level");
    train->add_option("--beta-end", tr.beta_end, "last noise level");
    train->add_option("--channels", tr.channels, "hidden width");
    train->add_option("--layers", tr.layers, "hidden layers");
    train->add_option("--embedding", tr.embedding, "step embedding size");
    train->add_option("--conditioning", tr.conditioning, "none or trend");
    train->add_flag("--no-gated-skip", tr.no_gated_skip, "drop the gated x_t skip connection");

    // sample
    auto* sample = app.add_subcommand("sample", "generate series")->require_subcommand(1);
    SampleOpts sd, sdd, sg;
    auto* s_diff = sample->add_subcommand("difftime", "ancestral sampling with exact fixed points");
    sd.common.add_options(s_diff);
    s_diff->add_option("--variance", sd.variance, "sqrt-beta, beta or posterior");
    s_diff->add_option("--fixed-points", sd.fixed_points, "\"row,col=value;...\"");
    s_diff->add_option("--constraints", sd.common.constraints, "constraint file (fixed points are imposed)");
    auto* s_ddim = sample->add_subcommand("ddim", "DDIM sampling");
    sdd.common.add_options(s_ddim);
    s_ddim->add_option("--steps", sdd.steps, "DDIM steps (0: all)");
    s_ddim->add_option("--sigma", sdd.sigma, "zero or ddpm");
    s_ddim->add_option("--constraints", sdd.common.constraints, "constraints for the reported satisfaction rate");
    auto* s_guided = sample->add_subcommand("guided", "DDIM sampling with constraint guidance");
    sg.common.add_options(s_guided);
    s_guided->add_option("--constraints", sg.common.constraints, "constraint file")->required();
    s_guided->add_option("--rho", sg.rho, "guidance strength");
    s_guided->add_option("--steps", sg.steps, "DDIM steps (0: all)");
    s_guided->add_option("--sigma", sg.sigma, "zero or ddpm");

    CopOpts cop, fine;
    fine.mode = "finetune";
    auto add_cop = [](CLI::App* cmd, CopOpts& o, bool with_mode) {
        cmd->add_option("--seed-data", o.seed_data.path, "real data: seeds, or realism references for --in");
        cmd->add_option("--columns", o.seed_data.columns, "CSV columns to read (default: all numeric columns)");
        cmd->add_option("--window", o.seed_data.window, "window length for raw CSV input");
        cmd->add_option("--stride", o.seed_data.stride, "window stride for raw CSV input");
        cmd->add_option("--in", o.in, "candidate series to start from (samples CSV)");
        cmd->add_option("--out", o.out, "output samples CSV")->required();
        cmd->add_option("--constraints", o.constraints, "constraint file");
        if (with_mode) cmd->add_option("--mode", o.mode, "generate or finetune");
        cmd->add_option("--seed-source", o.seed_source, "data, brownian or blend (without --in)");
        cmd->add_option("--n", o.n, "number of seeds (0: all)");
        cmd->add_option("--budget", o.budget, "initial realism budget");
        cmd->add_option("--window-size", o.window_size, "optimization window");
        cmd->add_option("--overlap", o.overlap, "window overlap fraction");
        cmd->add_option("--retries", o.retries, "budget doublings");
        cmd->add_option("--iterations", o.iterations, "passes over the windows");
        cmd->add_option("--trend-weight", o.trend_weight, "weight of the trend term (negative: automatic)");
        cmd->add_option("--realism", o.realism, "returns or values");
        cmd->add_option("--lag", o.lag, "autocorrelation lags in the realism property");
        cmd->add_option("--max-iter", o.max_iter, "solver iterations per window");
        cmd->add_option("--report-tol", o.report_tol, "hard-constraint verification tolerance");
    };
    auto* s_cop = sample->add_subcommand("cop", "constrained optimization from seeds");
    add_cop(s_cop, cop, true);
    auto* finetune = app.add_subcommand("finetune", "same as sample cop --mode finetune");
    add_cop(finetune, fine, false);

    // eval
    EvalOpts ev;
    auto* eval = app.add_subcommand("eval", "metrics of synthetic series");
    eval->add_option("--real", ev.real.path, "real data (samples CSV or raw table)");
    eval->add_option("--columns", ev.real.columns, "CSV columns of --real");
    eval->add_option("--window", ev.real.window, "window length for raw --real");
    eval->add_option("--stride", ev.real.stride, "window stride for raw --real");
    eval->add_option("--synth", ev.synth, "synthetic samples CSV")->required();
    eval->add_option("--metrics", ev.metrics, "comma list of disc, pred, sat, trend, facts");
    eval->add_option("--constraints", ev.constraints, "constraint file for sat");
    eval->add_option("--tol", ev.tol, "satisfaction tolerance");
    eval->add_option("--trend", ev.trend, "trend samples CSV for trend (one shared or one per sample)");
    eval->add_option("--repeats", ev.repeats, "repeats of the learned metrics");
    eval->add_option("--metric-steps", ev.metric_steps, "training steps of the metric heads");
    eval->add_option("--head", ev.head, "auto, gru or mlp");
    eval->add_option("--feature", ev.feature, "feature for facts (-1: all)");
    eval->add_option("--out", ev.out, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : Usage;
    }

    auto chain_of = [&](std::initializer_list<const CLI::App*> apps) {
        return Manifested{std::vector<const CLI::App*>(apps.begin(), apps.end()), &g};
    };
    try {
        if (gen_sines->parsed()) run_gen_sines(sines, chain_of({&app, gen, gen_sines}));
        else if (gen_ohlcv->parsed()) run_gen_ohlcv(ohlcv, chain_of({&app, gen, gen_ohlcv}));
        else if (train->parsed()) run_train(tr, chain_of({&app, train}));
        else if (s_diff->parsed()) run_sample_difftime(sd, chain_of({&app, sample, s_diff}));
        else if (s_ddim->parsed()) run_sample_ddim(sdd, chain_of({&app, sample, s_ddim}));
        else if (s_guided->parsed()) run_sample_guided(sg, chain_of({&app, sample, s_guided}));
        else if (s_cop->parsed()) run_cop(cop, chain_of({&app, sample, s_cop}));
        else if (finetune->parsed()) run_cop(fine, chain_of({&app, finetune}));
        else if (eval->parsed()) run_eval(ev, chain_of({&app, eval}));
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Io;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Io;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Solver;
    } catch (const SolverFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Solver;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Usage;
    }
    return Ok;
}
