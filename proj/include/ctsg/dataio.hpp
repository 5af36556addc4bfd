#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ctsg/error.hpp"
#include "ctsg/linalg.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/tensor.hpp"
#include "ctsg/textconfig.hpp"

namespace ctsg {

/// An L×K series is a rank-2 Tensor with shape {L, K}.
using TimeSeries = Tensor;

inline std::size_t series_length(const TimeSeries& x) { return x.dim(0); }
inline std::size_t series_features(const TimeSeries& x) { return x.dim(1); }

inline void check_series(const TimeSeries& x, const char* what = "time series") {
    if (x.rank() != 2) throw DimensionError(std::string(what) + " must be L x K, got " + shape_string(x.shape()));
    if (x.dim(0) < 2 || x.dim(1) < 1) throw DimensionError(std::string(what) + " needs L >= 2 and K >= 1");
    if (!x.all_finite()) throw NumericError(std::string(what) + " has non-finite values");
}

/// Column j of x as a plain vector.
inline std::vector<double> column(const TimeSeries& x, std::size_t j) {
    std::vector<double> out(x.dim(0));
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = x.at(t, j);
    return out;
}

/// Per-feature affine map to [-1, 1].
struct Normalization {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> constant;  // feature had max == min; it maps to 0

    std::size_t features() const { return min.size(); }
};

struct Dataset {
    std::string name;
    std::vector<TimeSeries> samples;
    std::optional<Normalization> norm;
    std::string source;
    std::size_t stride = 0;
    std::uint64_t seed = 0;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    std::size_t length() const { return samples.at(0).dim(0); }
    std::size_t features() const { return samples.at(0).dim(1); }
};

inline void check_dataset(const Dataset& ds) {
    if (ds.samples.empty()) throw SchemaError("dataset '" + ds.name + "' is empty");
    const Shape& s0 = ds.samples.front().shape();
    for (const auto& x : ds.samples) {
        check_series(x, "dataset sample");
        if (x.shape() != s0) throw DimensionError("dataset samples differ in shape");
    }
}

struct SineSpec {
    std::size_t features = 5;
    std::size_t length = 24;
    std::size_t count = 10000;
    std::uint64_t seed = 42;
};

/// Feature i of every sample is sin(2π η_i t + θ_i), t = 0..L-1, with
/// η_i ~ U[0,1] and θ_i ~ U[-π, π] drawn from the sample's own sub-stream.
inline Dataset generate_sines(const SineSpec& spec) {
    if (spec.features == 0 || spec.length == 0 || spec.count == 0) {
        throw UsageError("generate_sines: K, L and N must be positive");
    }
    Dataset ds;
    ds.name = "sines";
    ds.source = "generated";
    ds.seed = spec.seed;
    ds.samples.reserve(spec.count);
    const Rng base = Rng(spec.seed).derive("data").derive("sines");
    for (std::size_t n = 0; n < spec.count; ++n) {
        Rng rng = base.derive(static_cast<std::uint64_t>(n));
        TimeSeries x = Tensor::zeros({spec.length, spec.features});
        for (std::size_t j = 0; j < spec.features; ++j) {
            const double eta = rng.uniform();
            const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
            for (std::size_t t = 0; t < spec.length; ++t) {
                x.at(t, j) = std::sin(2.0 * std::numbers::pi * eta * static_cast<double>(t) + theta);
            }
        }
        ds.samples.push_back(std::move(x));
    }
    return ds;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::string cur;
    bool in_quotes = false;
    for (char c : line) {
        if (c == '"') {
            in_quotes = !in_quotes;
        } else if (c == ',' && !in_quotes) {
            cells.push_back(std::string(trim(cur)));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::string(trim(cur)));
    return cells;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace detail

/// Numeric table read from a headered CSV; only the selected columns are parsed.
struct CsvTable {
    std::vector<std::string> columns;
    std::size_t rows = 0;
    std::vector<double> values;  // rows × columns, row-major
};

inline CsvTable read_csv_columns(const std::string& path, const std::vector<std::string>& wanted) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw SchemaError(path + ": missing header row");
    const auto header = detail::split_csv_line(lines[0]);
    std::vector<std::size_t> idx;
    CsvTable table;
    if (wanted.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) idx.push_back(i);
        table.columns = header;
    } else {
        for (const auto& name : wanted) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw SchemaError(path + ": missing column '" + name + "'");
            idx.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        table.columns = wanted;
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = detail::split_csv_line(lines[r]);
        if (cells.size() != header.size()) {
            throw ParseError(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        for (std::size_t i : idx) {
            const std::string ctx = path + ": row " + std::to_string(r + 1) + ", column '" + header[i] + "'";
            const double v = parse_double(cells[i], ctx);
            if (!std::isfinite(v)) throw ParseError(ctx + ": non-finite value");
            table.values.push_back(v);
        }
        ++table.rows;
    }
    return table;
}

/// Sliding windows of `window` rows taken every `stride` rows.
inline Dataset load_csv(const std::string& path, const std::vector<std::string>& columns, std::size_t window,
                        std::size_t stride = 1) {
    if (window < 2) throw UsageError("load_csv: window must be at least 2");
    if (stride == 0) throw UsageError("load_csv: stride must be positive");
    const CsvTable table = read_csv_columns(path, columns);
    if (table.rows == 0) throw SchemaError(path + ": empty dataset (header only)");
    if (table.rows < window) {
        throw SchemaError(path + ": " + std::to_string(table.rows) + " rows is fewer than one window of " +
                          std::to_string(window));
    }
    const std::size_t k = table.columns.size();
    Dataset ds;
    ds.name = path;
    ds.source = path;
    ds.stride = stride;
    for (std::size_t start = 0; start + window <= table.rows; start += stride) {
        std::vector<double> v(table.values.begin() + static_cast<std::ptrdiff_t>(start * k),
                              table.values.begin() + static_cast<std::ptrdiff_t>((start + window) * k));
        ds.samples.emplace_back(Shape{window, k}, std::move(v));
    }
    return ds;
}

inline Normalization fit_normalization(const Dataset& ds) {
    check_dataset(ds);
    const std::size_t k = ds.features();
    Normalization n;
    n.min.assign(k, std::numeric_limits<double>::infinity());
    n.max.assign(k, -std::numeric_limits<double>::infinity());
    for (const auto& x : ds.samples) {
        for (std::size_t t = 0; t < x.dim(0); ++t) {
            for (std::size_t j = 0; j < k; ++j) {
                n.min[j] = std::min(n.min[j], x.at(t, j));
                n.max[j] = std::max(n.max[j], x.at(t, j));
            }
        }
    }
    n.constant.resize(k);
    for (std::size_t j = 0; j < k; ++j) n.constant[j] = n.max[j] == n.min[j];
    return n;
}

inline TimeSeries normalize_series(const TimeSeries& x, const Normalization& n) {
    if (x.dim(1) != n.features()) throw DimensionError("normalize: feature count differs from record");
    TimeSeries out = x;
    for (std::size_t t = 0; t < x.dim(0); ++t) {
        for (std::size_t j = 0; j < n.features(); ++j) {
            out.at(t, j) = n.constant[j] ? 0.0 : 2.0 * (x.at(t, j) - n.min[j]) / (n.max[j] - n.min[j]) - 1.0;
        }
    }
    return out;
}

inline TimeSeries denormalize_series(const TimeSeries& x, const Normalization& n) {
    if (x.dim(1) != n.features()) throw DimensionError("denormalize: feature count differs from record");
    TimeSeries out = x;
    for (std::size_t t = 0; t < x.dim(0); ++t) {
        for (std::size_t j = 0; j < n.features(); ++j) {
            out.at(t, j) = n.constant[j] ? n.min[j] : (x.at(t, j) + 1.0) * 0.5 * (n.max[j] - n.min[j]) + n.min[j];
        }
    }
    return out;
}

/// Normalizes with a given record (e.g. one stored with a model).
inline Dataset normalize(const Dataset& ds, const Normalization& record) {
    Dataset out = ds;
    for (auto& x : out.samples) x = normalize_series(x, record);
    out.norm = record;
    return out;
}

inline Dataset normalize(const Dataset& ds) { return normalize(ds, fit_normalization(ds)); }

inline Dataset denormalize(const Dataset& ds) {
    if (!ds.norm) throw UsageError("denormalize: dataset carries no normalization record");
    Dataset out = ds;
    for (auto& x : out.samples) x = denormalize_series(x, *ds.norm);
    out.norm.reset();
    return out;
}

inline void require_normalized(const Dataset& ds, double tol = 1e-9) {
    for (const auto& x : ds.samples) {
        for (double v : x.values()) {
            if (v < -1.0 - tol || v > 1.0 + tol) throw UsageError("dataset is not normalized to [-1, 1]");
        }
    }
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double std_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// Gaussian random walk rescaled feature-wise to the reference's mean and std.
inline TimeSeries brownian_seed(const TimeSeries& reference, std::uint64_t seed) {
    check_series(reference, "reference");
    const std::size_t L = reference.dim(0), K = reference.dim(1);
    Rng rng = Rng(seed).derive("brownian");
    TimeSeries out = Tensor::zeros({L, K});
    for (std::size_t j = 0; j < K; ++j) {
        std::vector<double> walk(L);
        double pos = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
            pos += rng.normal();
            walk[t] = pos;
        }
        const auto ref = column(reference, j);
        const double rm = mean_of(ref), rs = std_of(ref);
        const double wm = mean_of(walk), ws = std_of(walk);
        for (std::size_t t = 0; t < L; ++t) {
            const double z = ws > 0.0 ? (walk[t] - wm) / ws : 0.0;
            out.at(t, j) = rm + rs * z;
        }
    }
    return out;
}

/// Train-time trend: each half of every feature replaced by its least-squares line.
inline TimeSeries piecewise_linear_trend(const TimeSeries& x) {
    const std::size_t L = x.dim(0), K = x.dim(1);
    const std::size_t half = L / 2;
    TimeSeries out = Tensor::zeros({L, K});
    for (std::size_t j = 0; j < K; ++j) {
        for (auto [b, e] : {std::pair{std::size_t{0}, half}, std::pair{half, L}}) {
            if (e - b == 1) {
                out.at(b, j) = x.at(b, j);
                continue;
            }
            std::vector<double> t, y;
            for (std::size_t i = b; i < e; ++i) {
                t.push_back(static_cast<double>(i - b));
                y.push_back(x.at(i, j));
            }
            const auto c = linalg::polyfit(t, y, 1);
            for (std::size_t i = b; i < e; ++i) out.at(i, j) = linalg::polyval(c, static_cast<double>(i - b));
        }
    }
    return out;
}

/// Inference-time trend: per-feature least-squares polynomial (time rescaled to [-1, 1]).
inline TimeSeries polynomial_trend(const TimeSeries& x, std::size_t degree = 3) {
    const std::size_t L = x.dim(0), K = x.dim(1);
    std::vector<double> t(L);
    for (std::size_t i = 0; i < L; ++i) t[i] = L > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(L - 1) - 1.0 : 0.0;
    TimeSeries out = Tensor::zeros({L, K});
    for (std::size_t j = 0; j < K; ++j) {
        const auto c = linalg::polyfit(t, column(x, j), std::min(degree, L - 1));
        for (std::size_t i = 0; i < L; ++i) out.at(i, j) = linalg::polyval(c, t[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample files: sample_id,t,feature_0..feature_{K-1}

inline std::string samples_to_csv(const std::vector<TimeSeries>& samples) {
    std::string out;
    if (samples.empty()) return "sample_id,t\n";
    const std::size_t K = samples.front().dim(1);
    out += "sample_id,t";
    for (std::size_t j = 0; j < K; ++j) out += ",feature_" + std::to_string(j);
    out += '\n';
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const auto& x = samples[n];
        for (std::size_t t = 0; t < x.dim(0); ++t) {
            out += std::to_string(n) + ',' + std::to_string(t);
            for (std::size_t j = 0; j < K; ++j) out += ',' + format_double(x.at(t, j));
            out += '\n';
        }
    }
    return out;
}

inline void write_samples(const std::string& path, const std::vector<TimeSeries>& samples) {
    detail::write_text(path, samples_to_csv(samples));
}

inline std::vector<TimeSeries> read_samples(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw SchemaError(path + ": missing header row");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.size() < 3 || header[0] != "sample_id" || header[1] != "t") {
        throw SchemaError(path + ": expected header sample_id,t,feature_0,...");
    }
    const std::size_t K = header.size() - 2;
    std::map<long long, std::vector<std::vector<double>>> rows;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = detail::split_csv_line(lines[r]);
        const std::string ctx = path + ": row " + std::to_string(r + 1);
        if (cells.size() != header.size()) throw ParseError(ctx + ": wrong number of cells");
        const double id = parse_double(cells[0], ctx);
        const double t = parse_double(cells[1], ctx);
        auto& series = rows[static_cast<long long>(id)];
        if (static_cast<double>(series.size()) != t) throw ParseError(ctx + ": time steps must be consecutive from 0");
        std::vector<double> v(K);
        for (std::size_t j = 0; j < K; ++j) v[j] = parse_double(cells[j + 2], ctx);
        series.push_back(std::move(v));
    }
    std::vector<TimeSeries> out;
    for (auto& [id, series] : rows) {
        std::vector<double> flat;
        for (auto& row : series) flat.insert(flat.end(), row.begin(), row.end());
        out.emplace_back(Shape{series.size(), K}, std::move(flat));
    }
    if (out.empty()) throw SchemaError(path + ": no samples");
    for (const auto& x : out) {
        if (x.shape() != out.front().shape()) throw DimensionError(path + ": samples differ in length");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

inline std::vector<double> split_doubles(const std::string& s, const std::string& ctx) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = s.find(',', pos);
        out.push_back(parse_double(trim(std::string_view(s).substr(pos, comma - pos)), ctx));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace detail

inline void write_normalization(TextTable& t, const Normalization& n) {
    t.set_string("min", detail::join_doubles(n.min));
    t.set_string("max", detail::join_doubles(n.max));
    std::vector<double> c;
    for (bool b : n.constant) c.push_back(b ? 1.0 : 0.0);
    t.set_string("constant", detail::join_doubles(c));
}

inline Normalization read_normalization(const TextTable& t) {
    Normalization n;
    n.min = detail::split_doubles(t.get_string("min"), "normalization.min");
    n.max = detail::split_doubles(t.get_string("max"), "normalization.max");
    for (double v : detail::split_doubles(t.get_string("constant"), "normalization.constant")) n.constant.push_back(v != 0.0);
    if (n.max.size() != n.min.size() || n.constant.size() != n.min.size()) {
        throw ConfigError("normalization record has inconsistent lengths");
    }
    return n;
}

inline TextDocument dataset_manifest(const Dataset& ds) {
    TextDocument doc;
    auto& d = doc.table_or_add("dataset");
    d.set_string("name", ds.name);
    d.set_string("source", ds.source);
    d.set_int("samples", static_cast<long long>(ds.size()));
    d.set_int("length", ds.empty() ? 0 : static_cast<long long>(ds.length()));
    d.set_int("features", ds.empty() ? 0 : static_cast<long long>(ds.features()));
    d.set_int("stride", static_cast<long long>(ds.stride));
    d.set_string("seed", std::to_string(ds.seed));
    if (ds.norm) write_normalization(doc.table_or_add("normalization"), *ds.norm);
    return doc;
}

// ---------------------------------------------------------------------------
// Synthetic stock table

/// Daily Open/High/Low/Close/Adj Close/Volume rows from a GARCH(1,1) log-price
/// walk. Stands in for a real OHLCAV download: High/Low bracket Open and Close
/// on every row, and returns show volatility clustering.
inline std::string synthetic_ohlcv_csv(std::size_t rows, std::uint64_t seed) {
    if (rows == 0) throw UsageError("synthetic_ohlcv: rows must be positive");
    Rng rng = Rng(seed).derive("data").derive("ohlcv");
    std::string out = "Date,Open,High,Low,Close,Adj Close,Volume\n";
    double close = 100.0;
    double var = 1.5e-4;
    const double omega = 2e-6, alpha = 0.08, beta = 0.9;
    double last_ret = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        var = omega + alpha * last_ret * last_ret + beta * var;
        const double sd = std::sqrt(var);
        const double open = close * std::exp(0.2 * sd * rng.normal());
        const double ret = 3e-4 + sd * rng.normal();
        const double next = open * std::exp(ret);
        const double high = std::max(open, next) * (1.0 + 0.5 * sd * std::abs(rng.normal()));
        const double low = std::min(open, next) * (1.0 - 0.5 * sd * std::abs(rng.normal()));
        const double volume = std::round(1e6 * std::exp(0.3 * rng.normal() + 10.0 * std::abs(ret)));
        last_ret = std::log(next / close);
        close = next;
        out += "day-" + std::to_string(i) + ',' + format_double(open) + ',' + format_double(high) + ',' +
               format_double(low) + ',' + format_double(close) + ',' + format_double(close) + ',' +
               format_double(volume) + '\n';
    }
    return out;
}

inline const std::vector<std::string>& ohlcv_columns() {
    static const std::vector<std::string> cols{"Open", "High", "Low", "Close", "Adj Close", "Volume"};
    return cols;
}

}  // namespace ctsg
