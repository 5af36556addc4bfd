#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "ctsg/dataio.hpp"
#include "support.hpp"

using namespace ctsg;

namespace {

std::string write_file(const std::string& name, const std::string& text) {
    const std::string path = ctsg::test::temp_path(name);
    std::ofstream(path) << text;
    return path;
}

std::string numbered_csv(std::size_t rows) {
    std::string s = "a,b\n";
    for (std::size_t i = 0; i < rows; ++i) s += std::to_string(i) + "," + std::to_string(2 * i) + "\n";
    return s;
}

}  // namespace

TEST(Sines, ShapeAndRange) {
    const Dataset ds = generate_sines({3, 24, 50, 1});
    ASSERT_EQ(ds.size(), 50u);
    EXPECT_EQ(ds.length(), 24u);
    EXPECT_EQ(ds.features(), 3u);
    for (const auto& x : ds.samples)
        for (double v : x.values()) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
}

TEST(Sines, FormulaSpecialCases) {
    // η = 0, θ = π/2 gives the constant 1; η = 0.5, θ = 0 vanishes at integer t.
    for (std::size_t t = 0; t < 24; ++t) {
        EXPECT_DOUBLE_EQ(std::sin(2.0 * std::numbers::pi * 0.0 * double(t) + std::numbers::pi / 2), 1.0);
        EXPECT_NEAR(std::sin(2.0 * std::numbers::pi * 0.5 * double(t)), 0.0, 1e-13);
    }
}

TEST(Sines, RescaledFeatureMeansNearHalf) {
    const Dataset ds = generate_sines({5, 24, 10000, 42});
    for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        for (const auto& x : ds.samples)
            for (std::size_t t = 0; t < 24; ++t) s += (x.at(t, j) + 1.0) / 2.0;
        const double m = s / (10000.0 * 24.0);
        EXPECT_GE(m, 0.47) << "feature " << j;
        EXPECT_LE(m, 0.53) << "feature " << j;
    }
}

TEST(Sines, DeterministicPerSeed) {
    const Dataset a = generate_sines({2, 10, 20, 9});
    const Dataset b = generate_sines({2, 10, 20, 9});
    const Dataset c = generate_sines({2, 10, 20, 10});
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
    EXPECT_THROW(generate_sines({2, 10, 0, 1}), UsageError);
}

TEST(LoadCsv, WindowCount) {
    const std::string path = write_file("thirty.csv", numbered_csv(30));
    const Dataset ds = load_csv(path, {"a", "b"}, 24, 1);
    EXPECT_EQ(ds.size(), 7u);
    EXPECT_EQ(ds.samples[6].at(0, 0), 6.0);
    EXPECT_EQ(ds.samples[6].at(23, 1), 58.0);
}

TEST(LoadCsv, WindowCountFormula) {
    const std::string path = write_file("hundred.csv", numbered_csv(100));
    for (std::size_t L : {2u, 5u, 24u, 100u})
        for (std::size_t s : {1u, 3u, 7u}) {
            const Dataset ds = load_csv(path, {"a"}, L, s);
            EXPECT_EQ(ds.size(), (100 - L) / s + 1) << "L=" << L << " s=" << s;
        }
}

TEST(LoadCsv, HeaderOnlyIsSchemaError) {
    const std::string path = write_file("header.csv", "a,b\n");
    EXPECT_THROW(load_csv(path, {"a", "b"}, 24, 1), SchemaError);
}

TEST(LoadCsv, MissingFileAndColumn) {
    EXPECT_THROW(load_csv(ctsg::test::temp_path("nope.csv"), {"a"}, 2, 1), IoError);
    const std::string path = write_file("cols.csv", numbered_csv(5));
    EXPECT_THROW(load_csv(path, {"zzz"}, 2, 1), SchemaError);
}

TEST(LoadCsv, StockFileHasSixFeatures) {
    const std::string path = write_file("ohlcv.csv", synthetic_ohlcv_csv(60, 3));
    const Dataset ds = load_csv(path, ohlcv_columns(), 24, 1);
    EXPECT_EQ(ds.features(), 6u);
    EXPECT_EQ(ds.size(), 37u);
    for (const auto& x : ds.samples)
        for (std::size_t t = 0; t < 24; ++t) {
            EXPECT_GE(x.at(t, 1), std::max(x.at(t, 0), x.at(t, 3)));
            EXPECT_LE(x.at(t, 2), std::min(x.at(t, 0), x.at(t, 3)));
        }
}

TEST(Normalize, AffineEndpoints) {
    Dataset ds;
    ds.samples.push_back(Tensor::matrix(3, 1, {0, 5, 10}));
    const Dataset n = normalize(ds);
    EXPECT_EQ(n.samples[0], Tensor::matrix(3, 1, {-1, 0, 1}));
}

TEST(Normalize, ConstantFeatureMapsToZeroAndIsFlagged) {
    Dataset ds;
    ds.samples.push_back(Tensor::matrix(3, 2, {3, 1, 3, 2, 3, 3}));
    const Dataset n = normalize(ds);
    ASSERT_TRUE(n.norm);
    EXPECT_TRUE(n.norm->constant[0]);
    EXPECT_FALSE(n.norm->constant[1]);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(n.samples[0].at(t, 0), 0.0);
    EXPECT_EQ(denormalize(n).samples[0], ds.samples[0]);
}

TEST(Normalize, RoundTripOnRandomData) {
    Rng rng(17);
    Dataset ds;
    for (int i = 0; i < 20; ++i) ds.samples.push_back(ctsg::test::random_tensor({12, 4}, rng, 50.0));
    const Dataset n = normalize(ds);
    require_normalized(n);
    const Dataset back = denormalize(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t k = 0; k < ds.samples[i].size(); ++k)
            worst = std::max(worst, std::abs(back.samples[i][k] - ds.samples[i][k]));
    EXPECT_LT(worst, 1e-12);
}

TEST(Normalize, UnnormalizedDataIsRejected) {
    Dataset ds;
    ds.samples.push_back(Tensor::matrix(2, 1, {0, 2}));
    EXPECT_THROW(require_normalized(ds), UsageError);
}

TEST(Brownian, MatchesReferenceMoments) {
    Rng rng(4);
    const TimeSeries ref = ctsg::test::random_tensor({30, 3}, rng, 4.0);
    const TimeSeries b = brownian_seed(ref, 8);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(mean_of(column(b, j)), mean_of(column(ref, j)), 1e-9);
        EXPECT_NEAR(std_of(column(b, j)), std_of(column(ref, j)), 1e-9);
    }
    EXPECT_EQ(b, brownian_seed(ref, 8));
}

TEST(Brownian, IncrementSignBalance) {
    Rng rng(5);
    const TimeSeries ref = ctsg::test::random_tensor({360, 1}, rng);
    const TimeSeries b = brownian_seed(ref, 21);
    int up = 0;
    for (std::size_t t = 1; t < 360; ++t) up += b.at(t, 0) > b.at(t - 1, 0);
    const double frac = up / 359.0;
    EXPECT_GE(frac, 0.4);
    EXPECT_LE(frac, 0.6);
}

TEST(Trends, PiecewiseLinearIsExactOnLines) {
    TimeSeries x = Tensor::zeros({10, 1});
    for (std::size_t t = 0; t < 5; ++t) x.at(t, 0) = 2.0 * double(t) + 1.0;
    for (std::size_t t = 5; t < 10; ++t) x.at(t, 0) = -double(t);
    const TimeSeries s = piecewise_linear_trend(x);
    for (std::size_t t = 0; t < 10; ++t) EXPECT_NEAR(s.at(t, 0), x.at(t, 0), 1e-12);
}

TEST(Trends, CubicFitReproducesCubics) {
    TimeSeries x = Tensor::zeros({24, 2});
    for (std::size_t t = 0; t < 24; ++t) {
        const double u = double(t) / 23.0;
        x.at(t, 0) = u * u * u - 0.5 * u + 0.2;
        x.at(t, 1) = -2.0 * u * u;
    }
    const TimeSeries s = polynomial_trend(x, 3);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(s[k], x[k], 1e-10);
}

TEST(SampleFiles, RoundTripIsExact) {
    Rng rng(6);
    std::vector<TimeSeries> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(ctsg::test::random_tensor({5, 3}, rng));
    const std::string path = ctsg::test::temp_path("samples.csv");
    write_samples(path, xs);
    EXPECT_EQ(read_samples(path), xs);
}

TEST(SampleFiles, MalformedRowsAreParseErrors) {
    const std::string path = write_file("bad_samples.csv", "sample_id,t,feature_0\n0,0,1.5\n0,2,2.0\n");
    EXPECT_THROW(read_samples(path), ParseError);
    const std::string path2 = write_file("bad_samples2.csv", "sample_id,t,feature_0\n0,0,abc\n");
    EXPECT_THROW(read_samples(path2), ParseError);
}

TEST(Manifest, NormalizationRecordRoundTrip) {
    Dataset ds;
    ds.samples.push_back(Tensor::matrix(3, 2, {1, 7, 2, 7, 3, 7}));
    const Dataset n = normalize(ds);
    const TextDocument doc = TextDocument::parse(dataset_manifest(n).str());
    const Normalization r = read_normalization(*doc.table("normalization"));
    EXPECT_EQ(r.min, n.norm->min);
    EXPECT_EQ(r.max, n.norm->max);
    EXPECT_EQ(r.constant, n.norm->constant);
}
