// Constrained-optimization generation on synthetic OHLCV windows.
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ctsg.hpp"

using namespace ctsg;

int main() {
    const std::size_t L = 24;
    const auto csv = std::filesystem::temp_directory_path() / "cop_stock_demo.csv";
    std::ofstream(csv) << synthetic_ohlcv_csv(10 * L, 5);
    const Dataset windows = load_csv(csv.string(), ohlcv_columns(), L, L);
    const std::size_t K = windows.features();

    ConstraintSet cs = global_min_at(L, K, 10, 3);  // close is lowest at row 10
    for (const auto& c : ohlc(L, K).builtins()) cs.builtin(c);

    CopConfig cfg;
    cfg.seed = 1;
    const RealismSpec realism;
    const auto results = cop_batch(windows.samples, cs, realism, cfg);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const SolveReport& r = results[i].report;
        std::printf("window %zu: %-11s retry %zu budget %.2f realism %.4f solves %zu  %.2fs\n", i, to_string(r.status),
                    r.retry, r.budget, r.realism_error, r.solves, r.wall_seconds);
        if (results[i].series) {
            const bool ok = is_satisfied(cs, *results[i].series, 1e-4).satisfied;
            std::printf("          close[10] %.3f -> %.3f, constraints %s\n", windows.samples[i].at(10, 3),
                        results[i].series->at(10, 3), ok ? "hold" : "VIOLATED");
        }
    }
}
