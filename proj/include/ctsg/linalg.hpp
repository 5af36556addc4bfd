#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ctsg/error.hpp"

namespace ctsg::linalg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec to_eigen(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

/// Least-squares polynomial coefficients (lowest order first) through (t, y).
inline std::vector<double> polyfit(const std::vector<double>& t, const std::vector<double>& y, std::size_t degree) {
    const auto m = static_cast<Eigen::Index>(degree + 1);
    const auto n = static_cast<Eigen::Index>(t.size());
    if (n < m) throw DimensionError("polyfit: fewer points than coefficients");
    if (y.size() != t.size()) throw DimensionError("polyfit: t and y differ in length");
    Mat V(n, m);
    for (Eigen::Index k = 0; k < n; ++k) {
        double p = 1.0;
        for (Eigen::Index i = 0; i < m; ++i, p *= t[static_cast<std::size_t>(k)]) V(k, i) = p;
    }
    return to_std(V.colPivHouseholderQr().solve(to_eigen(y)));
}

inline double polyval(const std::vector<double>& coef, double t) {
    double v = 0.0;
    for (std::size_t i = coef.size(); i-- > 0;) v = v * t + coef[i];
    return v;
}

}  // namespace ctsg::linalg
