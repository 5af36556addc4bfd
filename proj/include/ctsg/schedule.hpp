#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "ctsg/error.hpp"
#include "ctsg/rng.hpp"

namespace ctsg {

enum class ScheduleKind { Linear, Quadratic, Cosine };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Quadratic: return "quadratic";
        case ScheduleKind::Cosine: return "cosine";
    }
    return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "quadratic" || s == "quad") return ScheduleKind::Quadratic;
    if (s == "cosine") return ScheduleKind::Cosine;
    throw ConfigError("unknown noise schedule '" + s + "' (linear, quadratic, cosine)");
}

/// β, α = 1 − β and α̂ = Π α for t = 1..T. Index 0 holds α̂₀ = 1 (β₀ = 0).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Quadratic;
    std::size_t T = 50;
    double beta_1 = 1e-6;
    double beta_T = 0.5;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    void check_step(std::size_t t) const {
        if (t < 1 || t > T) {
            throw UsageError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
        }
    }

    /// Stable identifier of the schedule parameters, stored in checkpoints.
    std::uint64_t hash() const {
        std::string key = std::string(to_string(kind)) + "/" + std::to_string(T) + "/";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%a/%a", beta_1, beta_T);
        return detail::fnv1a(key + buf);
    }
};

/// β_t for t = 1..T. Linear and quadratic interpolate so that t = 1 gives β₁
/// and t = T gives β_T exactly. Cosine uses πt/T, so it runs from near β_T
/// down to β₁ at t = T.
inline NoiseSchedule make_schedule(ScheduleKind kind = ScheduleKind::Quadratic, std::size_t T = 50, double beta_1 = 1e-6,
                                   double beta_T = 0.5) {
    if (T < 2) throw ConfigError("noise schedule needs T >= 2");
    if (!(beta_1 > 0.0) || !(beta_1 <= beta_T) || !(beta_T < 1.0)) {
        throw ConfigError("noise schedule needs 0 < beta_1 <= beta_T < 1");
    }
    NoiseSchedule s;
    s.kind = kind;
    s.T = T;
    s.beta_1 = beta_1;
    s.beta_T = beta_T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    const double denom = static_cast<double>(T - 1);
    for (std::size_t t = 1; t <= T; ++t) {
        const double u = static_cast<double>(t - 1) / denom;
        double b = 0.0;
        switch (kind) {
            case ScheduleKind::Linear: b = beta_1 + u * (beta_T - beta_1); break;
            case ScheduleKind::Quadratic: {
                const double r = std::sqrt(beta_1) + u * (std::sqrt(beta_T) - std::sqrt(beta_1));
                b = r * r;
                break;
            }
            case ScheduleKind::Cosine:
                b = beta_1 + (beta_T - beta_1) * 0.5 *
                                 (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T)));
                break;
        }
        s.beta[t] = b;
        s.alpha[t] = 1.0 - b;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
}

enum class SigmaRule { Zero, DdpmEquivalent };

/// Sub-sequence τ of 1..T (strictly increasing, ending at T) for DDIM sampling.
struct DdimPlan {
    std::vector<std::size_t> tau;
    SigmaRule sigma = SigmaRule::Zero;

    static DdimPlan full(const NoiseSchedule& s, SigmaRule rule = SigmaRule::Zero) {
        DdimPlan p;
        p.sigma = rule;
        for (std::size_t t = 1; t <= s.T; ++t) p.tau.push_back(t);
        return p;
    }

    /// `steps` roughly evenly spaced values ending at T.
    static DdimPlan strided(const NoiseSchedule& s, std::size_t steps, SigmaRule rule = SigmaRule::Zero) {
        if (steps == 0 || steps > s.T) throw ConfigError("DDIM step count must be in [1, T]");
        DdimPlan p;
        p.sigma = rule;
        for (std::size_t i = 1; i <= steps; ++i) {
            const std::size_t t = (i * s.T + steps - 1) / steps;
            if (p.tau.empty() || t > p.tau.back()) p.tau.push_back(t);
        }
        return p;
    }

    void validate(const NoiseSchedule& s) const {
        if (tau.empty() || tau.back() != s.T) throw ConfigError("DDIM sub-sequence must end at T");
        for (std::size_t i = 0; i < tau.size(); ++i) {
            if (tau[i] < 1 || tau[i] > s.T) throw ConfigError("DDIM step outside [1, T]");
            if (i > 0 && tau[i] <= tau[i - 1]) throw ConfigError("DDIM sub-sequence must be strictly increasing");
        }
    }

    /// σ for the move from step t to t_prev (0 denotes the final x₀).
    double sigma_at(const NoiseSchedule& s, std::size_t t, std::size_t t_prev) const {
        if (sigma == SigmaRule::Zero) return 0.0;
        const double ab = s.alpha_bar[t], ab_prev = s.alpha_bar[t_prev];
        return std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
    }
};

}  // namespace ctsg
