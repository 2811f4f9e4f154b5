#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "adfolio/rng.hpp"
#include "adfolio/types.hpp"

namespace adfolio {

/// Controls for the grid-quadrature posterior. The integrand is evaluated in
/// log space (binomial likelihood at v = 100,000 underflows otherwise) on a
/// window of the prior support sized from posterior moments, then refined.
struct QuadratureConfig {
    int grid_points = 10'001;     // Simpson nodes; odd so the window midpoint is a node
    double window_sigmas = 30.0;  // half-width of the integration window, in posterior sds
    int refine_passes = 3;        // moment-driven window refinements
    double support_epsilon = 1e-12;  // minimum usable window width
};

inline void validate(const QuadratureConfig& cfg) {
    if (cfg.grid_points < 101 || cfg.grid_points % 2 == 0)
        throw std::invalid_argument("quadrature: grid_points must be odd and >= 101");
    if (!(cfg.window_sigmas > 0.0) || cfg.refine_passes < 1 || !(cfg.support_epsilon > 0.0))
        throw std::invalid_argument("quadrature: bad window/refine configuration");
}

/// Closed-form conjugate posterior for a Uniform[0,1] prior:
/// Beta(u + 1, v - u + 1) moments.
inline PosteriorSummary posterior_beta(const LearningRecord& record) {
    validate(record);
    const double a = static_cast<double>(record.responses) + 1.0;
    const double b = static_cast<double>(record.impressions - record.responses) + 1.0;
    const double ab = a + b;
    PosteriorSummary out;
    out.s_mean = a / ab;
    out.s_var = a * b / (ab * ab * (ab + 1.0));
    out.e_s_one_minus_s = a * b / (ab * (ab + 1.0));
    return out;
}

namespace detail {

struct GridMoments {
    double mean = 0.0;
    double var = 0.0;
    double e1ms = 0.0;
    bool any_mass = false;
};

/// Simpson-weighted moments of prior(s) * s^u * (1-s)^(v-u) on [lo, hi].
/// Log-space with max subtraction; the h/3 Simpson factor cancels in ratios.
inline GridMoments grid_window_moments(const PriorSpec& prior, const LearningRecord& record,
                                       double lo, double hi, int points) {
    const double nr = static_cast<double>(record.responses);
    const double nf = static_cast<double>(record.impressions - record.responses);
    const double h = (hi - lo) / static_cast<double>(points - 1);
    const double neg_inf = -std::numeric_limits<double>::infinity();

    std::vector<double> logf(static_cast<std::size_t>(points));
    double fmax = neg_inf;
    for (int i = 0; i < points; ++i) {
        const double s = (i == points - 1) ? hi : lo + h * static_cast<double>(i);
        double lf = prior.log_density(s);
        if (lf > neg_inf) {
            if (nr > 0.0) lf += (s > 0.0) ? nr * std::log(s) : neg_inf;
            if (nf > 0.0 && lf > neg_inf) lf += (s < 1.0) ? nf * std::log1p(-s) : neg_inf;
        }
        logf[static_cast<std::size_t>(i)] = lf;
        if (lf > fmax) fmax = lf;
    }
    if (!(fmax > neg_inf)) return {};

    const double center = 0.5 * (lo + hi);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0, ms = 0.0;
    for (int i = 0; i < points; ++i) {
        const double lf = logf[static_cast<std::size_t>(i)];
        if (lf == neg_inf) continue;
        const double simpson = (i == 0 || i == points - 1) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
        const double f = simpson * std::exp(lf - fmax);
        const double s = (i == points - 1) ? hi : lo + h * static_cast<double>(i);
        const double d = s - center;
        m0 += f;
        m1 += f * d;
        m2 += f * d * d;
        ms += f * s * (1.0 - s);
    }
    if (!(m0 > 0.0) || !std::isfinite(m0)) return {};

    GridMoments out;
    const double offset = m1 / m0;
    out.mean = center + offset;
    out.var = std::max(0.0, m2 / m0 - offset * offset);
    out.e1ms = std::max(0.0, ms / m0);
    out.mean = std::min(std::max(out.mean, lo), hi);
    out.any_mass = true;
    return out;
}

}  // namespace detail

/// Posterior moments of the density prior(s) * s^u * (1-s)^(v-u) by Simpson
/// quadrature on an adaptive window of the prior support.
inline PosteriorSummary posterior_grid(const PriorSpec& prior, const LearningRecord& record,
                                       const QuadratureConfig& cfg = {}) {
    validate(cfg);
    validate(record);
    const auto [support_lo, support_hi] = prior.support();
    const double w_sig = cfg.window_sigmas;

    // Prior's own effective window.
    double plo = support_lo, phi = support_hi;
    if (prior.kind() == PriorSpec::Kind::TruncatedGaussian) {
        plo = std::max(plo, prior.mu() - w_sig * prior.sigma());
        phi = std::min(phi, prior.mu() + w_sig * prior.sigma());
        if (!(phi > plo)) {  // gaussian centered far outside [0, 1]
            plo = support_lo;
            phi = support_hi;
        }
    }

    // Likelihood window from the conjugate-uniform (Beta) moments.
    const PosteriorSummary proxy = posterior_beta(record);
    const double proxy_sd = std::sqrt(proxy.s_var);
    double lo = std::max(plo, proxy.s_mean - w_sig * proxy_sd);
    double hi = std::min(phi, proxy.s_mean + w_sig * proxy_sd);
    if (!(hi - lo > cfg.support_epsilon)) {
        // Disjoint prior/likelihood windows: start from the prior window and
        // let the refinement passes zoom onto the boundary layer.
        lo = plo;
        hi = phi;
    }

    detail::GridMoments gm;
    for (int pass = 0;; ++pass) {
        gm = detail::grid_window_moments(prior, record, lo, hi, cfg.grid_points);
        if (!gm.any_mass)
            throw std::runtime_error("posterior_grid: zero normalizing mass (prior support excludes all data-compatible rates)");
        if (pass + 1 >= cfg.refine_passes) break;
        const double h = (hi - lo) / static_cast<double>(cfg.grid_points - 1);
        const double half = std::max(w_sig * std::sqrt(gm.var), 2.0 * h);
        const double nlo = std::max(support_lo, gm.mean - half);
        const double nhi = std::min(support_hi, gm.mean + half);
        if (!(nhi - nlo > cfg.support_epsilon)) break;
        if (nhi - nlo >= 0.75 * (hi - lo)) break;  // window stabilized
        lo = nlo;
        hi = nhi;
    }

    PosteriorSummary out;
    out.s_mean = std::min(std::max(gm.mean, 0.0), 1.0);
    out.s_var = gm.var;
    out.e_s_one_minus_s = gm.e1ms;
    return out;
}

/// One draw from a prior; always lands in [0, 1] (rejection sampling for the
/// truncated gaussian).
inline double sample_rate(const PriorSpec& prior, Rng& rng) {
    switch (prior.kind()) {
        case PriorSpec::Kind::Uniform01:
            return rng.uniform01();
        case PriorSpec::Kind::TruncatedUniform:
            return rng.uniform(prior.lo(), prior.hi());
        case PriorSpec::Kind::TruncatedGaussian: {
            for (long long attempt = 0; attempt < 1'000'000; ++attempt) {
                const double s = rng.gaussian(prior.mu(), prior.sigma());
                if (s >= 0.0 && s <= 1.0) return s;
            }
            throw std::runtime_error("sample_rate: truncated gaussian rejection failed to land in [0, 1]");
        }
    }
    throw std::logic_error("sample_rate: unknown prior kind");
}

/// Simulate v learning ad calls at the given response rate.
inline LearningRecord simulate_learning(double rate, long long impressions, Rng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("simulate_learning: rate outside [0, 1]");
    if (impressions < 0) throw std::invalid_argument("simulate_learning: negative impression count");
    LearningRecord rec;
    rec.impressions = impressions;
    rec.responses = rng.binomial(impressions, rate);
    return rec;
}

}  // namespace adfolio
