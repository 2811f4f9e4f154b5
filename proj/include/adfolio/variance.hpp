#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adfolio/types.hpp"

namespace adfolio {

/// Inputs for the single-ad variance approximations. c_comp is the
/// competitive expected revenue per ad call (a scalar, distinct from the
/// per-ad expected-revenue vector of the allocation problem).
struct SingleAdInputs {
    long long k = 0;      // ad calls allocated to this ad
    double bid = 0.0;     // dollars per response
    double p = 0.0;       // true response rate
    double sigma = 0.0;   // sd of the response-rate estimate error
    double c_comp = 0.0;  // competitive expected revenue per ad call
    long long v = 0;      // learning ad calls behind the estimate
};

enum class ApproxForm { Raw, Competitive, Learning };

/// Quadratic-program data from a market: with Bernoulli bid payouts,
/// E[X|S] = bid * S and Var[X|S] = bid^2 * S(1-S), so
///   a_ii = bid_i^2 * Var[S_i],  b_i = bid_i^2 * E[S_i(1-S_i)],
///   c_i = bid_i * E[S_i].
/// Off-diagonal a_ij comes from market.covariance when supplied, else 0
/// (independently estimated rates).
inline AllocationProblem build_problem(const MarketProblem& market) {
    const std::size_t n = market.ads.size();
    AllocationProblem out;
    out.m = market.m;
    out.a_matrix.assign(n, Vec(n, 0.0));
    out.b_vector.resize(n);
    out.c_vector.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double bid = market.ads[i].bid;
        const PosteriorSummary& post = market.posteriors[i];
        out.a_matrix[i][i] = bid * bid * post.s_var;
        out.b_vector[i] = bid * bid * post.e_s_one_minus_s;
        out.c_vector[i] = bid * post.s_mean;
    }
    if (market.covariance) {
        const Mat& cov = *market.covariance;
        if (cov.size() != n) throw std::invalid_argument("build_problem: covariance dimension mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            const double derived = out.a_matrix[i][i];
            const double tol = 1e-12 + 1e-6 * std::max(std::fabs(cov[i][i]), std::fabs(derived));
            if (std::fabs(cov[i][i] - derived) > tol)
                throw std::invalid_argument(
                    "build_problem: covariance diagonal conflicts with posterior-derived variance");
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) out.a_matrix[i][j] = cov[i][j];
        }
    }
    return out;
}

/// Exact variance of total revenue for integer call counts k:
///   uncertainty = k' A k   (response rates drawn once, correlating calls)
///   randomness  = b' k     (independent per-call Bernoulli fluctuation)
inline VarianceBreakdown allocation_variance(const AllocationProblem& problem,
                                             const std::vector<long long>& counts) {
    const std::size_t n = problem.a_matrix.size();
    if (counts.size() != n) throw std::invalid_argument("allocation_variance: counts length mismatch");
    VarianceBreakdown out;
    for (std::size_t i = 0; i < n; ++i) {
        const double ki = static_cast<double>(counts[i]);
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += problem.a_matrix[i][j] * static_cast<double>(counts[j]);
        out.uncertainty += ki * row;
        out.randomness += ki * problem.b_vector[i];
    }
    out.total = out.uncertainty + out.randomness;
    return out;
}

inline VarianceBreakdown allocation_variance(const AllocationProblem& problem, const Allocation& alloc) {
    return allocation_variance(problem, alloc.counts);
}

/// Expected total revenue c' k for integer call counts.
inline double expected_revenue(const AllocationProblem& problem, const std::vector<long long>& counts) {
    const std::size_t n = problem.c_vector.size();
    if (counts.size() != n) throw std::invalid_argument("expected_revenue: counts length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += problem.c_vector[i] * static_cast<double>(counts[i]);
    return total;
}

inline double expected_revenue(const AllocationProblem& problem, const Allocation& alloc) {
    return expected_revenue(problem, alloc.counts);
}

/// Single-ad variance approximations:
///   Raw:         k^2 b^2 sigma^2            + k b^2 p(1-p)
///   Competitive: k^2 c^2 sigma^2 / p^2      + k c^2 (1-p)/p    (b = c/p)
///   Learning:    k^2 c^2 (1-p) / (v p)      + k c^2 (1-p)/p    (sigma^2 = p(1-p)/v)
inline VarianceBreakdown single_ad_variance_approx(const SingleAdInputs& in, ApproxForm form) {
    if (in.k < 0) throw std::invalid_argument("single ad variance: negative k");
    const double k = static_cast<double>(in.k);
    VarianceBreakdown out;
    switch (form) {
        case ApproxForm::Raw: {
            const double b2 = in.bid * in.bid;
            out.uncertainty = k * k * b2 * in.sigma * in.sigma;
            out.randomness = k * b2 * in.p * (1.0 - in.p);
            break;
        }
        case ApproxForm::Competitive: {
            if (!(in.p > 0.0)) throw std::invalid_argument("single ad variance: p must be > 0 for the competitive form");
            const double c2 = in.c_comp * in.c_comp;
            out.uncertainty = k * k * c2 * in.sigma * in.sigma / (in.p * in.p);
            out.randomness = k * c2 * (1.0 - in.p) / in.p;
            break;
        }
        case ApproxForm::Learning: {
            if (!(in.p > 0.0)) throw std::invalid_argument("single ad variance: p must be > 0 for the learning form");
            if (in.v <= 0) throw std::invalid_argument("single ad variance: v must be > 0 for the learning form");
            const double c2 = in.c_comp * in.c_comp;
            out.uncertainty = k * k * c2 * (1.0 - in.p) / (static_cast<double>(in.v) * in.p);
            out.randomness = k * c2 * (1.0 - in.p) / in.p;
            break;
        }
    }
    out.total = out.uncertainty + out.randomness;
    return out;
}

/// Under the learning form, uncertainty : randomness = k : v.
inline double uncertainty_randomness_ratio(long long k, long long v) {
    if (v <= 0) throw std::invalid_argument("uncertainty_randomness_ratio: no learning data (v must be > 0)");
    if (k < 0) throw std::invalid_argument("uncertainty_randomness_ratio: negative k");
    return static_cast<double>(k) / static_cast<double>(v);
}

/// Variance of a uniform split of k calls over r identical independent ads
/// (per-ad uncertainty alpha, randomness beta): k^2 alpha / r + k beta,
/// for r = 1..r_max. Spreading calls shrinks only the uncertainty part.
inline std::vector<std::pair<long long, double>> diversification_curve(double alpha, double beta,
                                                                       long long k, long long r_max) {
    if (r_max < 1) throw std::invalid_argument("diversification_curve: r_max must be >= 1");
    if (k < 0) throw std::invalid_argument("diversification_curve: negative k");
    const double kd = static_cast<double>(k);
    std::vector<std::pair<long long, double>> curve;
    curve.reserve(static_cast<std::size_t>(r_max));
    for (long long r = 1; r <= r_max; ++r)
        curve.emplace_back(r, kd * kd * alpha / static_cast<double>(r) + kd * beta);
    return curve;
}

}  // namespace adfolio
