#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adfolio {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

inline constexpr double kPsdEigenvalueTol = 1e-9;   // smallest-eigenvalue slack
inline constexpr double kMomentIdentityTol = 1e-9;  // E[S(1-S)] = mean - var - mean^2

enum class PriceType { CPC, CPA };

inline const char* to_string(PriceType t) { return t == PriceType::CPC ? "CPC" : "CPA"; }

/// An ad competing for calls: pays `bid` dollars each time it elicits a
/// response. CPC vs CPA is an informational label; the payout model is the
/// same Bernoulli(rate) * bid for both.
struct AdSpec {
    std::string id;
    double bid = 0.0;
    PriceType price_type = PriceType::CPC;
};

/// Belief about a response rate before seeing data. Supports on [0, 1];
/// the gaussian variant is truncated to [0, 1] and renormalized.
class PriorSpec {
public:
    enum class Kind { Uniform01, TruncatedUniform, TruncatedGaussian };

    static PriorSpec uniform01() { return PriorSpec(Kind::Uniform01, 0.0, 1.0, 0.0, 0.0); }

    static PriorSpec truncated_uniform(double lo, double hi) {
        if (!(lo >= 0.0 && lo < hi && hi <= 1.0))
            throw std::invalid_argument("truncated_uniform: need 0 <= lo < hi <= 1");
        return PriorSpec(Kind::TruncatedUniform, lo, hi, 0.0, 0.0);
    }

    static PriorSpec truncated_gaussian(double mu, double sigma) {
        if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
            throw std::invalid_argument("truncated_gaussian: need finite mu and sigma > 0");
        return PriorSpec(Kind::TruncatedGaussian, 0.0, 1.0, mu, sigma);
    }

    Kind kind() const { return kind_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }

    std::pair<double, double> support() const { return {lo_, hi_}; }

    /// (mean, sd) used when deriving an approximate prior from this one.
    /// For the gaussian variant these are the parameter values (truncation
    /// shift ignored, matching how such priors are quoted).
    std::pair<double, double> mean_sd() const {
        switch (kind_) {
            case Kind::Uniform01:
                return {0.5, std::sqrt(1.0 / 12.0)};
            case Kind::TruncatedUniform:
                return {0.5 * (lo_ + hi_), (hi_ - lo_) / std::sqrt(12.0)};
            case Kind::TruncatedGaussian:
                return {mu_, sigma_};
        }
        return {0.0, 0.0};
    }

    /// Unnormalized log density at s (normalization constants cancel in all
    /// uses). -inf outside the support.
    double log_density(double s) const {
        if (s < lo_ || s > hi_) return -std::numeric_limits<double>::infinity();
        if (kind_ == Kind::TruncatedGaussian) {
            const double z = (s - mu_) / sigma_;
            return -0.5 * z * z;
        }
        return 0.0;
    }

private:
    PriorSpec(Kind k, double lo, double hi, double mu, double sigma)
        : kind_(k), lo_(lo), hi_(hi), mu_(mu), sigma_(sigma) {}

    Kind kind_;
    double lo_, hi_;   // support bounds
    double mu_, sigma_;  // gaussian parameters
};

/// Observed learning history: u responses out of v ad calls.
struct LearningRecord {
    long long impressions = 0;  // v
    long long responses = 0;    // u
};

inline void validate(const LearningRecord& r) {
    if (r.impressions < 0 || r.responses < 0 || r.responses > r.impressions)
        throw std::invalid_argument("learning record: need 0 <= responses <= impressions");
}

/// Moments of the belief about a response rate after learning data.
struct PosteriorSummary {
    double s_mean = 0.0;           // E[S | data]
    double s_var = 0.0;            // Var[S | data]
    double e_s_one_minus_s = 0.0;  // E[S(1-S) | data]
};

inline void validate(const PosteriorSummary& p) {
    if (!(p.s_mean >= 0.0 && p.s_mean <= 1.0))
        throw std::invalid_argument("posterior: s_mean outside [0, 1]");
    if (!(p.s_var >= 0.0) || !(p.e_s_one_minus_s >= 0.0))
        throw std::invalid_argument("posterior: negative second moment");
    if (p.s_var > p.s_mean * (1.0 - p.s_mean) + 1e-12)
        throw std::invalid_argument("posterior: s_var exceeds Bernoulli envelope");
    const double identity = p.s_mean - (p.s_var + p.s_mean * p.s_mean);
    if (std::fabs(p.e_s_one_minus_s - identity) > kMomentIdentityTol)
        throw std::invalid_argument("posterior: moment identity violated");
}

/// Inputs to allocation: the ads, their posterior rate beliefs, the session
/// call budget m, and optionally a full covariance matrix of per-call
/// expected revenues (defaults to diagonal from the posteriors).
struct MarketProblem {
    std::vector<AdSpec> ads;
    long long m = 0;
    std::vector<PosteriorSummary> posteriors;
    std::optional<Mat> covariance;
};

/// Quadratic-program data: per-call revenue covariance A, per-call
/// conditional-variance vector b, per-call expected revenue vector c.
struct AllocationProblem {
    Mat a_matrix;
    Vec b_vector;
    Vec c_vector;
    long long m = 0;
};

/// Fractional simplex weights plus the rounded integer call counts.
struct Allocation {
    Vec weights;
    std::vector<long long> counts;
};

/// Revenue variance split into its correlated (uncertainty) and
/// independent-fluctuation (randomness) parts; total is their sum.
struct VarianceBreakdown {
    double uncertainty = 0.0;
    double randomness = 0.0;
    double total = 0.0;
};

namespace detail {

/// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi sweeps.
/// Matrices here are tiny (n in the tens), so no pivoting sophistication.
inline double min_symmetric_eigenvalue(Mat a) {
    const std::size_t n = a.size();
    if (n == 0) throw std::invalid_argument("eigenvalue of empty matrix");
    if (n == 1) return a[0][0];
    double scale = 0.0;
    for (const auto& row : a)
        for (const double x : row) scale = std::max(scale, std::fabs(x));
    if (scale == 0.0) return 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::fabs(a[i][j]));
        if (off <= 1e-14 * scale) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p][q];
                if (std::fabs(apq) <= 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                const double t =
                    (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a[p][p] -= t * apq;
                a[q][q] += t * apq;
                a[p][q] = a[q][p] = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = a[p][k] = c * akp - s * akq;
                    a[k][q] = a[q][k] = s * akp + c * akq;
                }
            }
        }
    }
    double lo = a[0][0];
    for (std::size_t i = 1; i < n; ++i) lo = std::min(lo, a[i][i]);
    return lo;
}

inline void check_symmetric(const Mat& a, const char* what) {
    const std::size_t n = a.size();
    double scale = 0.0;
    for (const auto& row : a) {
        if (row.size() != n) throw std::invalid_argument(std::string(what) + ": matrix not square");
        for (const double x : row) {
            if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
            scale = std::max(scale, std::fabs(x));
        }
    }
    const double tol = 1e-9 * (1.0 + scale);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(a[i][j] - a[j][i]) > tol)
                throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
}

inline void check_psd(const Mat& a, const char* what) {
    if (min_symmetric_eigenvalue(a) < -kPsdEigenvalueTol)
        throw std::invalid_argument(std::string(what) + ": matrix not positive semidefinite");
}

}  // namespace detail

inline void validate(const AllocationProblem& p) {
    const std::size_t n = p.a_matrix.size();
    if (n == 0) throw std::invalid_argument("allocation problem: empty matrix");
    if (p.b_vector.size() != n || p.c_vector.size() != n)
        throw std::invalid_argument("allocation problem: vector length mismatch");
    if (p.m <= 0) throw std::invalid_argument("allocation problem: m must be positive");
    detail::check_symmetric(p.a_matrix, "allocation problem");
    detail::check_psd(p.a_matrix, "allocation problem");
    for (const double x : p.b_vector)
        if (!(x >= 0.0)) throw std::invalid_argument("allocation problem: b entries must be >= 0");
    for (const double x : p.c_vector)
        if (!(x >= 0.0)) throw std::invalid_argument("allocation problem: c entries must be >= 0");
}

/// Full invariant check over a market; returns the market on success.
inline MarketProblem validate_market(MarketProblem market) {
    const std::size_t n = market.ads.size();
    if (n == 0) throw std::invalid_argument("market: needs at least one ad");
    if (market.m <= 0) throw std::invalid_argument("market: m must be positive");
    if (market.posteriors.size() != n)
        throw std::invalid_argument("market: ads/posteriors length mismatch");
    for (const auto& ad : market.ads) {
        if (!(ad.bid > 0.0) || !std::isfinite(ad.bid))
            throw std::invalid_argument("market: ad '" + ad.id + "' needs bid > 0");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (market.ads[i].id == market.ads[j].id)
                throw std::invalid_argument("market: duplicate ad id '" + market.ads[i].id + "'");
    for (const auto& post : market.posteriors) validate(post);
    if (market.covariance) {
        if (market.covariance->size() != n)
            throw std::invalid_argument("market: covariance dimension mismatch");
        detail::check_symmetric(*market.covariance, "market covariance");
        detail::check_psd(*market.covariance, "market covariance");
    }
    return market;
}

}  // namespace adfolio
