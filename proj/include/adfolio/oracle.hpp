#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "adfolio/rng.hpp"
#include "adfolio/types.hpp"

namespace adfolio {

/// Finite-support distribution over response rates, used by the simulation
/// oracle so small instances can be enumerated exactly.
struct DiscreteRateDist {
    struct Atom {
        double rate = 0.0;
        double prob = 0.0;
    };
    std::vector<Atom> atoms;

    double mean() const {
        double m = 0.0;
        for (const auto& a : atoms) m += a.prob * a.rate;
        return m;
    }
    double variance() const {
        const double m = mean();
        double v = 0.0;
        for (const auto& a : atoms) v += a.prob * (a.rate - m) * (a.rate - m);
        return v;
    }
    double e_s_one_minus_s() const {
        double e = 0.0;
        for (const auto& a : atoms) e += a.prob * a.rate * (1.0 - a.rate);
        return e;
    }
};

inline void validate(const DiscreteRateDist& d) {
    if (d.atoms.empty()) throw std::invalid_argument("rate distribution: no atoms");
    double total = 0.0;
    for (const auto& a : d.atoms) {
        if (!(a.rate >= 0.0 && a.rate <= 1.0)) throw std::invalid_argument("rate distribution: rate outside [0, 1]");
        if (!(a.prob >= 0.0)) throw std::invalid_argument("rate distribution: negative probability");
        total += a.prob;
    }
    if (std::fabs(total - 1.0) > 1e-12) throw std::invalid_argument("rate distribution: probabilities must sum to 1");
}

enum class OracleMode { Auto, Exact, MonteCarlo };

struct OracleResult {
    double mean = 0.0;
    double variance = 0.0;
    double mean_se = 0.0;      // 0 in exact mode
    double variance_se = 0.0;  // 0 in exact mode
    bool exact = false;
};

inline constexpr std::uint64_t kOracleExactStateLimit = 1'000'000;

namespace detail {

inline double binomial_pmf(long long k, long long u, double s) {
    if (s <= 0.0) return u == 0 ? 1.0 : 0.0;
    if (s >= 1.0) return u == k ? 1.0 : 0.0;
    double coeff = 1.0;
    if (k <= 60) {
        for (long long i = 1; i <= u; ++i)
            coeff *= static_cast<double>(k - u + i) / static_cast<double>(i);
        return coeff * std::pow(s, static_cast<double>(u)) *
               std::pow(1.0 - s, static_cast<double>(k - u));
    }
    const double lc = std::lgamma(static_cast<double>(k + 1)) - std::lgamma(static_cast<double>(u + 1)) -
                      std::lgamma(static_cast<double>(k - u + 1));
    return std::exp(lc + static_cast<double>(u) * std::log(s) +
                    static_cast<double>(k - u) * std::log1p(-s));
}

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

/// Walks every joint outcome (one rate atom per ad, one response count per
/// ad) and feeds prob * f(revenue) to the accumulator.
template <typename F>
inline void enumerate_outcomes(const std::vector<AdSpec>& ads, const std::vector<DiscreteRateDist>& dists,
                               const std::vector<long long>& counts, F&& accumulate) {
    const std::size_t n = ads.size();
    std::vector<std::size_t> atom_idx(n, 0);
    while (true) {
        double s_prob = 1.0;
        for (std::size_t i = 0; i < n; ++i) s_prob *= dists[i].atoms[atom_idx[i]].prob;
        if (s_prob > 0.0) {
            std::vector<long long> responses(n, 0);
            while (true) {
                double prob = s_prob;
                double revenue = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    prob *= binomial_pmf(counts[i], responses[i], dists[i].atoms[atom_idx[i]].rate);
                    revenue += ads[i].bid * static_cast<double>(responses[i]);
                }
                accumulate(prob, revenue);
                std::size_t d = 0;
                while (d < n && responses[d] == counts[d]) responses[d++] = 0;
                if (d == n) break;
                ++responses[d];
            }
        }
        std::size_t d = 0;
        while (d < n && atom_idx[d] + 1 == dists[d].atoms.size()) atom_idx[d++] = 0;
        if (d == n) break;
        ++atom_idx[d];
    }
}

inline OracleResult oracle_exact(const std::vector<AdSpec>& ads, const std::vector<DiscreteRateDist>& dists,
                                 const std::vector<long long>& counts) {
    KahanSum mean_acc;
    enumerate_outcomes(ads, dists, counts, [&](double p, double rev) { mean_acc.add(p * rev); });
    const double mean = mean_acc.sum;
    KahanSum var_acc;  // second pass around the mean avoids E[X^2]-E[X]^2 cancellation
    enumerate_outcomes(ads, dists, counts,
                       [&](double p, double rev) { var_acc.add(p * (rev - mean) * (rev - mean)); });
    OracleResult out;
    out.mean = mean;
    out.variance = var_acc.sum;
    out.exact = true;
    return out;
}

inline OracleResult oracle_monte_carlo(const std::vector<AdSpec>& ads,
                                       const std::vector<DiscreteRateDist>& dists,
                                       const std::vector<long long>& counts, long long trials, Rng& rng) {
    const std::size_t n = ads.size();
    std::vector<double> revenue(static_cast<std::size_t>(trials));
    for (long long t = 0; t < trials; ++t) {
        double rev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform01();
            double cum = 0.0;
            double rate = dists[i].atoms.back().rate;
            for (const auto& atom : dists[i].atoms) {
                cum += atom.prob;
                if (u < cum) {
                    rate = atom.rate;
                    break;
                }
            }
            rev += ads[i].bid * static_cast<double>(rng.binomial(counts[i], rate));
        }
        revenue[static_cast<std::size_t>(t)] = rev;
    }
    KahanSum mean_acc;
    for (const double r : revenue) mean_acc.add(r);
    const double td = static_cast<double>(trials);
    const double mean = mean_acc.sum / td;
    KahanSum m2_acc, m4_acc;
    for (const double r : revenue) {
        const double d2 = (r - mean) * (r - mean);
        m2_acc.add(d2);
        m4_acc.add(d2 * d2);
    }
    OracleResult out;
    out.mean = mean;
    out.variance = m2_acc.sum / (td - 1.0);
    const double m2 = m2_acc.sum / td;
    const double m4 = m4_acc.sum / td;
    out.mean_se = std::sqrt(out.variance / td);
    out.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / td);
    return out;
}

}  // namespace detail

/// Empirical (or exact, when the joint outcome space is small) mean and
/// variance of total revenue for an integer allocation, by direct simulation
/// of the generative process: each rate drawn once per trial, then
/// independent Bernoulli payouts per call. Independent of the closed-form
/// variance decomposition it is used to verify.
inline OracleResult variance_oracle(const std::vector<AdSpec>& ads, const std::vector<DiscreteRateDist>& dists,
                                    const std::vector<long long>& counts, long long trials, Rng& rng,
                                    OracleMode mode = OracleMode::Auto) {
    const std::size_t n = ads.size();
    if (n == 0) throw std::invalid_argument("variance_oracle: no ads");
    if (dists.size() != n || counts.size() != n)
        throw std::invalid_argument("variance_oracle: dists/counts length mismatch");
    for (const auto& d : dists) validate(d);
    for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] < 0) throw std::invalid_argument("variance_oracle: negative count");
        if (!(ads[i].bid > 0.0)) throw std::invalid_argument("variance_oracle: bid must be > 0");
    }

    if (mode != OracleMode::MonteCarlo) {
        std::uint64_t states = 1;
        bool overflow = false;
        for (std::size_t i = 0; i < n && !overflow; ++i) {
            states *= dists[i].atoms.size();
            states *= static_cast<std::uint64_t>(counts[i]) + 1;
            if (states > kOracleExactStateLimit) overflow = true;
        }
        if (!overflow) return detail::oracle_exact(ads, dists, counts);
        if (mode == OracleMode::Exact)
            throw std::invalid_argument("variance_oracle: joint outcome space too large for exact enumeration");
    }
    if (trials < 2) throw std::invalid_argument("variance_oracle: need at least 2 Monte Carlo trials");
    return detail::oracle_monte_carlo(ads, dists, counts, trials, rng);
}

}  // namespace adfolio
