#include <catch2/catch.hpp>

#include <cmath>

#include "adfolio/oracle.hpp"
#include "adfolio/variance.hpp"

using namespace adfolio;

TEST_CASE("oracle exact mode on hand-checkable instances") {
    SECTION("degenerate rate: one Bernoulli call has variance b^2 p(1-p)") {
        const std::vector<AdSpec> ads = {{"a", 3.0, PriceType::CPC}};
        const std::vector<DiscreteRateDist> dists = {{{{0.3, 1.0}}}};
        Rng rng(1);
        const OracleResult r = variance_oracle(ads, dists, {1}, 0, rng);
        REQUIRE(r.exact);
        REQUIRE(r.mean == Approx(3.0 * 0.3).epsilon(1e-14));
        REQUIRE(r.variance == Approx(9.0 * 0.3 * 0.7).epsilon(1e-12));
    }
    SECTION("two-point rate distribution, ten calls") {
        // S in {0.2, 0.8} equiprobable, bid 1, k = 10:
        // E[R] = 5; E[R^2] = mean of (1.6 + 4) and (1.6 + 64) plus cross term
        // -> Var = k^2 Var(S) + k E[S(1-S)] = 100 * 0.09 + 10 * 0.16 = 10.6.
        const std::vector<AdSpec> ads = {{"a", 1.0, PriceType::CPC}};
        const std::vector<DiscreteRateDist> dists = {{{{0.2, 0.5}, {0.8, 0.5}}}};
        Rng rng(2);
        const OracleResult r = variance_oracle(ads, dists, {10}, 0, rng);
        REQUIRE(r.exact);
        REQUIRE(r.mean == Approx(5.0).epsilon(1e-13));
        REQUIRE(r.variance == Approx(10.6).epsilon(1e-12));
    }
}

TEST_CASE("oracle mode selection") {
    const std::vector<AdSpec> ads = {{"a", 1.0, PriceType::CPC}};
    const std::vector<DiscreteRateDist> dists = {{{{0.001, 1.0}}}};
    Rng rng(3);
    SECTION("large state spaces fall back to Monte Carlo") {
        const OracleResult r = variance_oracle(ads, dists, {5'000'000}, 2'000, rng);
        REQUIRE_FALSE(r.exact);
        REQUIRE(r.mean_se > 0.0);
    }
    SECTION("forcing exact on a large instance is an error") {
        REQUIRE_THROWS_AS(variance_oracle(ads, dists, {5'000'000}, 100, rng, OracleMode::Exact),
                          std::invalid_argument);
    }
    SECTION("distribution validation") {
        const std::vector<DiscreteRateDist> bad = {{{{0.5, 0.7}, {0.6, 0.7}}}};
        REQUIRE_THROWS_AS(variance_oracle(ads, bad, {1}, 100, rng), std::invalid_argument);
        REQUIRE_THROWS_AS(variance_oracle(ads, dists, {-1}, 100, rng), std::invalid_argument);
    }
}

TEST_CASE("Monte Carlo oracle is consistent with exact enumeration") {
    const std::vector<AdSpec> ads = {{"a", 1.0, PriceType::CPC}, {"b", 5.0, PriceType::CPA}};
    const std::vector<DiscreteRateDist> dists = {
        {{{0.1, 0.5}, {0.4, 0.5}}},
        {{{0.02, 0.75}, {0.1, 0.25}}},
    };
    const std::vector<long long> counts = {8, 6};
    Rng rng_exact(4), rng_mc(5);
    const OracleResult exact = variance_oracle(ads, dists, counts, 0, rng_exact, OracleMode::Exact);
    const OracleResult mc = variance_oracle(ads, dists, counts, 200'000, rng_mc, OracleMode::MonteCarlo);
    REQUIRE(std::fabs(mc.mean - exact.mean) < 3.0 * mc.mean_se);
    REQUIRE(std::fabs(mc.variance - exact.variance) < 3.0 * mc.variance_se);
}

TEST_CASE("Monte Carlo oracle validates the analytic decomposition on a random 3-ad market") {
    Rng gen(6);
    const std::vector<AdSpec> ads = {
        {"a", 0.8, PriceType::CPC}, {"b", 1.5, PriceType::CPA}, {"c", 1.1, PriceType::CPC}};
    std::vector<DiscreteRateDist> dists;
    for (int i = 0; i < 3; ++i) {
        DiscreteRateDist d;
        const double p1 = 0.1 + 0.3 * gen.uniform01();
        const double p2 = 0.5 + 0.3 * gen.uniform01();
        const double w = 0.3 + 0.4 * gen.uniform01();
        d.atoms = {{p1, w}, {p2, 1.0 - w}};
        dists.push_back(d);
    }
    const std::vector<long long> counts = {30, 20, 25};

    MarketProblem market;
    market.ads = ads;
    market.m = 75;
    for (const auto& d : dists)
        market.posteriors.push_back({d.mean(), d.variance(), d.e_s_one_minus_s()});
    const AllocationProblem problem = build_problem(validate_market(std::move(market)));
    const VarianceBreakdown analytic = allocation_variance(problem, counts);

    Rng rng(7);
    const OracleResult mc = variance_oracle(ads, dists, counts, 150'000, rng, OracleMode::MonteCarlo);
    REQUIRE(std::fabs(mc.variance - analytic.total) < 3.0 * mc.variance_se);
    REQUIRE(std::fabs(mc.mean - expected_revenue(problem, counts)) < 3.0 * mc.mean_se);
}
