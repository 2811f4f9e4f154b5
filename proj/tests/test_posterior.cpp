#include <catch2/catch.hpp>

#include <cmath>

#include "adfolio/posterior.hpp"

using namespace adfolio;

namespace {

double rel_err(double got, double want) { return std::fabs(got - want) / std::fabs(want); }

}  // namespace

TEST_CASE("posterior_beta closed forms") {
    SECTION("empty record is the uniform Beta(1,1)") {
        const PosteriorSummary p = posterior_beta({0, 0});
        REQUIRE(p.s_mean == Approx(0.5).epsilon(1e-15));
        REQUIRE(p.s_var == Approx(1.0 / 12.0).epsilon(1e-15));
        REQUIRE(p.e_s_one_minus_s == Approx(1.0 / 6.0).epsilon(1e-15));
    }
    SECTION("fully successful record: Beta(v+1, 1) mean") {
        for (const long long v : {1LL, 7LL, 1000LL}) {
            const PosteriorSummary p = posterior_beta({v, v});
            REQUIRE(p.s_mean == Approx(static_cast<double>(v + 1) / static_cast<double>(v + 2)).epsilon(1e-14));
        }
    }
    SECTION("invalid record rejected") {
        REQUIRE_THROWS_AS(posterior_beta({10, 11}), std::invalid_argument);
        REQUIRE_THROWS_AS(posterior_beta({-1, 0}), std::invalid_argument);
    }
}

TEST_CASE("posterior_grid matches posterior_beta under the uniform prior") {
    const QuadratureConfig cfg;
    const PriorSpec uniform = PriorSpec::uniform01();
    for (const auto& [u, v] : std::vector<std::pair<long long, long long>>{
             {0, 0}, {1, 3}, {0, 100}, {100, 100000}, {3, 50000}, {99999, 100000}}) {
        const LearningRecord rec{v, u};
        const PosteriorSummary want = posterior_beta(rec);
        const PosteriorSummary got = posterior_grid(uniform, rec, cfg);
        REQUIRE(rel_err(got.s_mean, want.s_mean) < 1e-8);
        REQUIRE(rel_err(got.s_var, want.s_var) < 1e-8);
        REQUIRE(rel_err(got.e_s_one_minus_s, want.e_s_one_minus_s) < 1e-8);
    }
}

TEST_CASE("posterior_grid with no data returns the prior") {
    SECTION("truncated uniform keeps its midpoint mean") {
        const PosteriorSummary p = posterior_grid(PriorSpec::truncated_uniform(0.2, 0.4), {0, 0});
        REQUIRE(p.s_mean == Approx(0.3).epsilon(1e-12));
        REQUIRE(std::sqrt(p.s_var) == Approx(0.2 / std::sqrt(12.0)).epsilon(1e-9));
    }
    SECTION("narrow gaussian keeps its location") {
        const PosteriorSummary p =
            posterior_grid(PriorSpec::truncated_gaussian(0.001, 0.0001), {0, 0});
        REQUIRE(p.s_mean == Approx(0.001).epsilon(1e-6));
        REQUIRE(std::sqrt(p.s_var) == Approx(0.0001).epsilon(1e-6));
    }
}

TEST_CASE("posterior_grid sharpens the prior once data arrives") {
    // Gaussian prior at 0.001 with 100k learning calls at a higher true rate:
    // posterior sits between prior and data, tighter than either.
    const PriorSpec prior = PriorSpec::truncated_gaussian(0.001, 0.0001);
    const PosteriorSummary p = posterior_grid(prior, {100000, 150});
    REQUIRE(p.s_mean > 0.001);
    REQUIRE(p.s_mean < 0.0015);
    REQUIRE(std::sqrt(p.s_var) < 0.0001);
}

TEST_CASE("posterior variance shrinks with more data at fixed empirical rate") {
    double last_var = 1.0;
    for (const long long v : {10LL, 100LL, 1000LL, 10000LL, 100000LL}) {
        const long long u = (3 * v) / 10;
        const PosteriorSummary p = posterior_grid(PriorSpec::uniform01(), {v, u});
        REQUIRE(p.s_var < last_var);
        last_var = p.s_var;
    }
}

TEST_CASE("quadrature configuration is validated") {
    QuadratureConfig cfg;
    cfg.grid_points = 10'000;  // even
    REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.grid_points = 51;  // too small
    REQUIRE_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.grid_points = 101;
    REQUIRE_NOTHROW(validate(cfg));
}

TEST_CASE("sample_rate respects each prior's support and moments") {
    SECTION("uniform01 mean") {
        Rng rng(7);
        double sum = 0.0;
        const int draws = 1'000'000;
        for (int i = 0; i < draws; ++i) sum += sample_rate(PriorSpec::uniform01(), rng);
        REQUIRE(sum / draws == Approx(0.5).margin(0.002));
    }
    SECTION("truncated gaussian empirical moments") {
        Rng rng(8);
        const PriorSpec prior = PriorSpec::truncated_gaussian(0.001, 0.0001);
        double sum = 0.0, sumsq = 0.0;
        const int draws = 200'000;
        for (int i = 0; i < draws; ++i) {
            const double s = sample_rate(prior, rng);
            REQUIRE(s >= 0.0);
            REQUIRE(s <= 1.0);
            sum += s;
            sumsq += s * s;
        }
        const double mean = sum / draws;
        const double sd = std::sqrt(sumsq / draws - mean * mean);
        REQUIRE(mean == Approx(0.001).margin(2e-6));
        REQUIRE(sd == Approx(0.0001).epsilon(0.02));
    }
    SECTION("truncated uniform support containment") {
        Rng rng(9);
        const PriorSpec prior = PriorSpec::truncated_uniform(0.2, 0.4);
        for (int i = 0; i < 10'000; ++i) {
            const double s = sample_rate(prior, rng);
            REQUIRE(s >= 0.2);
            REQUIRE(s <= 0.4);
        }
    }
}

TEST_CASE("simulate_learning endpoints and binomial moments") {
    Rng rng(11);
    SECTION("impossible and certain responses") {
        REQUIRE(simulate_learning(0.0, 1000, rng).responses == 0);
        REQUIRE(simulate_learning(1.0, 1000, rng).responses == 1000);
    }
    SECTION("empirical mean and sd of the response count") {
        // 10^4 sessions of 10^5 calls at rate 0.001: mean 100, sd ~ 10.
        double sum = 0.0, sumsq = 0.0;
        const int runs = 10'000;
        for (int i = 0; i < runs; ++i) {
            const auto rec = simulate_learning(0.001, 100'000, rng);
            REQUIRE(rec.impressions == 100'000);
            sum += static_cast<double>(rec.responses);
            sumsq += static_cast<double>(rec.responses) * static_cast<double>(rec.responses);
        }
        const double mean = sum / runs;
        const double sd = std::sqrt(sumsq / runs - mean * mean);
        REQUIRE(mean == Approx(100.0).margin(0.5));
        REQUIRE(sd == Approx(10.0).epsilon(0.05));
    }
    SECTION("empirical rate estimator sd is about sqrt(p(1-p)/v)") {
        double sum = 0.0, sumsq = 0.0;
        const int runs = 10'000;
        const double p = 0.05;
        const long long v = 2'000;
        for (int i = 0; i < runs; ++i) {
            const double est = static_cast<double>(simulate_learning(p, v, rng).responses) /
                               static_cast<double>(v);
            sum += est;
            sumsq += est * est;
        }
        const double mean = sum / runs;
        const double sd = std::sqrt(sumsq / runs - mean * mean);
        REQUIRE(sd == Approx(std::sqrt(p * (1.0 - p) / static_cast<double>(v))).epsilon(0.05));
        REQUIRE(mean == Approx(p).margin(3.0 * sd / std::sqrt(static_cast<double>(runs))));
    }
    SECTION("bad inputs rejected") {
        REQUIRE_THROWS_AS(simulate_learning(1.5, 10, rng), std::invalid_argument);
        REQUIRE_THROWS_AS(simulate_learning(0.5, -1, rng), std::invalid_argument);
    }
}

TEST_CASE("rng substreams are independent of sibling count") {
    // Draws from a derived stream must not change when other streams exist.
    Rng a = Rng::derive(99, {1, 2, 3});
    Rng b = Rng::derive(99, {1, 2, 3});
    for (int i = 0; i < 16; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c = Rng::derive(99, {1, 2, 4});
    REQUIRE(Rng::derive(99, {1, 2, 3}).next_u64() != c.next_u64());
}
