#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "adfolio/posterior.hpp"
#include "adfolio/qp.hpp"
#include "adfolio/rng.hpp"
#include "adfolio/types.hpp"
#include "adfolio/variance.hpp"

namespace adfolio {

enum class PriorRegime { Uniform, Approximate, Exact };

inline const char* to_string(PriorRegime r) {
    switch (r) {
        case PriorRegime::Uniform: return "uniform";
        case PriorRegime::Approximate: return "approximate";
        case PriorRegime::Exact: return "exact";
    }
    return "?";
}

/// The standard q sweep: 0..1500 in steps of 25, then a coarse tail up to
/// 20,000. 70 values.
inline Vec default_q_grid() {
    Vec grid;
    for (int q = 0; q <= 1500; q += 25) grid.push_back(static_cast<double>(q));
    for (const double q : {1750.0, 2000.0, 3000.0, 4000.0, 5000.0, 7500.0, 10000.0, 15000.0, 20000.0})
        grid.push_back(q);
    return grid;
}

/// Experiment protocol configuration. Defaults: 10 CPC ads at $1 with rates
/// ~ N(0.001, 0.0001) and 10 CPA ads at $10 with rates ~ N(0.0001, 0.00001)
/// (same revenue distribution per ad), 100,000 learning calls per ad,
/// results averaged over 10,000 trials.
struct ExperimentConfig {
    int n_cpc = 10;
    int n_cpa = 10;
    double cpc_bid = 1.0;
    double cpa_bid = 10.0;
    PriorSpec cpc_prior = PriorSpec::truncated_gaussian(0.001, 0.0001);
    PriorSpec cpa_prior = PriorSpec::truncated_gaussian(0.0001, 0.00001);
    long long learning_calls = 100'000;
    long long m = 10'000;  // session ad calls allocated per trial
    PriorRegime prior_regime = PriorRegime::Uniform;
    Vec q_grid = default_q_grid();
    int trials = 10'000;
    std::uint64_t master_seed = 1;
    QuadratureConfig quadrature{};
    SolverConfig solver{};
};

inline void validate_experiment(const ExperimentConfig& cfg) {
    if (cfg.n_cpc < 0 || cfg.n_cpa < 0 || cfg.n_cpc + cfg.n_cpa < 1)
        throw std::invalid_argument("experiment: need at least one ad");
    if (!(cfg.cpc_bid > 0.0) || !(cfg.cpa_bid > 0.0))
        throw std::invalid_argument("experiment: bids must be > 0");
    if (cfg.learning_calls <= 0) throw std::invalid_argument("experiment: learning_calls must be > 0");
    if (cfg.m <= 0) throw std::invalid_argument("experiment: m must be > 0");
    if (cfg.trials <= 0) throw std::invalid_argument("experiment: trials must be > 0");
    if (cfg.q_grid.empty()) throw std::invalid_argument("experiment: empty q grid");
    for (std::size_t i = 0; i < cfg.q_grid.size(); ++i) {
        if (!(cfg.q_grid[i] >= 0.0)) throw std::invalid_argument("experiment: q values must be >= 0");
        if (i > 0 && cfg.q_grid[i] < cfg.q_grid[i - 1])
            throw std::invalid_argument("experiment: q grid must be sorted ascending");
    }
    validate(cfg.quadrature);
    validate(cfg.solver);
}

inline std::vector<AdSpec> experiment_ads(const ExperimentConfig& cfg) {
    std::vector<AdSpec> ads;
    ads.reserve(static_cast<std::size_t>(cfg.n_cpc + cfg.n_cpa));
    for (int i = 0; i < cfg.n_cpc; ++i)
        ads.push_back({"cpc-" + std::to_string(i + 1), cfg.cpc_bid, PriceType::CPC});
    for (int i = 0; i < cfg.n_cpa; ++i)
        ads.push_back({"cpa-" + std::to_string(i + 1), cfg.cpa_bid, PriceType::CPA});
    return ads;
}

/// Index of the ad with maximum estimated revenue bid * posterior mean;
/// ties go to the lowest index.
inline std::size_t single_winner(const std::vector<PosteriorSummary>& posteriors,
                                 const std::vector<AdSpec>& ads) {
    const std::size_t n = ads.size();
    if (n == 0 || posteriors.size() != n)
        throw std::invalid_argument("single_winner: ads/posteriors length mismatch");
    std::size_t best = 0;
    double best_value = ads[0].bid * posteriors[0].s_mean;
    for (std::size_t i = 1; i < n; ++i) {
        const double value = ads[i].bid * posteriors[i].s_mean;
        if (value > best_value) {
            best = i;
            best_value = value;
        }
    }
    return best;
}

/// One simulated session: drawn rates, learning data, posteriors, the per-q
/// allocations with their estimated and actual expected revenue, and the
/// single-winner / ideal benchmarks.
struct TrialResult {
    Vec est_revenue;     // per q: c' counts
    Vec actual_revenue;  // per q: sum of counts_i * S_i * bid_i
    double single_winner_estimated = 0.0;
    double single_winner_actual = 0.0;
    double ideal = 0.0;  // m * max_i S_i bid_i
    Vec rates;
    std::vector<LearningRecord> learning;
    std::vector<PosteriorSummary> posteriors;
    int solver_failures = 0;
};

namespace detail {

inline constexpr std::uint64_t kPhaseRate = 1;
inline constexpr std::uint64_t kPhaseLearning = 2;

inline PosteriorSummary regime_posterior(const ExperimentConfig& cfg, const PriorSpec& actual_prior,
                                         const LearningRecord& record) {
    switch (cfg.prior_regime) {
        case PriorRegime::Uniform:
            return posterior_beta(record);
        case PriorRegime::Approximate: {
            const auto [mu, sigma] = actual_prior.mean_sd();
            const double lo = std::max(0.0, mu - 4.0 * sigma);
            const double hi = std::min(1.0, mu + 4.0 * sigma);
            return posterior_grid(PriorSpec::truncated_uniform(lo, hi), record, cfg.quadrature);
        }
        case PriorRegime::Exact:
            return posterior_grid(actual_prior, record, cfg.quadrature);
    }
    throw std::logic_error("regime_posterior: unknown regime");
}

}  // namespace detail

/// Run one trial: draw rates from the actual priors, simulate the learning
/// calls, estimate posteriors under the configured regime, allocate across
/// the whole q grid on that one market, and record the benchmarks.
inline TrialResult run_trial(const ExperimentConfig& cfg, long long trial_index) {
    validate_experiment(cfg);
    const std::vector<AdSpec> ads = experiment_ads(cfg);
    const std::size_t n = ads.size();

    TrialResult out;
    out.rates.resize(n);
    out.learning.resize(n);
    out.posteriors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PriorSpec& prior = (ads[i].price_type == PriceType::CPC) ? cfg.cpc_prior : cfg.cpa_prior;
        Rng rate_rng = Rng::derive(cfg.master_seed,
                                   {static_cast<std::uint64_t>(trial_index), i, detail::kPhaseRate});
        out.rates[i] = sample_rate(prior, rate_rng);
        Rng learn_rng = Rng::derive(cfg.master_seed,
                                    {static_cast<std::uint64_t>(trial_index), i, detail::kPhaseLearning});
        out.learning[i] = simulate_learning(out.rates[i], cfg.learning_calls, learn_rng);
        out.posteriors[i] = detail::regime_posterior(cfg, prior, out.learning[i]);
    }

    const MarketProblem market = validate_market({ads, cfg.m, out.posteriors, std::nullopt});
    const AllocationProblem problem = build_problem(market);

    const std::size_t q_count = cfg.q_grid.size();
    out.est_revenue.resize(q_count);
    out.actual_revenue.resize(q_count);
    Vec prev;
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        const QmapSolution sol =
            solve_qmap(problem, cfg.q_grid[qi], cfg.solver, prev.empty() ? nullptr : &prev);
        if (!sol.converged) ++out.solver_failures;
        const std::vector<long long> counts = round_allocation(sol.weights, cfg.m);
        out.est_revenue[qi] = expected_revenue(problem, counts);
        double actual = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            actual += static_cast<double>(counts[i]) * out.rates[i] * ads[i].bid;
        out.actual_revenue[qi] = actual;
        prev = sol.weights;
    }

    const std::size_t winner = single_winner(out.posteriors, ads);
    const double md = static_cast<double>(cfg.m);
    out.single_winner_estimated = md * ads[winner].bid * out.posteriors[winner].s_mean;
    out.single_winner_actual = md * ads[winner].bid * out.rates[winner];
    double ideal = 0.0;
    for (std::size_t i = 0; i < n; ++i) ideal = std::max(ideal, md * ads[i].bid * out.rates[i]);
    out.ideal = ideal;
    return out;
}

/// Per-q aggregates over trials. Fractions are of each trial's own ideal
/// revenue (headline numbers); pooled variants divide the mean revenue by
/// the mean ideal instead.
struct QAggregate {
    double q = 0.0;
    double est_frac_mean = 0.0;
    double est_frac_se = 0.0;
    double actual_frac_mean = 0.0;
    double actual_frac_se = 0.0;
    double diff_vs_single_mean = 0.0;  // paired per-trial (actual - single winner) fraction
    double diff_vs_single_se = 0.0;
    double est_frac_pooled = 0.0;
    double actual_frac_pooled = 0.0;
};

struct ExperimentResult {
    std::vector<QAggregate> per_q;
    double single_winner_actual_frac_mean = 0.0;
    double single_winner_actual_frac_se = 0.0;
    double single_winner_actual_frac_pooled = 0.0;
    double single_winner_est_frac_mean = 0.0;
    double single_winner_est_frac_se = 0.0;
    int trials_used = 0;
    int failed_trials = 0;
    ExperimentConfig config;
};

/// Deterministic experiment: per-trial substreams are derived from
/// (master_seed, trial, ad, phase), trials run independently (optionally on
/// several threads), and aggregation always reduces in trial order, so the
/// result depends only on the configuration.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
    validate_experiment(cfg);
    if (threads < 1) throw std::invalid_argument("run_experiment: threads must be >= 1");
    const int trials = cfg.trials;
    const std::size_t q_count = cfg.q_grid.size();

    struct Slot {
        Vec est, actual;
        double sw_est = 0.0, sw_actual = 0.0, ideal = 0.0;
        bool failed = false;
        std::string error;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(trials));

    auto work = [&](long long begin, long long end) {
        for (long long t = begin; t < end; ++t) {
            Slot& slot = slots[static_cast<std::size_t>(t)];
            try {
                TrialResult tr = run_trial(cfg, t);
                if (tr.solver_failures > 0) {
                    slot.failed = true;
                    slot.error = "trial " + std::to_string(t) + ": " +
                                 std::to_string(tr.solver_failures) + " q points failed to converge";
                    continue;
                }
                if (!(tr.ideal > 0.0)) {
                    slot.failed = true;
                    slot.error = "trial " + std::to_string(t) + ": ideal revenue is zero";
                    continue;
                }
                slot.est = std::move(tr.est_revenue);
                slot.actual = std::move(tr.actual_revenue);
                slot.sw_est = tr.single_winner_estimated;
                slot.sw_actual = tr.single_winner_actual;
                slot.ideal = tr.ideal;
            } catch (const std::exception& e) {
                slot.failed = true;
                slot.error = "trial " + std::to_string(t) + ": " + e.what();
            }
        }
    };

    const int worker_count = std::min<long long>(threads, trials);
    if (worker_count <= 1) {
        work(0, trials);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(worker_count));
        const long long chunk = (trials + worker_count - 1) / worker_count;
        for (int w = 0; w < worker_count; ++w) {
            const long long begin = static_cast<long long>(w) * chunk;
            const long long end = std::min<long long>(begin + chunk, trials);
            if (begin >= end) break;
            workers.emplace_back(work, begin, end);
        }
        for (auto& th : workers) th.join();
    }

    ExperimentResult result;
    result.config = cfg;
    std::string first_error;
    for (const Slot& slot : slots) {
        if (slot.failed) {
            ++result.failed_trials;
            if (first_error.empty()) first_error = slot.error;
        }
    }
    if (static_cast<double>(result.failed_trials) > 0.001 * static_cast<double>(trials))
        throw std::runtime_error("run_experiment: too many failed trials (" +
                                 std::to_string(result.failed_trials) + "/" + std::to_string(trials) +
                                 "); first: " + first_error);
    result.trials_used = trials - result.failed_trials;
    const double used = static_cast<double>(result.trials_used);
    if (result.trials_used == 0) throw std::runtime_error("run_experiment: no usable trials");

    // Two passes per statistic: mean, then spread.
    auto finalize = [&](double sum, double sumsq, double& mean, double& se) {
        mean = sum / used;
        const double var = std::max(0.0, sumsq / used - mean * mean);
        se = result.trials_used > 1 ? std::sqrt(var / (used - 1.0)) : 0.0;
    };

    result.per_q.resize(q_count);
    for (std::size_t qi = 0; qi < q_count; ++qi) {
        QAggregate& agg = result.per_q[qi];
        agg.q = cfg.q_grid[qi];
        double est_sum = 0.0, est_sq = 0.0, act_sum = 0.0, act_sq = 0.0;
        double diff_sum = 0.0, diff_sq = 0.0;
        double est_pool = 0.0, act_pool = 0.0, ideal_pool = 0.0;
        for (const Slot& slot : slots) {
            if (slot.failed) continue;
            const double est_frac = slot.est[qi] / slot.ideal;
            const double act_frac = slot.actual[qi] / slot.ideal;
            const double diff = act_frac - slot.sw_actual / slot.ideal;
            est_sum += est_frac;
            est_sq += est_frac * est_frac;
            act_sum += act_frac;
            act_sq += act_frac * act_frac;
            diff_sum += diff;
            diff_sq += diff * diff;
            est_pool += slot.est[qi];
            act_pool += slot.actual[qi];
            ideal_pool += slot.ideal;
        }
        finalize(est_sum, est_sq, agg.est_frac_mean, agg.est_frac_se);
        finalize(act_sum, act_sq, agg.actual_frac_mean, agg.actual_frac_se);
        finalize(diff_sum, diff_sq, agg.diff_vs_single_mean, agg.diff_vs_single_se);
        agg.est_frac_pooled = est_pool / ideal_pool;
        agg.actual_frac_pooled = act_pool / ideal_pool;
    }

    double sw_sum = 0.0, sw_sq = 0.0, swe_sum = 0.0, swe_sq = 0.0;
    double sw_pool = 0.0, ideal_pool = 0.0;
    for (const Slot& slot : slots) {
        if (slot.failed) continue;
        const double sw_frac = slot.sw_actual / slot.ideal;
        const double swe_frac = slot.sw_est / slot.ideal;
        sw_sum += sw_frac;
        sw_sq += sw_frac * sw_frac;
        swe_sum += swe_frac;
        swe_sq += swe_frac * swe_frac;
        sw_pool += slot.sw_actual;
        ideal_pool += slot.ideal;
    }
    finalize(sw_sum, sw_sq, result.single_winner_actual_frac_mean, result.single_winner_actual_frac_se);
    finalize(swe_sum, swe_sq, result.single_winner_est_frac_mean, result.single_winner_est_frac_se);
    result.single_winner_actual_frac_pooled = sw_pool / ideal_pool;
    return result;
}

}  // namespace adfolio
