// Acceptance suite: one pass/fail line per criterion, exit 0 only if all
// pass. Needs the CLI binary path and the shipped data directory:
//
//   acceptance --cli <path-to-adfolio> --data <repo>/data --out <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cfloat>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "adfolio/adfolio.hpp"

using namespace adfolio;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << index << ". " << name;
    if (!detail.empty()) std::cout << " — " << detail;
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

std::string fmt(double x) {
    std::ostringstream ss;
    ss.precision(4);
    ss << x;
    return ss.str();
}

// --- criterion 1: analytic variance vs exact enumeration ---------------------

void criterion_variance_identity() {
    const auto start = std::chrono::steady_clock::now();
    Rng gen(101);
    double worst = 0.0;
    int instances = 0;
    while (instances < 60) {
        const std::size_t n = 1 + static_cast<std::size_t>(gen.uniform01() * 3.0);
        std::vector<AdSpec> ads;
        std::vector<DiscreteRateDist> dists;
        std::vector<long long> counts;
        long long total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ads.push_back({"ad-" + std::to_string(i), gen.uniform(0.5, 2.0), PriceType::CPC});
            DiscreteRateDist d;
            const std::size_t atoms = 1 + static_cast<std::size_t>(gen.uniform01() * 3.0);
            double mass = 0.0;
            for (std::size_t a = 0; a < atoms; ++a) {
                const double w = 0.1 + gen.uniform01();
                d.atoms.push_back({gen.uniform01(), w});
                mass += w;
            }
            for (auto& atom : d.atoms) atom.prob /= mass;
            // exact renormalization so probabilities sum to 1 bit-exactly
            double check = 0.0;
            for (const auto& atom : d.atoms) check += atom.prob;
            d.atoms.back().prob += 1.0 - check;
            dists.push_back(d);
            const long long k = static_cast<long long>(gen.uniform01() * 11.0);
            counts.push_back(std::min<long long>(k, 10));
            total += counts.back();
        }
        if (total == 0) continue;
        ++instances;

        MarketProblem market;
        market.ads = ads;
        market.m = total;
        for (const auto& d : dists)
            market.posteriors.push_back({d.mean(), d.variance(), d.e_s_one_minus_s()});
        const AllocationProblem problem = build_problem(validate_market(std::move(market)));
        const VarianceBreakdown analytic = allocation_variance(problem, counts);
        Rng rng(1);
        const OracleResult oracle = variance_oracle(ads, dists, counts, 0, rng, OracleMode::Exact);
        worst = std::max(worst, std::fabs(analytic.total - oracle.variance));
        worst = std::max(worst, std::fabs(expected_revenue(problem, counts) - oracle.mean));
    }
    const double elapsed = seconds_since(start);
    report(1, "variance decomposition equals exact enumeration on random small instances",
           worst <= 1e-9 && elapsed < 10.0,
           "60 instances, worst |diff| " + fmt(worst) + ", " + fmt(elapsed) + "s (limit 1e-9, 10s)");
}

// --- criterion 2: QP solver vs dense grid oracle ------------------------------

void criterion_qp_optimality() {
    const auto start = std::chrono::steady_clock::now();
    Rng gen(202);
    double worst_excess = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = (trial % 2 == 0) ? 2 : 3;
        Mat factor(n, Vec(n, 0.0));
        for (auto& row : factor)
            for (auto& x : row) x = gen.uniform(-1.0, 1.0);
        AllocationProblem p;
        p.m = 100;
        p.a_matrix.assign(n, Vec(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < n; ++k) dot += factor[k][i] * factor[k][j];
                p.a_matrix[i][j] = dot / static_cast<double>(n);
            }
        p.b_vector.resize(n);
        p.c_vector.resize(n);
        for (auto& x : p.b_vector) x = gen.uniform(0.0, 1.0);
        for (auto& x : p.c_vector) x = gen.uniform(0.0, 1.0);
        const double q = gen.uniform(0.0, 1000.0);

        const QmapSolution sol = solve_qmap(p, q);
        const GridOracleResult oracle = qmap_grid_oracle(p, q, 2000);
        const double allowed = 1e-6 * (1.0 + std::fabs(oracle.objective));
        worst_excess = std::max(worst_excess, (sol.objective - oracle.objective) / allowed);
    }
    const double elapsed = seconds_since(start);
    report(2, "projected-gradient objective within 1e-6 relative of the grid oracle",
           worst_excess <= 1.0 && elapsed < 30.0,
           "100 instances, worst excess " + fmt(worst_excess) + "x tolerance, " + fmt(elapsed) +
               "s (limit 30s)");
}

// --- criterion 3: grid posterior vs Beta closed form --------------------------

void criterion_posterior_agreement() {
    const auto start = std::chrono::steady_clock::now();
    const PriorSpec uniform = PriorSpec::uniform01();
    const QuadratureConfig cfg;
    double worst = 0.0;
    int cases = 0;
    for (const long long v : {0LL, 1LL, 2LL, 3LL, 10LL, 100LL, 1000LL, 10'000LL, 100'000LL}) {
        std::vector<long long> us = {0, 1, v / 10, v / 3, v / 2, v - 1, v};
        std::sort(us.begin(), us.end());
        us.erase(std::unique(us.begin(), us.end()), us.end());
        for (const long long u : us) {
            if (u < 0 || u > v) continue;
            ++cases;
            const LearningRecord rec{v, u};
            const PosteriorSummary want = posterior_beta(rec);
            const PosteriorSummary got = posterior_grid(uniform, rec, cfg);
            worst = std::max(worst, std::fabs(got.s_mean - want.s_mean) / want.s_mean);
            worst = std::max(worst, std::fabs(got.s_var - want.s_var) / want.s_var);
            worst = std::max(worst,
                             std::fabs(got.e_s_one_minus_s - want.e_s_one_minus_s) / want.e_s_one_minus_s);
        }
    }
    const double elapsed = seconds_since(start);
    report(3, "grid posterior matches the Beta closed form to 1e-8 relative",
           worst <= 1e-8 && elapsed < 10.0,
           std::to_string(cases) + " (u,v) pairs up to v=1e5, worst rel err " + fmt(worst) + ", " +
               fmt(elapsed) + "s");
}

// --- criterion 4: learning-form uncertainty share -----------------------------

void criterion_uncertainty_share() {
    bool ok = true;
    std::string detail;
    for (const auto& [k, v] : std::vector<std::pair<long long, long long>>{
             {1000, 9000}, {1, 1}, {7, 13}, {250, 1'000'000}, {99, 1}}) {
        SingleAdInputs in;
        in.k = k;
        in.v = v;
        in.p = 0.001;
        in.c_comp = 0.001;
        const VarianceBreakdown out = single_ad_variance_approx(in, ApproxForm::Learning);
        const double share = out.uncertainty / (out.uncertainty + out.randomness);
        const double want = static_cast<double>(k) / static_cast<double>(k + v);
        if (std::fabs(share - want) > 4.0 * DBL_EPSILON * want) {
            ok = false;
            detail = "k=" + std::to_string(k) + " v=" + std::to_string(v) + " share " + fmt(share);
        }
    }
    {
        SingleAdInputs in;
        in.k = 1000;
        in.v = 9000;
        in.p = 0.02;
        in.c_comp = 0.5;
        const VarianceBreakdown out = single_ad_variance_approx(in, ApproxForm::Learning);
        const double share = out.uncertainty / (out.uncertainty + out.randomness);
        if (std::fabs(share - 0.1) > 4.0 * DBL_EPSILON) ok = false;
        if (detail.empty()) detail = "v = 9k gives share " + fmt(share) + " (10%)";
    }
    report(4, "learning-form uncertainty share equals k/(k+v)", ok, detail);
}

// --- criterion 5: diversification law -----------------------------------------

void criterion_diversification() {
    const double alpha = 3.7e-3, beta = 0.61;
    const long long k = 840;  // divisible by every r checked below
    const double kd = static_cast<double>(k);
    bool ok = true;
    std::string detail;

    const auto curve = diversification_curve(alpha, beta, k, 20);
    for (const auto& [r, var] : curve) {
        const double want = kd * kd * alpha / static_cast<double>(r) + kd * beta;
        if (var != want) ok = false;
    }
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (!(curve[i].second < curve[i - 1].second)) ok = false;

    // Cross-check against the full quadratic form at divisible r.
    for (const long long r : {1LL, 2LL, 3LL, 4LL, 5LL, 6LL, 7LL, 8LL, 10LL, 12LL, 14LL, 20LL}) {
        AllocationProblem p;
        p.m = k;
        p.a_matrix.assign(static_cast<std::size_t>(r), Vec(static_cast<std::size_t>(r), 0.0));
        for (long long i = 0; i < r; ++i)
            p.a_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = alpha;
        p.b_vector.assign(static_cast<std::size_t>(r), beta);
        p.c_vector.assign(static_cast<std::size_t>(r), 1.0);
        const std::vector<long long> counts(static_cast<std::size_t>(r), k / r);
        const double via_form = allocation_variance(p, counts).total;
        const double via_curve = curve[static_cast<std::size_t>(r - 1)].second;
        if (std::fabs(via_form - via_curve) > 1e-12 * via_curve) {
            ok = false;
            detail = "r=" + std::to_string(r) + " quadratic form " + fmt(via_form) + " vs curve " +
                     fmt(via_curve);
        }
    }
    report(5, "uniform split over r ads follows k^2*alpha/r + k*beta, strictly decreasing", ok, detail);
}

// --- criteria 6-8: experiment reproduction at desk scale ----------------------

struct ExperimentSet {
    ExperimentResult uniform, approximate, exact;
    double seconds = 0.0;
};

ExperimentSet run_experiments(int trials, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg;
    cfg.trials = trials;
    cfg.master_seed = seed;
    ExperimentSet set;
    cfg.prior_regime = PriorRegime::Uniform;
    set.uniform = run_experiment(cfg);
    cfg.prior_regime = PriorRegime::Approximate;
    set.approximate = run_experiment(cfg);
    cfg.prior_regime = PriorRegime::Exact;
    set.exact = run_experiment(cfg);
    set.seconds = seconds_since(start);
    return set;
}

void criterion_portfolio_beats_single(const ExperimentSet& set) {
    auto best_margin = [](const ExperimentResult& res) {
        double best = -1e9;
        double at_q = 0.0;
        for (const auto& agg : res.per_q) {
            if (agg.diff_vs_single_se <= 0.0) continue;
            const double margin = agg.diff_vs_single_mean / agg.diff_vs_single_se;
            if (margin > best) {
                best = margin;
                at_q = agg.q;
            }
        }
        return std::pair<double, double>{best, at_q};
    };
    const auto [uni_margin, uni_q] = best_margin(set.uniform);
    const auto [apr_margin, apr_q] = best_margin(set.approximate);
    const bool ok = uni_margin > 2.0 && apr_margin > 2.0;
    report(6, "some q beats the single winner by > 2 SE under uniform and approximate priors", ok,
           "uniform: " + fmt(uni_margin) + " SE at q=" + fmt(uni_q) + "; approximate: " +
               fmt(apr_margin) + " SE at q=" + fmt(apr_q) + "; " + fmt(set.seconds) + "s total");
}

void criterion_estimate_convergence(const ExperimentSet& set) {
    bool ok = true;
    std::string detail;
    for (const auto* res : {&set.uniform, &set.approximate, &set.exact}) {
        const QAggregate& top = res->per_q.back();
        const double gap = std::fabs(top.est_frac_mean / res->single_winner_est_frac_mean - 1.0);
        if (!(top.q == 20000.0) || gap > 0.02) ok = false;
        detail += to_string(res->config.prior_regime) + std::string(": ") + fmt(100.0 * gap) + "% ";
    }
    report(7, "portfolio estimated revenue within 2% of the single winner at q=20000", ok, detail);
}

void criterion_sellers_curse(const ExperimentSet& set) {
    double uniform_top = 0.0;
    for (const auto& agg : set.uniform.per_q) uniform_top = std::max(uniform_top, agg.est_frac_mean);
    const bool uniform_exceeds = uniform_top > 1.0;

    bool exact_bounded = true;
    double exact_worst = 0.0;
    for (const auto& agg : set.exact.per_q) {
        const double slack = agg.est_frac_mean - (1.0 + 3.0 * agg.est_frac_se);
        exact_worst = std::max(exact_worst, agg.est_frac_mean);
        if (slack > 0.0) exact_bounded = false;
    }
    report(8, "estimates overshoot ideal under the uniform prior but not under the exact prior",
           uniform_exceeds && exact_bounded,
           "uniform max est/ideal " + fmt(uniform_top) + "; exact max " + fmt(exact_worst));
}

// --- criterion 9: CLI determinism ---------------------------------------------

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_cli_determinism(const std::string& cli, const std::string& data, const fs::path& out,
                               double experiment_seconds) {
    const auto start = std::chrono::steady_clock::now();
    const std::string config = data + "/defaults/experiment.json";
    const fs::path run_a = out / "det_a", run_b = out / "det_b", run_c = out / "det_c";
    const std::string base = " simulate --config " + config + " --trials 200 --seed 777";
    bool ok = true;
    std::string detail;
    if (run_cli(cli, "--quiet --out " + run_a.string() + base + " --parallel 1") != 0 ||
        run_cli(cli, "--quiet --out " + run_b.string() + base + " --parallel 1") != 0 ||
        run_cli(cli, "--quiet --out " + run_c.string() + base + " --parallel 8") != 0) {
        ok = false;
        detail = "CLI run failed";
    } else {
        const std::string a = slurp(run_a / "simulate.csv");
        const std::string b = slurp(run_b / "simulate.csv");
        const std::string c = slurp(run_c / "simulate.csv");
        if (a.empty() || a != b) {
            ok = false;
            detail = "repeat run differs";
        } else if (a != c) {
            ok = false;
            detail = "--parallel 8 differs from --parallel 1";
        } else {
            detail = "3 runs byte-identical (" + std::to_string(a.size()) + " bytes)";
        }
    }
    const double elapsed = seconds_since(start);
    if (experiment_seconds > 0.0 && elapsed >= 2.0 * experiment_seconds) ok = false;
    report(9, "fixed-seed CSV byte-identical across runs and parallelism", ok,
           detail + ", " + fmt(elapsed) + "s (limit 2x criterion 6 = " + fmt(2.0 * experiment_seconds) +
               "s)");
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli, data, out = "acceptance_out";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--cli") cli = argv[i + 1];
        else if (flag == "--data") data = argv[i + 1];
        else if (flag == "--out") out = argv[i + 1];
    }
    if (cli.empty() || data.empty()) {
        std::cerr << "usage: acceptance --cli <adfolio> --data <data-dir> [--out <dir>]\n";
        return 2;
    }
    fs::create_directories(out);

    criterion_variance_identity();
    criterion_qp_optimality();
    criterion_posterior_agreement();
    criterion_uncertainty_share();
    criterion_diversification();

    const ExperimentSet set = run_experiments(1000, 20260808);
    criterion_portfolio_beats_single(set);
    criterion_estimate_convergence(set);
    criterion_sellers_curse(set);
    criterion_cli_determinism(cli, data, fs::path(out), set.seconds);

    if (g_failures == 0) {
        std::cout << "all acceptance criteria passed" << std::endl;
        return 0;
    }
    std::cout << g_failures << " acceptance criteria failed" << std::endl;
    return 1;
}
