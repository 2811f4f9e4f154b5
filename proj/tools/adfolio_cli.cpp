// adfolio — portfolio allocation of ad calls across pay-per-response ads.
//
// Subcommands:
//   allocate  solve one market for a q weighting or a variance bound d
//   simulate  run the learning/allocation experiment and emit revenue curves
//   variance  single-ad uncertainty/randomness decomposition
//   frontier  sweep q and emit the estimated revenue/variance frontier
//
// Exit codes: 0 ok, 1 bad input/config, 2 infeasible variance bound,
// 3 solver failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adfolio/adfolio.hpp"

namespace fs = std::filesystem;
using namespace adfolio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolverFailure = 3;

struct CommonOptions {
    std::string out_dir = ".";
    int parallel = 1;
    bool quiet = false;
    std::uint64_t seed = 1;
};

std::ofstream open_output(const CommonOptions& common, const std::string& name,
                          RunManifest& manifest) {
    fs::create_directories(common.out_dir);
    const std::string path = (fs::path(common.out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path);
    manifest.outputs.push_back(path);
    return out;
}

void finish_manifest(const CommonOptions& common, const std::string& name, RunManifest& manifest) {
    manifest.finished_utc = utc_timestamp();
    const std::string path = (fs::path(common.out_dir) / name).string();
    write_manifest(path, manifest);
}

Vec parse_q_list(const std::string& text) {
    Vec qs;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        const double q = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument("bad q value '" + item + "'");
        qs.push_back(q);
    }
    if (qs.empty()) throw std::invalid_argument("empty q list");
    return qs;
}

int cmd_allocate(const CommonOptions& common, const std::string& market_path,
                 std::optional<double> q, std::optional<double> d) {
    if (q.has_value() == d.has_value())
        throw std::invalid_argument("allocate: pass exactly one of --q or --d");

    RunManifest manifest;
    manifest.command = "allocate";
    manifest.seed = common.seed;
    manifest.started_utc = utc_timestamp();

    const MarketProblem market = load_market(market_path);
    const AllocationProblem problem = build_problem(market);
    validate(problem);
    manifest.config = {{"market_file", market_path}, {"market", market_to_json(market)}};

    Allocation alloc;
    double used_q = 0.0;
    if (q) {
        manifest.config["q"] = *q;
        const QmapSolution sol = solve_qmap(problem, *q);
        if (!sol.converged) {
            std::cerr << "allocate: solver did not converge at q=" << *q << "\n";
            return kExitSolverFailure;
        }
        alloc.weights = sol.weights;
        used_q = *q;
    } else {
        manifest.config["d"] = *d;
        const MapSolution sol = solve_map(problem, *d);
        if (sol.status == MapStatus::Infeasible) {
            std::cerr << "allocate: variance bound d=" << *d
                      << " is below the minimum attainable variance\n";
            return kExitInfeasible;
        }
        if (sol.status == MapStatus::SolverFailure) {
            std::cerr << "allocate: solver failed while searching the frontier\n";
            return kExitSolverFailure;
        }
        alloc.weights = sol.weights;
        used_q = sol.q;
    }
    alloc.counts = round_allocation(alloc.weights, market.m);

    const double revenue = expected_revenue(problem, alloc);
    const VarianceBreakdown var = allocation_variance(problem, alloc);

    auto csv = open_output(common, "allocation.csv", manifest);
    write_allocation_csv(csv, market, problem, alloc);
    csv.close();

    if (!common.quiet) {
        std::cout << "ads: " << market.ads.size() << "  m: " << market.m << "  q: " << fmt12(used_q)
                  << "\n";
        std::cout << "id\tbid\tweight\tcount\n";
        for (std::size_t i = 0; i < market.ads.size(); ++i)
            std::cout << market.ads[i].id << '\t' << fmt12(market.ads[i].bid) << '\t'
                      << fmt12(alloc.weights[i]) << '\t' << alloc.counts[i] << "\n";
        std::cout << "expected revenue: " << fmt12(revenue) << "\n";
        std::cout << "variance: uncertainty " << fmt12(var.uncertainty) << " + randomness "
                  << fmt12(var.randomness) << " = " << fmt12(var.total) << "\n";
    }
    finish_manifest(common, "allocation_manifest.json", manifest);
    return kExitOk;
}

int cmd_simulate(const CommonOptions& common, const std::string& config_path,
                 std::optional<int> trials, std::optional<std::string> regime,
                 std::optional<std::uint64_t> seed) {
    RunManifest manifest;
    manifest.command = "simulate";
    manifest.started_utc = utc_timestamp();

    ExperimentConfig cfg = load_experiment_config(config_path);
    if (trials) cfg.trials = *trials;
    if (regime) cfg.prior_regime = regime_from_string(*regime);
    if (seed) cfg.master_seed = *seed;
    validate_experiment(cfg);
    manifest.seed = cfg.master_seed;
    manifest.config = experiment_to_json(cfg);
    manifest.config["config_file"] = config_path;
    manifest.config["parallel"] = common.parallel;
    manifest.config["aggregation"] = "mean of per-trial fractions of ideal; pooled ratio-of-means in extra columns";

    const ExperimentResult result = run_experiment(cfg, common.parallel);

    auto csv = open_output(common, "simulate.csv", manifest);
    write_experiment_csv(csv, result);
    csv.close();

    if (!common.quiet) {
        std::cout << "regime: " << to_string(cfg.prior_regime) << "  trials: " << result.trials_used
                  << " (failed " << result.failed_trials << ")\n";
        std::cout << "single winner actual/ideal: " << fmt12(result.single_winner_actual_frac_mean)
                  << "\n";
        const QAggregate& last = result.per_q.back();
        std::cout << "q=" << fmt12(last.q) << ": est/ideal " << fmt12(last.est_frac_mean)
                  << ", actual/ideal " << fmt12(last.actual_frac_mean) << "\n";
    }
    finish_manifest(common, "simulate_manifest.json", manifest);
    return kExitOk;
}

int cmd_variance(const CommonOptions& common, const std::string& form_name, long long k, double bid,
                 double p, double sigma, double c_comp, long long v) {
    (void)common;
    ApproxForm form;
    if (form_name == "raw") form = ApproxForm::Raw;
    else if (form_name == "competitive") form = ApproxForm::Competitive;
    else if (form_name == "learning") form = ApproxForm::Learning;
    else throw std::invalid_argument("--form must be raw, competitive or learning");

    SingleAdInputs in;
    in.k = k;
    in.bid = bid;
    in.p = p;
    in.sigma = sigma;
    in.c_comp = c_comp;
    in.v = v;
    const VarianceBreakdown out = single_ad_variance_approx(in, form);

    std::cout << "uncertainty: " << fmt12(out.uncertainty) << "\n";
    std::cout << "randomness:  " << fmt12(out.randomness) << "\n";
    std::cout << "total:       " << fmt12(out.total) << "\n";
    if (out.total > 0.0)
        std::cout << "uncertainty share: " << fmt12(out.uncertainty / out.total) << "\n";
    if (form == ApproxForm::Learning)
        std::cout << "k:v ratio: " << fmt12(uncertainty_randomness_ratio(k, v)) << "\n";
    return kExitOk;
}

int cmd_frontier(const CommonOptions& common, const std::string& market_path,
                 std::optional<std::string> q_list) {
    RunManifest manifest;
    manifest.command = "frontier";
    manifest.seed = common.seed;
    manifest.started_utc = utc_timestamp();

    const MarketProblem market = load_market(market_path);
    const AllocationProblem problem = build_problem(market);
    validate(problem);
    Vec q_grid = q_list ? parse_q_list(*q_list) : default_q_grid();
    manifest.config = {{"market_file", market_path}, {"q_grid", q_grid}};

    const std::vector<FrontierPoint> points = trace_frontier(problem, q_grid);
    for (const auto& pt : points)
        if (!pt.converged) {
            std::cerr << "frontier: solver did not converge at q=" << pt.q << "\n";
            return kExitSolverFailure;
        }
    // Revenue should not decrease along q; warn if the solve noise exceeds a
    // generous slack.
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double slack = 1e-8 * (1.0 + std::fabs(points[i].est_revenue));
        if (points[i].est_revenue < points[i - 1].est_revenue - slack)
            std::cerr << "frontier: warning: est_revenue not monotone between q=" << points[i - 1].q
                      << " and q=" << points[i].q << "\n";
    }

    auto csv = open_output(common, "frontier.csv", manifest);
    write_frontier_csv(csv, points);
    csv.close();

    if (!common.quiet)
        std::cout << "frontier: " << points.size() << " points, revenue " << fmt12(points.front().est_revenue)
                  << " .. " << fmt12(points.back().est_revenue) << "\n";
    finish_manifest(common, "frontier_manifest.json", manifest);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adfolio - mean-variance portfolio allocation for ad calls"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    CommonOptions common;
    std::optional<std::uint64_t> seed_opt;
    app.add_option("--seed", seed_opt, "Master random seed")->envname("ADFOLIO_SEED");
    app.add_option("--out", common.out_dir, "Output directory (created if missing)");
    app.add_option("--parallel", common.parallel, "Worker threads for simulation trials")
        ->check(CLI::PositiveNumber);
    app.add_flag("--quiet", common.quiet, "Suppress the human-readable report");

    auto* alloc_cmd = app.add_subcommand("allocate", "Solve one market allocation");
    std::string market_path;
    std::optional<double> q_opt, d_opt;
    alloc_cmd->add_option("--market", market_path, "Market JSON file")->required();
    alloc_cmd->add_option("--q", q_opt, "Revenue weighting q >= 0");
    alloc_cmd->add_option("--d", d_opt, "Variance bound d (m-scale, money^2)");

    auto* sim_cmd = app.add_subcommand("simulate", "Run the allocation experiment");
    std::string config_path;
    std::optional<int> trials_opt;
    std::optional<std::string> regime_opt;
    sim_cmd->add_option("--config", config_path, "Experiment JSON file")->required();
    sim_cmd->add_option("--trials", trials_opt, "Override trial count");
    sim_cmd->add_option("--regime", regime_opt, "Override prior regime: uniform|approximate|exact");

    auto* var_cmd = app.add_subcommand("variance", "Single-ad variance decomposition");
    std::string form_name;
    long long k = 0, v = 0;
    double bid = 0.0, p = 0.0, sigma = 0.0, c_comp = 0.0;
    var_cmd->add_option("--form", form_name, "raw|competitive|learning")->required();
    var_cmd->add_option("--k", k, "Ad calls allocated to the ad")->required();
    var_cmd->add_option("--bid", bid, "Bid per response (raw form)");
    var_cmd->add_option("--p", p, "True response rate");
    var_cmd->add_option("--sigma", sigma, "Estimate-error sd (raw/competitive forms)");
    var_cmd->add_option("--c", c_comp, "Competitive expected revenue per call");
    var_cmd->add_option("--v", v, "Learning ad calls (learning form)");

    auto* front_cmd = app.add_subcommand("frontier", "Sweep q and emit the frontier");
    std::string front_market;
    std::optional<std::string> q_list;
    front_cmd->add_option("--market", front_market, "Market JSON file")->required();
    front_cmd->add_option("--q-grid", q_list, "Comma-separated q values (default: standard sweep)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    if (seed_opt) common.seed = *seed_opt;
    try {
        if (alloc_cmd->parsed()) return cmd_allocate(common, market_path, q_opt, d_opt);
        if (sim_cmd->parsed()) return cmd_simulate(common, config_path, trials_opt, regime_opt, seed_opt);
        if (var_cmd->parsed()) return cmd_variance(common, form_name, k, bid, p, sigma, c_comp, v);
        if (front_cmd->parsed()) return cmd_frontier(common, front_market, q_list);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return kExitBadInput;
}
