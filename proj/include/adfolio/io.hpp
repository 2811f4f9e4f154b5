#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adfolio/qp.hpp"
#include "adfolio/simulator.hpp"
#include "adfolio/types.hpp"
#include "adfolio/version.hpp"

namespace adfolio {

using nlohmann::json;

/// Numeric CSV fields carry 12 significant digits.
inline std::string fmt12(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

inline json prior_to_json(const PriorSpec& prior) {
    switch (prior.kind()) {
        case PriorSpec::Kind::Uniform01:
            return {{"type", "uniform01"}};
        case PriorSpec::Kind::TruncatedUniform:
            return {{"type", "truncated_uniform"}, {"lo", prior.lo()}, {"hi", prior.hi()}};
        case PriorSpec::Kind::TruncatedGaussian:
            return {{"type", "truncated_gaussian"}, {"mu", prior.mu()}, {"sigma", prior.sigma()}};
    }
    throw std::logic_error("prior_to_json: unknown prior kind");
}

inline PriorSpec prior_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform01") return PriorSpec::uniform01();
    if (type == "truncated_uniform")
        return PriorSpec::truncated_uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (type == "truncated_gaussian")
        return PriorSpec::truncated_gaussian(j.at("mu").get<double>(), j.at("sigma").get<double>());
    throw std::invalid_argument("prior: unknown type '" + type + "'");
}

inline PriceType price_type_from_string(const std::string& s) {
    if (s == "CPC") return PriceType::CPC;
    if (s == "CPA") return PriceType::CPA;
    throw std::invalid_argument("price_type must be CPC or CPA, got '" + s + "'");
}

inline json market_to_json(const MarketProblem& market) {
    json ads = json::array();
    for (const auto& ad : market.ads)
        ads.push_back({{"id", ad.id}, {"bid", ad.bid}, {"price_type", to_string(ad.price_type)}});
    json posteriors = json::array();
    for (const auto& p : market.posteriors)
        posteriors.push_back(
            {{"s_mean", p.s_mean}, {"s_var", p.s_var}, {"e_s_one_minus_s", p.e_s_one_minus_s}});
    json out = {{"m", market.m}, {"ads", ads}, {"posteriors", posteriors}};
    if (market.covariance) out["covariance"] = *market.covariance;
    return out;
}

inline MarketProblem market_from_json(const json& j) {
    MarketProblem market;
    market.m = j.at("m").get<long long>();
    for (const auto& ad : j.at("ads"))
        market.ads.push_back({ad.at("id").get<std::string>(), ad.at("bid").get<double>(),
                              price_type_from_string(ad.at("price_type").get<std::string>())});
    for (const auto& p : j.at("posteriors"))
        market.posteriors.push_back({p.at("s_mean").get<double>(), p.at("s_var").get<double>(),
                                     p.at("e_s_one_minus_s").get<double>()});
    if (j.contains("covariance")) market.covariance = j.at("covariance").get<Mat>();
    return validate_market(std::move(market));
}

inline PriorRegime regime_from_string(const std::string& s) {
    if (s == "uniform") return PriorRegime::Uniform;
    if (s == "approximate") return PriorRegime::Approximate;
    if (s == "exact") return PriorRegime::Exact;
    throw std::invalid_argument("prior_regime must be uniform, approximate or exact, got '" + s + "'");
}

inline json experiment_to_json(const ExperimentConfig& cfg) {
    return {{"n_cpc", cfg.n_cpc},
            {"n_cpa", cfg.n_cpa},
            {"cpc_bid", cfg.cpc_bid},
            {"cpa_bid", cfg.cpa_bid},
            {"cpc_prior", prior_to_json(cfg.cpc_prior)},
            {"cpa_prior", prior_to_json(cfg.cpa_prior)},
            {"learning_calls", cfg.learning_calls},
            {"m", cfg.m},
            {"prior_regime", to_string(cfg.prior_regime)},
            {"q_grid", cfg.q_grid},
            {"trials", cfg.trials},
            {"master_seed", cfg.master_seed}};
}

/// Missing fields keep their defaults; unknown fields are rejected so typos
/// do not silently run a different experiment.
inline ExperimentConfig experiment_from_json(const json& j) {
    static const std::vector<std::string> known = {
        "n_cpc", "n_cpa", "cpc_bid", "cpa_bid", "cpc_prior", "cpa_prior", "learning_calls",
        "m",     "prior_regime", "q_grid", "trials", "master_seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw std::invalid_argument("experiment config: unknown field '" + key + "'");
    }
    ExperimentConfig cfg;
    if (j.contains("n_cpc")) cfg.n_cpc = j.at("n_cpc").get<int>();
    if (j.contains("n_cpa")) cfg.n_cpa = j.at("n_cpa").get<int>();
    if (j.contains("cpc_bid")) cfg.cpc_bid = j.at("cpc_bid").get<double>();
    if (j.contains("cpa_bid")) cfg.cpa_bid = j.at("cpa_bid").get<double>();
    if (j.contains("cpc_prior")) cfg.cpc_prior = prior_from_json(j.at("cpc_prior"));
    if (j.contains("cpa_prior")) cfg.cpa_prior = prior_from_json(j.at("cpa_prior"));
    if (j.contains("learning_calls")) cfg.learning_calls = j.at("learning_calls").get<long long>();
    if (j.contains("m")) cfg.m = j.at("m").get<long long>();
    if (j.contains("prior_regime"))
        cfg.prior_regime = regime_from_string(j.at("prior_regime").get<std::string>());
    if (j.contains("q_grid")) cfg.q_grid = j.at("q_grid").get<Vec>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    validate_experiment(cfg);
    return cfg;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("parse error in " + path + ": " + e.what());
    }
    return j;
}

inline MarketProblem load_market(const std::string& path) {
    try {
        return market_from_json(load_json_file(path));
    } catch (const json::exception& e) {
        throw std::invalid_argument("bad market file " + path + ": " + e.what());
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    try {
        return experiment_from_json(load_json_file(path));
    } catch (const json::exception& e) {
        throw std::invalid_argument("bad experiment config " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_frontier_csv(std::ostream& out, const std::vector<FrontierPoint>& points) {
    const std::size_t n = points.empty() ? 0 : points.front().weights.size();
    out << "q,est_revenue,est_variance";
    for (std::size_t i = 0; i < n; ++i) out << ",w_" << i;
    out << "\n";
    for (const auto& pt : points) {
        out << fmt12(pt.q) << ',' << fmt12(pt.est_revenue) << ',' << fmt12(pt.est_variance);
        for (const double w : pt.weights) out << ',' << fmt12(w);
        out << "\n";
    }
}

/// Headline columns first (per-trial fraction-of-ideal means), then the
/// pooled normalization and spread diagnostics.
inline void write_experiment_csv(std::ostream& out, const ExperimentResult& result) {
    out << "q,est_rev_frac,portfolio_actual_frac,single_winner_actual_frac,trials"
        << ",est_rev_frac_pooled,portfolio_actual_frac_pooled,single_winner_actual_frac_pooled"
        << ",portfolio_actual_frac_se,diff_vs_single_mean,diff_vs_single_se,single_winner_est_frac\n";
    for (const auto& agg : result.per_q) {
        out << fmt12(agg.q) << ',' << fmt12(agg.est_frac_mean) << ',' << fmt12(agg.actual_frac_mean)
            << ',' << fmt12(result.single_winner_actual_frac_mean) << ',' << result.trials_used << ','
            << fmt12(agg.est_frac_pooled) << ',' << fmt12(agg.actual_frac_pooled) << ','
            << fmt12(result.single_winner_actual_frac_pooled) << ',' << fmt12(agg.actual_frac_se) << ','
            << fmt12(agg.diff_vs_single_mean) << ',' << fmt12(agg.diff_vs_single_se) << ','
            << fmt12(result.single_winner_est_frac_mean) << "\n";
    }
}

inline void write_allocation_csv(std::ostream& out, const MarketProblem& market,
                                 const AllocationProblem& problem, const Allocation& alloc) {
    out << "ad_id,bid,price_type,weight,count,expected_revenue\n";
    for (std::size_t i = 0; i < market.ads.size(); ++i) {
        out << market.ads[i].id << ',' << fmt12(market.ads[i].bid) << ','
            << to_string(market.ads[i].price_type) << ',' << fmt12(alloc.weights[i]) << ','
            << alloc.counts[i] << ','
            << fmt12(problem.c_vector[i] * static_cast<double>(alloc.counts[i])) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Reproducibility record emitted alongside every command's outputs.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    json config;
    std::vector<std::string> outputs;
    std::string started_utc;
    std::string finished_utc;
};

inline void write_manifest(const std::string& path, const RunManifest& manifest) {
    json j = {{"tool", "adfolio"},
              {"version", kVersion},
              {"command", manifest.command},
              {"seed", manifest.seed},
              {"config", manifest.config},
              {"outputs", manifest.outputs},
              {"started_utc", manifest.started_utc},
              {"finished_utc", manifest.finished_utc}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace adfolio
