#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "adfolio/types.hpp"

namespace adfolio {

/// Projected-gradient settings. Step size is 1/L with L = 2 * (Gershgorin
/// bound on the largest eigenvalue of A) + safeguard, which makes every
/// iteration a descent step for the convex objective.
struct SolverConfig {
    long long max_iterations = 50'000;
    double tolerance = 1e-10;       // stop when the objective decrease falls below this (scaled)
    double step_safeguard = 1e-12;  // keeps the step finite when A ~ 0
};

inline void validate(const SolverConfig& cfg) {
    if (cfg.max_iterations < 1) throw std::invalid_argument("solver: max_iterations must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("solver: tolerance must be > 0");
    if (!(cfg.step_safeguard > 0.0)) throw std::invalid_argument("solver: step_safeguard must be > 0");
}

/// Exact Euclidean projection onto {x >= 0, sum x = total} by
/// sort-and-threshold.
inline Vec project_simplex(Vec v, double total = 1.0) {
    const std::size_t n = v.size();
    if (n == 0) throw std::invalid_argument("project_simplex: empty vector");
    if (!(total > 0.0)) throw std::invalid_argument("project_simplex: total must be > 0");
    Vec sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumulative = 0.0;
    double tau = (sorted[0] - total);  // overwritten below; n >= 1
    std::size_t support = 0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - total) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            tau = candidate;
            support = j + 1;
        }
    }
    (void)support;
    for (double& x : v) x = std::max(x - tau, 0.0);
    // Renormalize away the last few ulps so feasibility holds tightly.
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (sum > 0.0 && sum != total)
        for (double& x : v) x *= total / sum;
    return v;
}

struct QmapSolution {
    Vec weights;
    double objective = 0.0;
    long long iterations = 0;
    bool converged = false;
};

namespace detail {

inline double qmap_objective(const AllocationProblem& p, double q, const Vec& w) {
    const std::size_t n = w.size();
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += p.a_matrix[i][j] * w[j];
        quad += w[i] * row;
        lin += (p.b_vector[i] - q * p.c_vector[i]) * w[i];
    }
    return quad + lin;
}

inline double gershgorin_bound(const Mat& a) {
    double bound = 0.0;
    for (const auto& row : a) {
        double radius = 0.0;
        for (const double x : row) radius += std::fabs(x);
        bound = std::max(bound, radius);
    }
    return bound;
}

}  // namespace detail

/// Minimize w'Aw + b'w - q c'w over the unit simplex by projected gradient
/// descent. Deterministic: fixed step, fixed iteration order, no randomness.
inline QmapSolution solve_qmap(const AllocationProblem& problem, double q, const SolverConfig& cfg = {},
                               const Vec* warm_start = nullptr) {
    validate(cfg);
    if (!(q >= 0.0)) throw std::invalid_argument("solve_qmap: q must be >= 0");
    const std::size_t n = problem.a_matrix.size();
    if (n == 0) throw std::invalid_argument("solve_qmap: empty problem");

    Vec w;
    if (warm_start != nullptr) {
        if (warm_start->size() != n) throw std::invalid_argument("solve_qmap: warm start length mismatch");
        w = project_simplex(*warm_start);
    } else {
        w.assign(n, 1.0 / static_cast<double>(n));
    }

    const double lipschitz = 2.0 * detail::gershgorin_bound(problem.a_matrix) + cfg.step_safeguard;
    const double step = 1.0 / lipschitz;

    QmapSolution sol;
    double f = detail::qmap_objective(problem, q, w);
    Vec grad(n), next(n);
    for (long long iter = 1; iter <= cfg.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += problem.a_matrix[i][j] * w[j];
            grad[i] = 2.0 * row + problem.b_vector[i] - q * problem.c_vector[i];
        }
        for (std::size_t i = 0; i < n; ++i) next[i] = w[i] - step * grad[i];
        next = project_simplex(std::move(next));
        const double f_next = detail::qmap_objective(problem, q, next);
        sol.iterations = iter;
        if (f - f_next <= cfg.tolerance * (1.0 + std::fabs(f_next))) {
            if (f_next < f) {
                w.swap(next);
                f = f_next;
            }
            sol.converged = true;
            break;
        }
        w.swap(next);
        f = f_next;
    }
    sol.weights = std::move(w);
    sol.objective = f;
    return sol;
}

struct GridOracleResult {
    Vec weights;
    double objective = 0.0;
};

/// Best objective over all simplex grid points with spacing 1/resolution.
/// Combinatorial: only for n <= 4.
inline GridOracleResult qmap_grid_oracle(const AllocationProblem& problem, double q, long long resolution) {
    const std::size_t n = problem.a_matrix.size();
    if (n == 0 || n > 4) throw std::invalid_argument("qmap_grid_oracle: supports 1 <= n <= 4");
    if (resolution < 1) throw std::invalid_argument("qmap_grid_oracle: resolution must be >= 1");

    GridOracleResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<long long> ticks(n, 0);
    Vec w(n, 0.0);
    const double inv = 1.0 / static_cast<double>(resolution);

    // Depth-first walk over compositions of `resolution` into n parts.
    auto recurse = [&](auto&& self, std::size_t depth, long long remaining) -> void {
        if (depth == n - 1) {
            ticks[depth] = remaining;
            for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(ticks[i]) * inv;
            const double f = detail::qmap_objective(problem, q, w);
            if (f < best.objective) {
                best.objective = f;
                best.weights = w;
            }
            return;
        }
        for (long long t = 0; t <= remaining; ++t) {
            ticks[depth] = t;
            self(self, depth + 1, remaining - t);
        }
    };
    recurse(recurse, 0, resolution);
    return best;
}

/// Largest-remainder rounding of m * weights to integer counts summing to m;
/// remainder ties go to the lowest ad index.
inline std::vector<long long> round_allocation(const Vec& weights, long long m) {
    const std::size_t n = weights.size();
    if (n == 0) throw std::invalid_argument("round_allocation: empty weights");
    if (m < 0) throw std::invalid_argument("round_allocation: negative m");
    std::vector<long long> counts(n, 0);
    std::vector<std::pair<double, std::size_t>> remainder(n);
    long long assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target = static_cast<double>(m) * std::max(weights[i], 0.0);
        const double base = std::floor(target);
        counts[i] = static_cast<long long>(base);
        assigned += counts[i];
        remainder[i] = {target - base, i};
    }
    std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    long long leftover = m - assigned;
    while (leftover > 0) {
        for (const auto& [frac, idx] : remainder) {
            if (leftover == 0) break;
            ++counts[idx];
            --leftover;
        }
    }
    return counts;
}

struct FrontierPoint {
    double q = 0.0;
    Vec weights;
    double est_revenue = 0.0;   // m * c'w
    double est_variance = 0.0;  // m^2 * w'Aw + m * b'w
    bool converged = false;
};

namespace detail {

inline FrontierPoint frontier_point(const AllocationProblem& problem, double q, const QmapSolution& sol) {
    const std::size_t n = sol.weights.size();
    const double m = static_cast<double>(problem.m);
    FrontierPoint pt;
    pt.q = q;
    pt.weights = sol.weights;
    pt.converged = sol.converged;
    double quad = 0.0, lin_b = 0.0, lin_c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += problem.a_matrix[i][j] * sol.weights[j];
        quad += sol.weights[i] * row;
        lin_b += problem.b_vector[i] * sol.weights[i];
        lin_c += problem.c_vector[i] * sol.weights[i];
    }
    pt.est_revenue = m * lin_c;
    pt.est_variance = m * m * quad + m * lin_b;
    return pt;
}

}  // namespace detail

/// Solve the weighted problem at every q in the grid, warm-starting each
/// point from the previous solution (adjacent points are close).
inline std::vector<FrontierPoint> trace_frontier(const AllocationProblem& problem, const Vec& q_grid,
                                                 const SolverConfig& cfg = {}, bool warm_start = true) {
    if (q_grid.empty()) throw std::invalid_argument("trace_frontier: empty q grid");
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
        if (!(q_grid[i] >= 0.0)) throw std::invalid_argument("trace_frontier: q values must be >= 0");
        if (i > 0 && q_grid[i] < q_grid[i - 1])
            throw std::invalid_argument("trace_frontier: q grid must be sorted ascending");
    }
    std::vector<FrontierPoint> points;
    points.reserve(q_grid.size());
    Vec prev;
    for (const double q : q_grid) {
        const QmapSolution sol =
            solve_qmap(problem, q, cfg, (warm_start && !prev.empty()) ? &prev : nullptr);
        points.push_back(detail::frontier_point(problem, q, sol));
        prev = sol.weights;
    }
    return points;
}

enum class MapStatus { Ok, Infeasible, SolverFailure };

struct MapSolution {
    MapStatus status = MapStatus::SolverFailure;
    double q = 0.0;  // weighting at which the returned point was found
    Vec weights;
    double est_revenue = 0.0;
    double est_variance = 0.0;
};

/// Maximize revenue subject to the m-scale variance bound d, by bisection on
/// q over the weighted-problem frontier (revenue and variance are both
/// nondecreasing in q). Infeasible when even the q = 0 point violates d.
inline MapSolution solve_map(const AllocationProblem& problem, double d, const SolverConfig& cfg = {}) {
    if (!(d >= 0.0)) throw std::invalid_argument("solve_map: variance bound must be >= 0");
    MapSolution out;

    auto solve_at = [&](double q) -> std::pair<FrontierPoint, bool> {
        const QmapSolution sol = solve_qmap(problem, q, cfg);
        return {detail::frontier_point(problem, q, sol), sol.converged};
    };

    auto [base, base_ok] = solve_at(0.0);
    if (!base_ok) return out;  // SolverFailure
    if (base.est_variance > d) {
        out.status = MapStatus::Infeasible;
        return out;
    }
    FrontierPoint best = base;

    // Bracket: double q until the bound breaks or revenue maxes out.
    double lo = 0.0, hi = 1.0;
    bool bracketed = false;
    for (int i = 0; i < 48; ++i) {
        auto [pt, ok] = solve_at(hi);
        if (!ok) return out;
        if (pt.est_variance <= d) {
            best = pt;
            lo = hi;
            hi *= 2.0;
        } else {
            bracketed = true;
            break;
        }
    }
    if (bracketed) {
        for (int iter = 0; iter < 20; ++iter) {
            const double mid = 0.5 * (lo + hi);
            auto [pt, ok] = solve_at(mid);
            if (!ok) return out;
            if (pt.est_variance <= d) {
                best = pt;
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo <= 1e-6 * std::max(hi, 1.0)) break;
        }
    }
    out.status = MapStatus::Ok;
    out.q = best.q;
    out.weights = best.weights;
    out.est_revenue = best.est_revenue;
    out.est_variance = best.est_variance;
    return out;
}

}  // namespace adfolio
