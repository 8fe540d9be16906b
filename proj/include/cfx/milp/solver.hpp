#pragma once

#include "cfx/milp/instance.hpp"

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfx::milp {

enum class NodeOrder { BestBound, DepthFirst };

struct SolverConfig {
    double abs_gap = 1e-6;
    double int_tol = 1e-7;
    double time_limit = std::numeric_limits<double>::infinity();  // seconds
    long node_limit = std::numeric_limits<long>::max();
    /// 0: CFX_THREADS or the OpenMP default.
    int threads = 1;
    /// Nodes taken from the queue per round. Independent of `threads` so the
    /// search is the same for every worker count.
    int node_batch = 8;
    NodeOrder node_order = NodeOrder::BestBound;
    /// Segments per variable for the piecewise-linear quadratic surrogate.
    int pwl_segments = 16;
    bool root_dive = true;
};

enum class Status { Optimal, Infeasible, LimitReached };

std::string_view to_string(Status s);

struct SolveStats {
    long nodes = 0;
    long lp_iterations = 0;
    double wall_time = 0.0;
    double root_bound = 0.0;
    double best_bound = 0.0;
    double gap = 0.0;
    /// Upper bound on (surrogate objective - true quadratic objective) at any
    /// point; 0 for linear instances.
    double pwl_tolerance = 0.0;
};

struct Solution {
    Status status = Status::Infeasible;
    std::vector<double> values;
    /// Objective the search optimized (piecewise-linear surrogate for
    /// quadratic columns).
    double objective = std::numeric_limits<double>::infinity();
    /// Instance::evaluate(values), i.e. the true quadratic objective.
    double exact_objective = std::numeric_limits<double>::infinity();
    SolveStats stats;

    bool has_values() const { return !values.empty(); }
};

/// Thrown when the LP core cannot keep a usable basis factorization.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double pivot_ratio)
        : std::runtime_error(what + " (pivot ratio " + std::to_string(pivot_ratio) + ")"),
          pivot_ratio_(pivot_ratio) {}
    double pivot_ratio() const { return pivot_ratio_; }

private:
    double pivot_ratio_;
};

/// Replaces each q*x^2 on [l,u] by the secant interpolation over `segments`
/// equal pieces: x = l + sum_k d_k, d_k in [0,h]. The surrogate overestimates
/// by at most q*h^2/4; the sum of these bounds is written to `tolerance`.
Instance linearize_quadratic(const Instance& inst, int segments, double* tolerance = nullptr);

/// Surrogate objective of a point under linearize_quadratic.
double surrogate_objective(const Instance& inst, std::span<const double> x, int segments);

/// Branch-and-bound. `starts` are candidate incumbents (full assignments);
/// infeasible ones are ignored.
Solution solve(const Instance& inst, const SolverConfig& cfg = {},
               std::span<const std::vector<double>> starts = {});

/// Continuous relaxation, integrality dropped.
Solution lp_relax(const Instance& inst, const SolverConfig& cfg = {});

}  // namespace cfx::milp
