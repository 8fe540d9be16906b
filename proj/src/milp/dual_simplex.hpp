#pragma once

#include "basis_factor.hpp"
#include "cfx/milp/instance.hpp"

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cfx::milp::detail {

/// Bounded LP in the form  min c'x  s.t.  A x - s = 0,  l <= (x, s) <= u.
/// Slack j = n + i carries row i; its bounds are the row bounds clamped to
/// the activity range implied by the root column bounds, so every variable is
/// boxed and any basis can be made dual feasible by moving nonbasics to the
/// right bound.
struct LpProblem {
    int n = 0;
    int m = 0;
    CscMatrix matrix;  // m x (n + m), slack columns appended as -e_i
    std::vector<double> cost, lower, upper;
    double offset = 0.0;
};

/// Requires a linear instance (quadratics already expanded).
LpProblem make_lp(const Instance& inst);

struct Basis {
    std::vector<int> head;             // size m
    std::vector<unsigned char> upper;  // size n + m; nonbasic at upper bound
    std::vector<double> weights;       // dual steepest-edge weights, size m
};

enum class LpStatus { Optimal, Infeasible, Cutoff, IterationLimit };

class DualSimplex {
public:
    explicit DualSimplex(const LpProblem& lp);

    /// `lower`/`upper` override bounds of the n structural columns.
    LpStatus solve(std::span<const double> lower, std::span<const double> upper, const Basis* warm,
                   double cutoff, long iteration_limit);

    /// Objective including the problem offset.
    double objective() const { return objective_; }
    /// Values of all n + m variables after the last solve.
    std::span<const double> values() const { return x_; }
    long iterations() const { return iterations_; }
    /// Solves past this point stop with IterationLimit.
    void set_deadline(std::chrono::steady_clock::time_point t) { deadline_ = t; }
    Basis basis() const;

private:
    bool refactor();
    void compute_primal();
    void compute_duals();
    void fix_dual_infeasibilities();
    void perturb_costs();
    int price() const;
    double column_dot(int j, std::span<const double> rowvec) const;
    void add_column(int j, double scale, std::vector<double>& out) const;
    double current_objective() const;

    const LpProblem& lp_;
    int n_ = 0, m_ = 0, total_ = 0;
    std::vector<double> lo_, up_, x_, d_;
    std::vector<double> cost_;  // working costs, perturbed until the first optimum
    bool perturbed_ = false;
    double pert_shift_ = 0.0;  // max over the box of (cost_ - cost)'x
    std::vector<int> head_, pos_;  // pos_[j] = basis position or -1
    std::vector<unsigned char> at_upper_;
    std::vector<double> weights_;
    BasisFactor factor_;
    long iterations_ = 0;
    std::chrono::steady_clock::time_point deadline_ = std::chrono::steady_clock::time_point::max();
    double objective_ = 0.0;

    // scratch
    std::vector<double> rho_, alpha_row_, alpha_col_, tau_, work_;
};

}  // namespace cfx::milp::detail
