#pragma once

#include "cfx/ensemble.hpp"
#include "cfx/milp/instance.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfx {

enum class Norm { L0, L1, L2, Piecewise };

std::string_view to_string(Norm n);
std::optional<Norm> parse_norm(std::string_view s);

/// Convex piecewise-linear cost of the final value, given by breakpoints
/// (x, cost) with x running from 0 to 1.
struct PiecewiseCost {
    std::vector<double> x;
    std::vector<double> cost;

    double operator()(double v) const;
};

struct ObjectiveSpec {
    Norm norm = Norm::L1;
    /// Per feature; only read for Norm::Piecewise. Features without an entry
    /// fall back to the asymmetric l1 cost.
    std::vector<std::optional<PiecewiseCost>> piecewise;
};

/// sum_i coef_i (x_i - origin_i)  sense  rhs, over numerical, binary, ordinal
/// and discrete features.
struct LinearConstraint {
    std::string name;
    std::vector<std::pair<int, double>> coeffs;
    milp::Sense sense = milp::Sense::LessEqual;
    double rhs = 0.0;
};

/// "feature takes one of `values`": 0/1 for binary, category index for
/// categorical, level index for ordinal/discrete.
struct Literal {
    int feature = 0;
    std::vector<int> values;
};

/// if -> then, compiled to ind(then) - ind(if) >= 0.
struct Implication {
    Literal if_;
    Literal then_;
};

/// Raw row over formulation columns named by their registry symbols.
struct ResourceConstraint {
    std::string name;
    std::vector<std::pair<std::string, double>> terms;
    milp::Sense sense = milp::Sense::LessEqual;
    double rhs = 0.0;
};

struct WeightOverride {
    int feature = 0;
    std::optional<double> cost_down, cost_up, cost_true, cost_false;
    std::optional<std::vector<double>> category_costs;
};

struct Query {
    Point origin;
    int target_class = 0;
    ObjectiveSpec objective;
    bool use_plausibility = false;
    std::optional<double> vote_margin;
    std::optional<double> epsilon;
    /// Replaces the declared actionability, indexed by feature.
    std::vector<std::pair<int, Actionability>> actionability_overrides;
    std::vector<WeightOverride> weight_overrides;
    std::vector<LinearConstraint> linear_constraints;
    std::vector<Implication> implications;
    std::vector<ResourceConstraint> resource_constraints;
};

Query parse_query(std::string_view text, const Model& model);
Query load_query(const std::string& file, const Model& model);
/// Query document with origin, target, norm, plausibility and the optional
/// margin/epsilon; other fields are not written.
std::string serialize_query(const Query& q, const Model& model);

/// Split levels (plus origin and piecewise breakpoints where the objective
/// needs them) of one numerical feature. Level j in 1..k is levels[j-1];
/// level 0 is 0 and level k+1 is 1.
struct NumericGrid {
    std::vector<double> levels;
    std::vector<char> is_split;
    /// j with level j == origin, in [0, k+1]; -1 when the origin is not a
    /// level.
    int origin_level = -1;

    int k() const { return static_cast<int>(levels.size()); }
    double at(int j) const;
    double gap(int j) const { return at(j + 1) - at(j); }
    /// Level index of a split threshold (exact match), or -1.
    int level_of(double threshold) const;
};

/// Everything the builders and the oracle derive from (model, query).
struct ResolvedQuery {
    Query query;
    FeatureSpace features;  // with overrides applied
    std::vector<NumericGrid> grids;  // numerical features only; empty otherwise
    double epsilon = 1e-4;
    double eta = 1e-6;
    bool plausibility = false;
    int origin_class = 0;
    std::vector<std::string> warnings;
};

/// Applies overrides, builds grids and defaults ε = min(1e-4, g_min/10) and
/// η = 1e-6 * sum of tree weights. Throws std::invalid_argument on
/// inconsistent queries.
ResolvedQuery resolve_query(const Model& model, const Query& query);

/// Canonical μ encoding of a numerical value: μ^j in [0,1] for j = 0..k.
std::vector<double> encode_numeric(const NumericGrid& g, double x);
/// x = sum_j gap(j) μ^j.
double decode_numeric(const NumericGrid& g, std::span<const double> mu);

/// Closed-form cost of moving feature i from origin to value under the
/// resolved objective. For l0, a numerical feature counts as changed when
/// |x - origin| exceeds `l0_threshold(i)`.
double feature_cost(const ResolvedQuery& rq, int i, double value);
double l0_threshold(const ResolvedQuery& rq, int i);

}  // namespace cfx
