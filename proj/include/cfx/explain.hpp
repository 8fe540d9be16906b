#pragma once

#include "cfx/formulation.hpp"
#include "cfx/milp/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cfx {

struct FeatureDelta {
    int feature = 0;
    double from = 0.0;
    double to = 0.0;
    double cost = 0.0;
};

struct Certification {
    int predicted_class = -1;
    /// z_target - max over other classes of z_c at the counterfactual.
    double margin = 0.0;
    double vote_margin = 0.0;
    std::optional<double> isolation_depth;  // average depth, when plausibility is on
    bool routing_consistent = false;
    bool verified = false;
};

struct FormulationSummary {
    std::size_t columns = 0;
    std::size_t rows = 0;
    std::size_t nnz = 0;
    std::size_t n_vertices = 0;
    double epsilon = 0.0;
    double vote_margin = 0.0;
};

struct Explanation {
    milp::Status status = milp::Status::Infeasible;
    int target_class = 0;
    int origin_class = 0;
    Point origin;
    std::optional<Point> counterfactual;
    /// Closed-form cost of the counterfactual.
    double objective = 0.0;
    /// Features that moved or carry a cost; costs sum to `objective`.
    std::vector<FeatureDelta> deltas;
    Certification certification;
    bool plausibility = false;

    milp::SolveStats stats;
    double surrogate_objective = 0.0;
    int eta_retries = 0;
    FormulationSummary formulation;
    std::optional<std::uint64_t> cells_evaluated;  // oracle only
    std::vector<std::string> warnings;
};

struct ExplainOptions {
    milp::SolverConfig solver;
    /// Offer the encoded origin as a starting incumbent.
    bool warm_start = true;
    int max_eta_retries = 10;
};

/// Resolves, assembles and solves; re-verifies the decoded point and
/// doubles the vote margin on failed verification.
Explanation explain(const Model& model, const Query& query, const ExplainOptions& opts = {});

/// Closed-form objective and deltas of a counterfactual point.
void fill_costs(const ResolvedQuery& rq, const Point& x, Explanation& e);

/// Re-prediction, margin and isolation-depth checks of a point.
Certification certify(const Model& model, int target_class, double vote_margin, bool plausibility,
                      std::span<const double> x);

/// Each tree's y-selected leaf is the leaf x routes to.
bool routing_consistent(const Model& model, const Formulation& f, std::span<const double> values,
                        std::span<const double> x);

/// Explanation document. Wall time is only written with `with_timing`, so
/// repeated runs produce identical bytes.
std::string explanation_json(const Model& model, const Explanation& e, bool with_timing = false);

/// Re-checks an explanation document against the model: counterfactual
/// domain, re-predicted class, margin, plausibility depth and cost shares.
/// Returns one message per failed check.
std::vector<std::string> check_explanation(const Model& model, std::string_view document);

}  // namespace cfx
