#pragma once

#include "cfx/explain.hpp"

#include <cstdint>
#include <vector>

namespace cfx {

struct OracleConfig {
    std::uint64_t cell_cap = 10'000'000;
    /// 0: CFX_THREADS or the OpenMP default.
    int threads = 1;
};

/// Product grid over split intervals of numerical features, binary values,
/// categories and ordinal levels. Cell k is the k-th tuple in lexicographic
/// order (first feature most significant).
class CellSpace {
public:
    /// Throws std::invalid_argument when the model or query is outside what
    /// the oracle handles (oblique splits, implications, resource rows,
    /// linear rows over two or more numerical features) or the cell count
    /// exceeds `cap`.
    CellSpace(const Model& model, const ResolvedQuery& rq, std::uint64_t cap = 10'000'000);

    std::uint64_t size() const { return size_; }
    /// Per feature: number of split intervals, 2, or the category/level count.
    const std::vector<std::uint64_t>& dims() const { return dims_; }

    struct Cell {
        std::vector<int> index;
        Point representative;
        std::vector<int> leaves;      // classifier trees
        std::vector<int> iso_leaves;  // isolation trees, when plausibility is on
        int cls = 0;
    };
    Cell cell(std::uint64_t k) const;

    /// Cheapest point of cell k that meets the target, margin, actionability,
    /// linear rows and plausibility; nullopt if none.
    struct Candidate {
        double cost = 0.0;
        Point x;
    };
    std::optional<Candidate> evaluate(std::uint64_t k) const;

private:
    const Model& model_;
    const ResolvedQuery& rq_;
    std::vector<std::vector<double>> split_levels_;  // numerical features
    std::vector<std::uint64_t> dims_;
    std::uint64_t size_ = 1;
};

/// Closed-form cell count: prod (k_i + 1) * 2^{#binary} * prod K_i.
std::uint64_t count_cells(const Model& model, const ResolvedQuery& rq);

/// Minimum over cells of the projected cost; ties by lowest cell index.
Explanation brute_force_explain(const Model& model, const Query& query, const OracleConfig& cfg = {});
Explanation brute_force_explain_serial(const Model& model, const Query& query, const OracleConfig& cfg = {});

}  // namespace cfx
