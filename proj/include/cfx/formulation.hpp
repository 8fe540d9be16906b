#pragma once

#include "cfx/milp/instance.hpp"
#include "cfx/query.hpp"

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfx {

enum class SymbolKind {
    Lambda,  // (tree, depth)
    Y,       // (tree, node)
    IsoLambda,
    IsoY,
    Mu,      // (feature, level)
    X,       // (feature, 0), binary features
    Nu,      // (feature, category)
    Omega,   // (feature, level), ordinal/discrete
    Z,       // (class, 0)
    ZNeg,    // (feature, 0)
    ZPos,
};

struct Symbol {
    SymbolKind kind = SymbolKind::Y;
    int a = 0;
    int b = 0;

    auto operator<=>(const Symbol&) const = default;
};

/// Bijection between formulation symbols and instance columns. Column names
/// follow the pattern lambda_t3_d1, y_t3_v5, y_iso2_v5, mu_f1_3, x_f2,
/// nu_f3_1, omega_f4_2, z_c1, zneg_f1, zpos_f1.
class VariableRegistry {
public:
    static std::string name_of(const Symbol& s);

    /// Adds the column to `inst` under the symbol's canonical name.
    int add(milp::Instance& inst, const Symbol& s, milp::Column c);

    std::optional<int> find(const Symbol& s) const;
    std::optional<int> find(std::string_view name) const;
    int at(const Symbol& s) const;
    const Symbol& symbol(int col) const { return symbols_.at(static_cast<std::size_t>(col)); }
    std::size_t size() const { return symbols_.size(); }

private:
    std::vector<Symbol> symbols_;
    std::map<Symbol, int> by_symbol_;
    std::unordered_map<std::string, int> by_name_;
};

/// Columns of one tree: λ per depth that has internal nodes (-1 elsewhere)
/// and y per node.
struct TreeColumns {
    std::vector<int> lambda;
    std::vector<int> y;
};

struct Formulation {
    milp::Instance instance;
    VariableRegistry registry;
    ResolvedQuery rq;

    std::vector<TreeColumns> trees;
    std::vector<TreeColumns> iso_trees;  // empty unless plausibility is on
    /// Per feature: μ^0..μ^k, {x}, ν^0..ν^{K-1} or ω^1..ω^{K-1} (ω stored
    /// from index 0 for level 1).
    std::vector<std::vector<int>> feature_cols;
    std::vector<int> z;
    std::vector<int> zneg, zpos;  // -1 when absent

    /// Internal plus leaf nodes of all trees in the instance.
    std::size_t n_vertices = 0;
    std::size_t nnz() const { return instance.nnz(); }
};

/// Builds the full counterfactual MILP. Columns: classifier trees (λ by
/// depth, then y by node), isolation trees, features in declaration order,
/// class scores, objective auxiliaries. Rows: tree structure, class scores
/// and margins, feature consistency, objective links, plausibility, side
/// constraints. Throws std::invalid_argument for unknown resource symbols
/// and unsupported feature/split combinations.
Formulation assemble(const Model& model, const ResolvedQuery& rq);

/// Branch-choice rows only (root, flow, depth-left, depth-right) over the
/// trees of `trees`; no feature, class or objective parts. `rq` is empty.
Formulation assemble_tree_structure(const Ensemble& trees);

/// Oblique big-M constants: M+ = sum max(0,a) - b, M- = b - sum min(0,a).
struct BigM {
    double plus = 0.0;
    double minus = 0.0;
};
BigM oblique_big_m(const ObliqueSplit& s);

/// Full column assignment encoding point x: routed y, λ from the path
/// directions, canonical μ/ω, one-hot ν, class scores and the cheapest
/// objective auxiliaries.
std::vector<double> encode_point(const Model& model, const Formulation& f, std::span<const double> x);

/// Reads the counterfactual back from column values: numerical features via
/// x = sum_j gap(j) μ^j (snapped to the origin within l0_threshold), binary
/// by rounding, categorical by the largest ν, ordinal by the number of ω set.
Point decode_point(const Formulation& f, std::span<const double> values);

}  // namespace cfx
