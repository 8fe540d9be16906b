#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cfx::milp {

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Column {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    bool integer = false;
    double cost = 0.0;
    /// Coefficient q of a separable convex term q * x^2 (q >= 0).
    double quad = 0.0;
    /// Higher priority classes are branched on first.
    int branch_priority = 0;
};

struct Term {
    int col = 0;
    double coef = 0.0;
};

struct Row {
    std::string name;
    std::vector<Term> terms;  // sorted by column, no duplicates, no zeros
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

/// Minimization MILP with finite column bounds, sparse rows and an optional
/// separable convex quadratic objective.
class Instance {
public:
    int add_column(Column c);
    /// Merges duplicate columns and drops zero coefficients. Returns the row
    /// index.
    int add_row(std::string name, std::vector<Term> terms, Sense sense, double rhs);

    std::size_t num_columns() const { return columns_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    std::size_t nnz() const;
    bool has_quadratic() const;
    bool has_integers() const;

    const Column& column(int j) const { return columns_.at(static_cast<std::size_t>(j)); }
    Column& column(int j) { return columns_.at(static_cast<std::size_t>(j)); }
    const Row& row(int i) const { return rows_.at(static_cast<std::size_t>(i)); }
    std::span<const Column> columns() const { return columns_; }
    std::span<const Row> rows() const { return rows_; }

    double objective_offset = 0.0;

    /// Objective value of a full column assignment (including quadratic terms).
    double evaluate(std::span<const double> x) const;
    /// Largest violation over rows and bounds, each scaled by 1/(1+|rhs|).
    double max_violation(std::span<const double> x) const;
    /// Throws std::invalid_argument when bounds are not finite, lower > upper,
    /// a quadratic coefficient is negative, or a row references a missing
    /// column.
    void validate() const;

private:
    std::vector<Column> columns_;
    std::vector<Row> rows_;
};

}  // namespace cfx::milp
