#include "cfx/milp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfx::milp {

int Instance::add_column(Column c) {
    columns_.push_back(std::move(c));
    return static_cast<int>(columns_.size()) - 1;
}

int Instance::add_row(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.col < b.col; });
    std::vector<Term> merged;
    merged.reserve(terms.size());
    for (const auto& t : terms) {
        if (!merged.empty() && merged.back().col == t.col) merged.back().coef += t.coef;
        else merged.push_back(t);
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    rows_.push_back(Row{std::move(name), std::move(merged), sense, rhs});
    return static_cast<int>(rows_.size()) - 1;
}

std::size_t Instance::nnz() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.terms.size();
    return n;
}

bool Instance::has_quadratic() const {
    return std::any_of(columns_.begin(), columns_.end(), [](const Column& c) { return c.quad != 0.0; });
}

bool Instance::has_integers() const {
    return std::any_of(columns_.begin(), columns_.end(), [](const Column& c) { return c.integer; });
}

double Instance::evaluate(std::span<const double> x) const {
    double obj = objective_offset;
    for (std::size_t j = 0; j < columns_.size(); ++j) obj += columns_[j].cost * x[j] + columns_[j].quad * x[j] * x[j];
    return obj;
}

double Instance::max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        const auto& c = columns_[j];
        worst = std::max({worst, (c.lower - x[j]) / (1.0 + std::abs(c.lower)), (x[j] - c.upper) / (1.0 + std::abs(c.upper))});
    }
    for (const auto& r : rows_) {
        double act = 0.0;
        for (const auto& t : r.terms) act += t.coef * x[static_cast<std::size_t>(t.col)];
        const double scale = 1.0 + std::abs(r.rhs);
        double v = 0.0;
        switch (r.sense) {
            case Sense::LessEqual: v = act - r.rhs; break;
            case Sense::GreaterEqual: v = r.rhs - act; break;
            case Sense::Equal: v = std::abs(act - r.rhs); break;
        }
        worst = std::max(worst, v / scale);
    }
    return worst;
}

void Instance::validate() const {
    for (const auto& c : columns_) {
        if (!std::isfinite(c.lower) || !std::isfinite(c.upper))
            throw std::invalid_argument("column '" + c.name + "' has an infinite bound");
        if (c.lower > c.upper) throw std::invalid_argument("column '" + c.name + "' has lower > upper");
        if (c.quad < 0.0) throw std::invalid_argument("column '" + c.name + "' has a non-convex quadratic term");
        if (!std::isfinite(c.cost) || !std::isfinite(c.quad))
            throw std::invalid_argument("column '" + c.name + "' has a non-finite cost");
    }
    for (const auto& r : rows_) {
        if (!std::isfinite(r.rhs)) throw std::invalid_argument("row '" + r.name + "' has a non-finite rhs");
        for (const auto& t : r.terms) {
            if (t.col < 0 || t.col >= static_cast<int>(columns_.size()))
                throw std::invalid_argument("row '" + r.name + "' references a missing column");
            if (t.coef == 0.0 || !std::isfinite(t.coef))
                throw std::invalid_argument("row '" + r.name + "' holds an explicit zero or non-finite coefficient");
        }
    }
}

}  // namespace cfx::milp
