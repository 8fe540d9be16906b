#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfx {

enum class FeatureKind { Numerical, Binary, Categorical, Ordinal, Discrete };
enum class Actionability { Free, Fixed, Increasing, Decreasing };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(Actionability a);
std::optional<FeatureKind> parse_feature_kind(std::string_view s);
std::optional<Actionability> parse_actionability(std::string_view s);

/// Feature values are carried as doubles: numerical values on [0,1], binary
/// values as 0/1, categorical values as the 0-based category index, ordinal
/// and discrete values as one of the grid values.
using Point = std::vector<double>;

struct FeatureDecl {
    std::string name;
    FeatureKind kind = FeatureKind::Numerical;
    Actionability actionability = Actionability::Free;

    // binary: cost of ending in the true / false state (origin state is free)
    double cost_true = 1.0;
    double cost_false = 1.0;

    // categorical: category names and per-category cost;
    // ordinal: level names (optional, defaults to "0".."k-1")
    std::vector<std::string> categories;
    std::vector<double> category_costs;

    // ordinal / discrete: strictly increasing value grid
    std::vector<double> values;

    // numerical / ordinal / discrete: cost per unit of downward / upward move
    double cost_down = 1.0;
    double cost_up = 1.0;

    bool is_ordered_grid() const {
        return kind == FeatureKind::Ordinal || kind == FeatureKind::Discrete;
    }
    /// Number of categories (categorical) or levels (ordinal/discrete); 2 for
    /// binary, 0 for numerical.
    std::size_t cardinality() const;
    bool admits(double value) const;
    /// 0-based grid level of an ordinal/discrete value, or nullopt if the value
    /// is not on the grid (tolerance 1e-9).
    std::optional<std::size_t> level_of(double value) const;
};

class FeatureSpace {
public:
    FeatureSpace() = default;
    explicit FeatureSpace(std::vector<FeatureDecl> features);

    std::size_t size() const { return features_.size(); }
    const FeatureDecl& operator[](std::size_t i) const { return features_.at(i); }
    std::span<const FeatureDecl> features() const { return features_; }
    auto begin() const { return features_.begin(); }
    auto end() const { return features_.end(); }

    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    /// Throws std::invalid_argument naming the first offending feature value.
    void check_point(std::span<const double> x) const;

private:
    std::vector<FeatureDecl> features_;
};

}  // namespace cfx
