#include "cfx/feature_space.hpp"

#include <cmath>
#include <set>

namespace cfx {

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Numerical: return "numerical";
        case FeatureKind::Binary: return "binary";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Ordinal: return "ordinal";
        case FeatureKind::Discrete: return "discrete";
    }
    return "?";
}

std::string_view to_string(Actionability a) {
    switch (a) {
        case Actionability::Free: return "free";
        case Actionability::Fixed: return "fixed";
        case Actionability::Increasing: return "increasing";
        case Actionability::Decreasing: return "decreasing";
    }
    return "?";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view s) {
    for (auto k : {FeatureKind::Numerical, FeatureKind::Binary, FeatureKind::Categorical,
                   FeatureKind::Ordinal, FeatureKind::Discrete})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<Actionability> parse_actionability(std::string_view s) {
    for (auto a : {Actionability::Free, Actionability::Fixed, Actionability::Increasing,
                   Actionability::Decreasing})
        if (to_string(a) == s) return a;
    return std::nullopt;
}

std::size_t FeatureDecl::cardinality() const {
    switch (kind) {
        case FeatureKind::Numerical: return 0;
        case FeatureKind::Binary: return 2;
        case FeatureKind::Categorical: return categories.size();
        case FeatureKind::Ordinal:
        case FeatureKind::Discrete: return values.size();
    }
    return 0;
}

std::optional<std::size_t> FeatureDecl::level_of(double value) const {
    for (std::size_t j = 0; j < values.size(); ++j)
        if (std::abs(values[j] - value) <= 1e-9) return j;
    return std::nullopt;
}

FeatureSpace::FeatureSpace(std::vector<FeatureDecl> features) : features_(std::move(features)) {
    std::set<std::string> names;
    for (const auto& f : features_) {
        if (!names.insert(f.name).second)
            throw std::invalid_argument("duplicate feature name '" + f.name + "'");
    }
}

std::optional<std::size_t> FeatureSpace::find(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
        if (features_[i].name == name) return i;
    return std::nullopt;
}

std::size_t FeatureSpace::index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

bool FeatureDecl::admits(double v) const {
    if (!std::isfinite(v)) return false;
    switch (kind) {
        case FeatureKind::Numerical: return v >= 0.0 && v <= 1.0;
        case FeatureKind::Binary: return v == 0.0 || v == 1.0;
        case FeatureKind::Categorical:
            return v == std::floor(v) && v >= 0 && v < static_cast<double>(categories.size());
        case FeatureKind::Ordinal:
        case FeatureKind::Discrete: return level_of(v).has_value();
    }
    return false;
}

void FeatureSpace::check_point(std::span<const double> x) const {
    if (x.size() != features_.size())
        throw std::invalid_argument("point has " + std::to_string(x.size()) + " values, expected " +
                                    std::to_string(features_.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& f = features_[i];
        if (!f.admits(x[i]))
            throw std::invalid_argument("value " + std::to_string(x[i]) + " outside the domain of " +
                                        std::string(to_string(f.kind)) + " feature '" + f.name + "'");
    }
}

}  // namespace cfx
