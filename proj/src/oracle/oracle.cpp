#include "cfx/oracle.hpp"

#include "cfx/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <omp.h>

namespace cfx {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
    if (b != 0 && a > cap / b) throw std::invalid_argument("cell count exceeds the cap of " + std::to_string(cap));
    const std::uint64_t r = a * b;
    if (r > cap) throw std::invalid_argument("cell count exceeds the cap of " + std::to_string(cap));
    return r;
}

void reject_unsupported(const Model& model, const ResolvedQuery& rq) {
    auto scan = [](const Ensemble& e) {
        for (const auto& t : e.trees)
            for (const auto& n : t.nodes)
                if (!n.is_leaf() && std::holds_alternative<ObliqueSplit>(n.split))
                    throw std::invalid_argument("oracle cells are not axis-aligned under oblique splits");
    };
    scan(model.classifier);
    if (rq.plausibility) scan(*model.isolation);
    if (!rq.query.implications.empty()) throw std::invalid_argument("oracle does not support implications");
    if (!rq.query.resource_constraints.empty())
        throw std::invalid_argument("oracle does not support resource constraints");
    for (const auto& lc : rq.query.linear_constraints) {
        int numeric = 0;
        for (const auto& [fi, coef] : lc.coeffs)
            if (coef != 0.0 && rq.features[static_cast<std::size_t>(fi)].kind == FeatureKind::Numerical) ++numeric;
        if (numeric > 1)
            throw std::invalid_argument("oracle supports linear constraints over at most one numerical feature");
    }
}

bool satisfies(double lhs, milp::Sense s, double rhs, double tol) {
    switch (s) {
        case milp::Sense::LessEqual: return lhs <= rhs + tol;
        case milp::Sense::GreaterEqual: return lhs >= rhs - tol;
        case milp::Sense::Equal: return std::abs(lhs - rhs) <= tol;
    }
    return false;
}

}  // namespace

std::uint64_t count_cells(const Model& model, const ResolvedQuery& rq) {
    std::uint64_t n = 1;
    const auto cap = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < model.features.size(); ++i) {
        const auto& f = model.features[i];
        if (f.kind == FeatureKind::Numerical)
            n = checked_mul(n, collect_split_levels(model, static_cast<int>(i), rq.plausibility).size() + 1, cap);
        else
            n = checked_mul(n, f.cardinality(), cap);
    }
    return n;
}

CellSpace::CellSpace(const Model& model, const ResolvedQuery& rq, std::uint64_t cap) : model_(model), rq_(rq) {
    reject_unsupported(model, rq);
    const auto& fs = rq.features;
    split_levels_.resize(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (fs[i].kind == FeatureKind::Numerical) {
            const auto& g = rq.grids[i];
            for (int j = 0; j < g.k(); ++j)
                if (g.is_split[static_cast<std::size_t>(j)]) split_levels_[i].push_back(g.levels[static_cast<std::size_t>(j)]);
            dims_.push_back(split_levels_[i].size() + 1);
        } else {
            dims_.push_back(fs[i].cardinality());
        }
        size_ = checked_mul(size_, dims_.back(), cap);
    }
}

CellSpace::Cell CellSpace::cell(std::uint64_t k) const {
    const auto& fs = rq_.features;
    Cell c;
    c.index.assign(fs.size(), 0);
    c.representative.assign(fs.size(), 0.0);
    for (std::size_t i = fs.size(); i-- > 0;) {
        c.index[i] = static_cast<int>(k % dims_[i]);
        k /= dims_[i];
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto j = static_cast<std::size_t>(c.index[i]);
        switch (fs[i].kind) {
            case FeatureKind::Numerical: {
                const auto& s = split_levels_[i];
                const double lo = j == 0 ? 0.0 : s[j - 1];
                const double hi = j == s.size() ? 1.0 : s[j];
                c.representative[i] = 0.5 * (lo + hi);
                break;
            }
            case FeatureKind::Binary:
            case FeatureKind::Categorical: c.representative[i] = static_cast<double>(j); break;
            case FeatureKind::Ordinal:
            case FeatureKind::Discrete: c.representative[i] = fs[i].values[j]; break;
        }
    }
    const auto& x = c.representative;
    for (const auto& t : model_.classifier.trees) c.leaves.push_back(route(t, x));
    if (rq_.plausibility)
        for (const auto& t : model_.isolation->trees) c.iso_leaves.push_back(route(t, x));
    c.cls = predict(model_.classifier, x).cls;
    return c;
}

std::optional<CellSpace::Candidate> CellSpace::evaluate(std::uint64_t k) const {
    const Cell c = cell(k);
    const auto& cls = model_.classifier;
    const auto target = static_cast<std::size_t>(rq_.query.target_class);

    std::vector<double> z(cls.num_classes(), 0.0);
    for (std::size_t t = 0; t < cls.trees.size(); ++t) {
        const auto& leaf = cls.trees[t].nodes[static_cast<std::size_t>(c.leaves[t])];
        for (std::size_t q = 0; q < z.size(); ++q) z[q] += cls.trees[t].weight * leaf.class_probs[q];
    }
    for (std::size_t q = 0; q < z.size(); ++q)
        if (q != target && z[target] - z[q] < rq_.eta - 1e-12) return std::nullopt;
    if (rq_.plausibility) {
        const auto& iso = *model_.isolation;
        double total = 0.0;
        for (std::size_t t = 0; t < iso.trees.size(); ++t)
            total += leaf_isolation_depth(iso, iso.trees[t].nodes[static_cast<std::size_t>(c.iso_leaves[t])]);
        if (total < iso.delta * static_cast<double>(iso.trees.size()) - 1e-9) return std::nullopt;
    }

    // Largest box with the same routing: bounded by the split levels the
    // paths actually test, with right branches starting ε into the interval.
    const auto& fs = rq_.features;
    const auto& origin = rq_.query.origin;
    std::vector<double> lo(fs.size(), 0.0), hi(fs.size(), 1.0);
    auto walk = [&](const Tree& t, int leaf) {
        const auto& x = c.representative;
        int v = 0;
        while (v != leaf) {
            const auto& n = t.nodes[static_cast<std::size_t>(v)];
            const bool left = goes_left(n.split, x);
            if (const auto* s = std::get_if<NumericSplit>(&n.split);
                s && fs[static_cast<std::size_t>(s->feature)].kind == FeatureKind::Numerical) {
                const auto i = static_cast<std::size_t>(s->feature);
                if (left) {
                    hi[i] = std::min(hi[i], s->threshold);
                } else {
                    const auto& g = rq_.grids[i];
                    const int j = g.level_of(s->threshold);
                    lo[i] = std::max(lo[i], s->threshold + rq_.epsilon * g.gap(j));
                }
            }
            v = left ? n.left : n.right;
        }
    };
    for (std::size_t t = 0; t < cls.trees.size(); ++t) walk(cls.trees[t], c.leaves[t]);
    if (rq_.plausibility)
        for (std::size_t t = 0; t < model_.isolation->trees.size(); ++t)
            walk(model_.isolation->trees[t], c.iso_leaves[t]);

    Point x = c.representative;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto a = fs[i].actionability;
        if (fs[i].kind == FeatureKind::Numerical) {
            if (a == Actionability::Fixed) lo[i] = std::max(lo[i], origin[i]), hi[i] = std::min(hi[i], origin[i]);
            if (a == Actionability::Increasing) lo[i] = std::max(lo[i], origin[i]);
            if (a == Actionability::Decreasing) hi[i] = std::min(hi[i], origin[i]);
            continue;
        }
        if (a == Actionability::Fixed && x[i] != origin[i]) return std::nullopt;
        if (a == Actionability::Increasing && x[i] < origin[i]) return std::nullopt;
        if (a == Actionability::Decreasing && x[i] > origin[i]) return std::nullopt;
    }
    for (const auto& lc : rq_.query.linear_constraints) {
        double constant = 0.0;
        int numeric = -1;
        double a = 0.0;
        for (const auto& [fi, coef] : lc.coeffs) {
            const auto i = static_cast<std::size_t>(fi);
            if (fs[i].kind == FeatureKind::Numerical && coef != 0.0) {
                numeric = fi;
                a = coef;
            } else {
                constant += coef * (x[i] - origin[i]);
            }
        }
        if (numeric < 0) {
            if (!satisfies(constant, lc.sense, lc.rhs, 1e-9)) return std::nullopt;
            continue;
        }
        // a (x_i - origin_i) sense rhs - constant
        const auto i = static_cast<std::size_t>(numeric);
        const double bound = origin[i] + (lc.rhs - constant) / a;
        const bool upper = (lc.sense == milp::Sense::LessEqual) == (a > 0);
        if (lc.sense == milp::Sense::Equal) {
            lo[i] = std::max(lo[i], bound);
            hi[i] = std::min(hi[i], bound);
        } else if (upper) {
            hi[i] = std::min(hi[i], bound);
        } else {
            lo[i] = std::max(lo[i], bound);
        }
    }

    double cost = 0.0;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const int fi = static_cast<int>(i);
        if (fs[i].kind != FeatureKind::Numerical) {
            cost += feature_cost(rq_, fi, x[i]);
            continue;
        }
        if (lo[i] > hi[i]) return std::nullopt;
        std::vector<double> cand{std::clamp(origin[i], lo[i], hi[i]), lo[i], hi[i]};
        if (rq_.query.objective.norm == Norm::Piecewise && rq_.query.objective.piecewise[i])
            for (double b : rq_.query.objective.piecewise[i]->x)
                if (b > lo[i] && b < hi[i]) cand.push_back(b);
        double best = std::numeric_limits<double>::infinity();
        for (double v : cand) {
            const double cv = feature_cost(rq_, fi, v);
            if (cv < best) {
                best = cv;
                x[i] = v;
            }
        }
        cost += best;
    }
    return Candidate{cost, std::move(x)};
}

namespace {

struct Best {
    double cost = std::numeric_limits<double>::infinity();
    std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
    Point x;

    bool better(double c, std::uint64_t k) const { return c < cost || (c == cost && k < index); }
    void offer(double c, std::uint64_t k, Point p) {
        if (!better(c, k)) return;
        cost = c;
        index = k;
        x = std::move(p);
    }
};

Explanation finish(const Model& model, const ResolvedQuery& rq, const CellSpace& space, Best best,
                   std::chrono::steady_clock::time_point start) {
    Explanation e;
    e.target_class = rq.query.target_class;
    e.origin_class = rq.origin_class;
    e.origin = rq.query.origin;
    e.plausibility = rq.plausibility;
    e.warnings = rq.warnings;
    e.cells_evaluated = space.size();
    e.formulation.epsilon = rq.epsilon;
    e.formulation.vote_margin = rq.eta;
    e.certification.vote_margin = rq.eta;
    if (best.index != std::numeric_limits<std::uint64_t>::max()) {
        e.status = milp::Status::Optimal;
        e.certification = certify(model, rq.query.target_class, rq.eta, rq.plausibility, best.x);
        e.counterfactual = best.x;
        fill_costs(rq, best.x, e);
        e.surrogate_objective = e.objective;
        e.stats.best_bound = e.objective;
    } else {
        e.status = milp::Status::Infeasible;
    }
    e.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return e;
}

}  // namespace

Explanation brute_force_explain_serial(const Model& model, const Query& query, const OracleConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const ResolvedQuery rq = resolve_query(model, query);
    const CellSpace space(model, rq, cfg.cell_cap);
    Best best;
    for (std::uint64_t k = 0; k < space.size(); ++k)
        if (auto c = space.evaluate(k)) best.offer(c->cost, k, std::move(c->x));
    return finish(model, rq, space, std::move(best), start);
}

Explanation brute_force_explain(const Model& model, const Query& query, const OracleConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const ResolvedQuery rq = resolve_query(model, query);
    const CellSpace space(model, rq, cfg.cell_cap);
    const auto n = static_cast<std::int64_t>(space.size());
    Best best;
#pragma omp parallel num_threads(resolve_threads(cfg.threads))
    {
        Best local;
#pragma omp for schedule(static)
        for (std::int64_t k = 0; k < n; ++k)
            if (auto c = space.evaluate(static_cast<std::uint64_t>(k)))
                local.offer(c->cost, static_cast<std::uint64_t>(k), std::move(c->x));
#pragma omp critical
        best.offer(local.cost, local.index, std::move(local.x));
    }
    return finish(model, rq, space, std::move(best), start);
}

}  // namespace cfx
