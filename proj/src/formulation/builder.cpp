#include "cfx/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfx {

using milp::Column;
using milp::Sense;
using milp::Term;

BigM oblique_big_m(const ObliqueSplit& s) {
    double pos = 0.0, neg = 0.0;
    for (const auto& t : s.terms) {
        pos += std::max(0.0, t.coef);
        neg += std::min(0.0, t.coef);
    }
    return {pos - s.intercept, s.intercept - neg};
}

namespace {

constexpr int kLambdaPriority = 2;
constexpr int kAuxPriority = 1;

/// Affine expression over columns.
struct Expr {
    std::vector<Term> terms;
    double constant = 0.0;

    void add(const Expr& e, double scale) {
        for (const auto& t : e.terms) terms.push_back({t.col, scale * t.coef});
        constant += scale * e.constant;
    }
};

/// Ordinal/discrete level of a split threshold: number of grid values <= thr.
int ordinal_level(const FeatureDecl& f, double threshold) {
    return static_cast<int>(std::upper_bound(f.values.begin(), f.values.end(), threshold) - f.values.begin());
}

std::string tree_tag(int t, bool iso) {
    return (iso ? "iso" : "t") + std::to_string(t);
}

struct NodeRef {
    bool iso = false;
    int tree = 0;
    int node = 0;
};

class Builder {
public:
    Builder(const Model& m, const ResolvedQuery& rq) : model_(m), rq_(rq) {
        f_.rq = rq;
    }

    Formulation run() {
        const auto& cls = model_.classifier;
        f_.trees.resize(cls.trees.size());
        for (std::size_t t = 0; t < cls.trees.size(); ++t) tree_columns(cls.trees[t], static_cast<int>(t), false);
        if (rq_.plausibility) {
            const auto& iso = *model_.isolation;
            f_.iso_trees.resize(iso.trees.size());
            for (std::size_t t = 0; t < iso.trees.size(); ++t) tree_columns(iso.trees[t], static_cast<int>(t), true);
        }
        collect_split_nodes();
        feature_columns();
        for (std::size_t c = 0; c < cls.num_classes(); ++c)
            f_.z.push_back(reg(Symbol{SymbolKind::Z, static_cast<int>(c), 0},
                               Column{.lower = 0.0, .upper = cls.total_weight()}));
        objective_columns();

        for (std::size_t t = 0; t < cls.trees.size(); ++t) tree_rows(cls.trees[t], static_cast<int>(t), false);
        for (std::size_t t = 0; t < f_.iso_trees.size(); ++t)
            tree_rows(model_.isolation->trees[t], static_cast<int>(t), true);
        class_rows();
        for (std::size_t i = 0; i < rq_.features.size(); ++i) feature_rows(static_cast<int>(i));
        oblique_rows();
        objective_rows();
        if (rq_.plausibility) plausibility_row();
        side_constraints();
        return std::move(f_);
    }

    Formulation run_trees() {
        const auto& cls = model_.classifier;
        f_.trees.resize(cls.trees.size());
        for (std::size_t t = 0; t < cls.trees.size(); ++t) tree_columns(cls.trees[t], static_cast<int>(t), false);
        for (std::size_t t = 0; t < cls.trees.size(); ++t) tree_rows(cls.trees[t], static_cast<int>(t), false);
        return std::move(f_);
    }

private:
    int reg(const Symbol& s, Column c) { return f_.registry.add(f_.instance, s, std::move(c)); }

    void row(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
        f_.instance.add_row(std::move(name), std::move(terms), sense, rhs);
    }

    const Tree& tree(bool iso, int t) const {
        return iso ? model_.isolation->trees[static_cast<std::size_t>(t)]
                   : model_.classifier.trees[static_cast<std::size_t>(t)];
    }
    const TreeColumns& cols(bool iso, int t) const {
        return iso ? f_.iso_trees[static_cast<std::size_t>(t)] : f_.trees[static_cast<std::size_t>(t)];
    }
    int y(const NodeRef& r, int node) const { return cols(r.iso, r.tree).y[static_cast<std::size_t>(node)]; }

    void tree_columns(const Tree& t, int ti, bool iso) {
        auto& tc = iso ? f_.iso_trees[static_cast<std::size_t>(ti)] : f_.trees[static_cast<std::size_t>(ti)];
        const int depth = t.max_depth();
        tc.lambda.assign(static_cast<std::size_t>(std::max(depth, 0)), -1);
        for (int d = 0; d < depth; ++d) {
            if (t.internal_at_depth(d).empty()) continue;
            tc.lambda[static_cast<std::size_t>(d)] =
                reg(Symbol{iso ? SymbolKind::IsoLambda : SymbolKind::Lambda, ti, d},
                    Column{.integer = true, .branch_priority = kLambdaPriority});
        }
        for (std::size_t v = 0; v < t.nodes.size(); ++v)
            tc.y.push_back(reg(Symbol{iso ? SymbolKind::IsoY : SymbolKind::Y, ti, static_cast<int>(v)}, Column{}));
        f_.n_vertices += t.nodes.size();
    }

    void tree_rows(const Tree& t, int ti, bool iso) {
        const auto& tc = cols(iso, ti);
        const std::string tag = tree_tag(ti, iso);
        row("root_" + tag, {{tc.y[0], 1.0}}, Sense::Equal, 1.0);
        for (std::size_t v = 0; v < t.nodes.size(); ++v) {
            const auto& n = t.nodes[v];
            if (n.is_leaf()) continue;
            row("flow_" + tag + "_v" + std::to_string(v),
                {{tc.y[v], 1.0},
                 {tc.y[static_cast<std::size_t>(n.left)], -1.0},
                 {tc.y[static_cast<std::size_t>(n.right)], -1.0}},
                Sense::Equal, 0.0);
        }
        for (std::size_t d = 0; d < tc.lambda.size(); ++d) {
            if (tc.lambda[d] < 0) continue;
            std::vector<Term> lt, rt;
            for (int v : t.internal_at_depth(static_cast<int>(d))) {
                lt.push_back({tc.y[static_cast<std::size_t>(t.nodes[v].left)], 1.0});
                rt.push_back({tc.y[static_cast<std::size_t>(t.nodes[v].right)], 1.0});
            }
            lt.push_back({tc.lambda[d], -1.0});
            rt.push_back({tc.lambda[d], 1.0});
            row("depth_left_" + tag + "_d" + std::to_string(d), std::move(lt), Sense::LessEqual, 0.0);
            row("depth_right_" + tag + "_d" + std::to_string(d), std::move(rt), Sense::LessEqual, 1.0);
        }
    }

    void collect_split_nodes() {
        split_nodes_.assign(rq_.features.size(), {});
        auto scan = [&](bool iso, int ti) {
            const auto& t = tree(iso, ti);
            for (std::size_t v = 0; v < t.nodes.size(); ++v) {
                const auto& n = t.nodes[v];
                if (n.is_leaf()) continue;
                const NodeRef ref{iso, ti, static_cast<int>(v)};
                if (std::holds_alternative<ObliqueSplit>(n.split)) {
                    oblique_nodes_.push_back(ref);
                    continue;
                }
                const int fi = std::visit(
                    [](const auto& s) -> int {
                        if constexpr (requires { s.feature; }) return s.feature;
                        else return -1;
                    },
                    n.split);
                split_nodes_[static_cast<std::size_t>(fi)].push_back(ref);
            }
        };
        for (std::size_t t = 0; t < f_.trees.size(); ++t) scan(false, static_cast<int>(t));
        for (std::size_t t = 0; t < f_.iso_trees.size(); ++t) scan(true, static_cast<int>(t));
    }

    void feature_columns() {
        const auto& fs = rq_.features;
        f_.feature_cols.resize(fs.size());
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto& f = fs[i];
            const int fi = static_cast<int>(i);
            const double xo = rq_.query.origin[i];
            auto& fc = f_.feature_cols[i];
            auto bounded = [&](double origin_value, Column c) {
                switch (f.actionability) {
                    case Actionability::Free: break;
                    case Actionability::Fixed: c.lower = c.upper = origin_value; break;
                    case Actionability::Increasing: c.lower = origin_value; break;
                    case Actionability::Decreasing: c.upper = origin_value; break;
                }
                return c;
            };
            switch (f.kind) {
                case FeatureKind::Numerical: {
                    const auto& g = rq_.grids[i];
                    const auto mu = encode_numeric(g, xo);
                    for (int j = 0; j <= g.k(); ++j)
                        fc.push_back(reg(Symbol{SymbolKind::Mu, fi, j}, bounded(mu[static_cast<std::size_t>(j)], Column{})));
                    break;
                }
                case FeatureKind::Binary:
                    fc.push_back(reg(Symbol{SymbolKind::X, fi, 0}, bounded(xo, Column{})));
                    break;
                case FeatureKind::Categorical: {
                    const int origin = static_cast<int>(xo);
                    for (std::size_t j = 0; j < f.categories.size(); ++j) {
                        Column c;
                        if (f.actionability == Actionability::Fixed)
                            c.lower = c.upper = static_cast<int>(j) == origin ? 1.0 : 0.0;
                        fc.push_back(reg(Symbol{SymbolKind::Nu, fi, static_cast<int>(j)}, c));
                    }
                    break;
                }
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    const int origin = static_cast<int>(*f.level_of(xo));
                    for (std::size_t j = 1; j < f.values.size(); ++j) {
                        const double w = origin >= static_cast<int>(j) ? 1.0 : 0.0;
                        fc.push_back(reg(Symbol{SymbolKind::Omega, fi, static_cast<int>(j)},
                                         bounded(w, Column{.integer = true, .branch_priority = kAuxPriority})));
                    }
                    break;
                }
            }
        }
    }

    void objective_columns() {
        const auto& fs = rq_.features;
        const Norm norm = rq_.query.objective.norm;
        f_.zneg.assign(fs.size(), -1);
        f_.zpos.assign(fs.size(), -1);
        if (norm != Norm::L0 && norm != Norm::L2) return;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto& f = fs[i];
            if (f.kind != FeatureKind::Numerical) continue;
            const int fi = static_cast<int>(i);
            const auto& g = rq_.grids[i];
            const double xo = rq_.query.origin[i];
            const bool up_ok = f.actionability == Actionability::Free || f.actionability == Actionability::Increasing;
            const bool down_ok =
                f.actionability == Actionability::Free || f.actionability == Actionability::Decreasing;
            if (norm == Norm::L0) {
                const int jo = g.origin_level;
                if (jo >= 1)
                    f_.zneg[i] = reg(Symbol{SymbolKind::ZNeg, fi, 0},
                                     Column{.integer = true, .cost = f.cost_down, .branch_priority = kAuxPriority});
                if (jo <= g.k())
                    f_.zpos[i] = reg(Symbol{SymbolKind::ZPos, fi, 0},
                                     Column{.integer = true, .cost = f.cost_up, .branch_priority = kAuxPriority});
            } else {
                f_.zneg[i] = reg(Symbol{SymbolKind::ZNeg, fi, 0},
                                 Column{.upper = down_ok ? xo : 0.0, .quad = f.cost_down});
                f_.zpos[i] = reg(Symbol{SymbolKind::ZPos, fi, 0},
                                 Column{.upper = up_ok ? 1.0 - xo : 0.0, .quad = f.cost_up});
            }
        }
    }

    void class_rows() {
        const auto& cls = model_.classifier;
        const std::size_t nc = cls.num_classes();
        for (std::size_t c = 0; c < nc; ++c) {
            std::vector<Term> terms{{f_.z[c], 1.0}};
            for (std::size_t t = 0; t < cls.trees.size(); ++t) {
                const auto& tr = cls.trees[t];
                for (std::size_t v = 0; v < tr.nodes.size(); ++v) {
                    const auto& n = tr.nodes[v];
                    if (!n.is_leaf()) continue;
                    const double p = tr.weight * n.class_probs[c];
                    if (p != 0.0) terms.push_back({f_.trees[t].y[v], -p});
                }
            }
            row("score_c" + std::to_string(c), std::move(terms), Sense::Equal, 0.0);
        }
        const auto target = static_cast<std::size_t>(rq_.query.target_class);
        for (std::size_t c = 0; c < nc; ++c) {
            if (c == target) continue;
            row("margin_c" + std::to_string(c), {{f_.z[target], 1.0}, {f_.z[c], -1.0}}, Sense::GreaterEqual, rq_.eta);
        }
    }

    void feature_rows(int fi) {
        const auto i = static_cast<std::size_t>(fi);
        const auto& f = rq_.features[i];
        const auto& fc = f_.feature_cols[i];
        const std::string ftag = "_f" + std::to_string(fi);
        if (f.kind == FeatureKind::Numerical)
            for (std::size_t j = 1; j < fc.size(); ++j)
                row("chain" + ftag + "_" + std::to_string(j), {{fc[j - 1], 1.0}, {fc[j], -1.0}}, Sense::GreaterEqual, 0.0);
        if (f.is_ordered_grid())
            for (std::size_t j = 1; j < fc.size(); ++j)
                row("chain" + ftag + "_" + std::to_string(j + 1), {{fc[j - 1], 1.0}, {fc[j], -1.0}},
                    Sense::GreaterEqual, 0.0);

        for (const auto& ref : split_nodes_[i]) {
            const auto& n = tree(ref.iso, ref.tree).nodes[static_cast<std::size_t>(ref.node)];
            const int yl = y(ref, n.left), yr = y(ref, n.right);
            const std::string tag = tree_tag(ref.tree, ref.iso) + "_v" + std::to_string(ref.node);
            // Indicator expression of the right branch, in the binary-like form
            // ind + y_l <= 1 and ind - y_r >= 0.
            std::vector<Term> ind;
            if (const auto* s = std::get_if<NumericSplit>(&n.split)) {
                if (f.kind == FeatureKind::Numerical) {
                    const int j = rq_.grids[i].level_of(s->threshold);
                    if (j < 1) throw std::logic_error("split level missing from the grid");
                    const int mj = fc[static_cast<std::size_t>(j)], mp = fc[static_cast<std::size_t>(j - 1)];
                    row("left_" + tag, {{mj, 1.0}, {yl, 1.0}}, Sense::LessEqual, 1.0);
                    row("right_" + tag, {{mp, 1.0}, {yr, -1.0}}, Sense::GreaterEqual, 0.0);
                    row("eps_" + tag, {{mj, 1.0}, {yr, -rq_.epsilon}}, Sense::GreaterEqual, 0.0);
                    continue;
                }
                const int j = ordinal_level(f, s->threshold);
                ind.push_back({fc[static_cast<std::size_t>(j - 1)], 1.0});
            } else if (std::holds_alternative<BinarySplit>(n.split)) {
                ind.push_back({fc[0], 1.0});
            } else if (const auto* s = std::get_if<CategorySplit>(&n.split)) {
                ind.push_back({fc[static_cast<std::size_t>(s->category)], 1.0});
            } else if (const auto* s = std::get_if<CategorySetSplit>(&n.split)) {
                for (int c : s->right) ind.push_back({fc[static_cast<std::size_t>(c)], 1.0});
            }
            auto left = ind, right = ind;
            left.push_back({yl, 1.0});
            right.push_back({yr, -1.0});
            row("left_" + tag, std::move(left), Sense::LessEqual, 1.0);
            row("right_" + tag, std::move(right), Sense::GreaterEqual, 0.0);
        }
        if (f.kind == FeatureKind::Categorical) {
            std::vector<Term> terms;
            for (int c : fc) terms.push_back({c, 1.0});
            row("simplex" + ftag, std::move(terms), Sense::Equal, 1.0);
        }
    }

    /// Feature value as an affine expression; categorical features have none.
    Expr value_expr(int fi) const {
        const auto i = static_cast<std::size_t>(fi);
        const auto& f = rq_.features[i];
        const auto& fc = f_.feature_cols[i];
        Expr e;
        switch (f.kind) {
            case FeatureKind::Numerical: {
                const auto& g = rq_.grids[i];
                for (int j = 0; j <= g.k(); ++j) e.terms.push_back({fc[static_cast<std::size_t>(j)], g.gap(j)});
                break;
            }
            case FeatureKind::Binary: e.terms.push_back({fc[0], 1.0}); break;
            case FeatureKind::Ordinal:
            case FeatureKind::Discrete:
                e.constant = f.values[0];
                for (std::size_t j = 1; j < f.values.size(); ++j)
                    e.terms.push_back({fc[j - 1], f.values[j] - f.values[j - 1]});
                break;
            case FeatureKind::Categorical:
                throw std::invalid_argument("categorical feature '" + f.name + "' has no numeric value");
        }
        return e;
    }

    void oblique_rows() {
        for (const auto& ref : oblique_nodes_) {
            const auto& n = tree(ref.iso, ref.tree).nodes[static_cast<std::size_t>(ref.node)];
            const auto& s = std::get<ObliqueSplit>(n.split);
            Expr ax;
            for (const auto& t : s.terms) {
                if (rq_.features[static_cast<std::size_t>(t.feature)].kind != FeatureKind::Numerical)
                    throw std::invalid_argument("oblique split references a non-numerical feature");
                ax.add(value_expr(t.feature), t.coef);
            }
            const BigM m = oblique_big_m(s);
            const std::string tag = tree_tag(ref.tree, ref.iso) + "_v" + std::to_string(ref.node);
            auto left = ax.terms, right = ax.terms;
            left.push_back({y(ref, n.left), m.plus + rq_.epsilon});
            right.push_back({y(ref, n.right), -(m.minus + rq_.epsilon)});
            row("oblique_left_" + tag, std::move(left), Sense::LessEqual, s.intercept + m.plus);
            row("oblique_right_" + tag, std::move(right), Sense::GreaterEqual, s.intercept - m.minus);
        }
    }

    void objective_rows() {
        const auto& fs = rq_.features;
        const Norm norm = rq_.query.objective.norm;
        auto& inst = f_.instance;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto& f = fs[i];
            const int fi = static_cast<int>(i);
            const auto& fc = f_.feature_cols[i];
            const double xo = rq_.query.origin[i];
            const std::string ftag = "_f" + std::to_string(fi);
            switch (f.kind) {
                case FeatureKind::Numerical: {
                    const auto& g = rq_.grids[i];
                    if (norm == Norm::L0) {
                        const int jo = g.origin_level;
                        if (f_.zneg[i] >= 0)
                            row("l0_down" + ftag, {{f_.zneg[i], 1.0}, {fc[static_cast<std::size_t>(jo - 1)], 1.0}},
                                Sense::GreaterEqual, 1.0);
                        if (f_.zpos[i] >= 0)
                            row("l0_up" + ftag, {{f_.zpos[i], 1.0}, {fc[static_cast<std::size_t>(jo)], -1.0}},
                                Sense::GreaterEqual, 0.0);
                    } else if (norm == Norm::L2) {
                        Expr e = value_expr(fi);
                        std::vector<Term> terms{{f_.zpos[i], 1.0}, {f_.zneg[i], -1.0}};
                        for (const auto& t : e.terms) terms.push_back({t.col, -t.coef});
                        row("l2_delta" + ftag, std::move(terms), Sense::Equal, -xo);
                    } else {
                        double prev = feature_cost(rq_, fi, g.at(0));
                        inst.objective_offset += prev;
                        for (int j = 0; j <= g.k(); ++j) {
                            const double next = feature_cost(rq_, fi, g.at(j + 1));
                            inst.column(fc[static_cast<std::size_t>(j)]).cost += next - prev;
                            prev = next;
                        }
                    }
                    break;
                }
                case FeatureKind::Binary:
                    if (xo == 0.0) {
                        inst.column(fc[0]).cost += f.cost_true;
                    } else {
                        inst.column(fc[0]).cost -= f.cost_false;
                        inst.objective_offset += f.cost_false;
                    }
                    break;
                case FeatureKind::Categorical:
                    for (std::size_t j = 0; j < fc.size(); ++j)
                        if (static_cast<int>(j) != static_cast<int>(xo)) inst.column(fc[j]).cost += f.category_costs[j];
                    break;
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    double prev = feature_cost(rq_, fi, f.values[0]);
                    inst.objective_offset += prev;
                    for (std::size_t j = 1; j < f.values.size(); ++j) {
                        const double next = feature_cost(rq_, fi, f.values[j]);
                        inst.column(fc[j - 1]).cost += next - prev;
                        prev = next;
                    }
                    break;
                }
            }
        }
    }

    void plausibility_row() {
        const auto& iso = *model_.isolation;
        std::vector<Term> terms;
        for (std::size_t t = 0; t < iso.trees.size(); ++t) {
            const auto& tr = iso.trees[t];
            for (std::size_t v = 0; v < tr.nodes.size(); ++v) {
                const auto& n = tr.nodes[v];
                if (!n.is_leaf()) continue;
                terms.push_back({f_.iso_trees[t].y[v], leaf_isolation_depth(iso, n)});
            }
        }
        row("plausibility", std::move(terms), Sense::GreaterEqual, iso.delta * static_cast<double>(iso.trees.size()));
    }

    /// Indicator of "feature takes one of the literal's values".
    Expr literal_expr(const Literal& lit) const {
        const auto i = static_cast<std::size_t>(lit.feature);
        const auto& f = rq_.features[i];
        const auto& fc = f_.feature_cols[i];
        Expr e;
        for (int v : lit.values) {
            switch (f.kind) {
                case FeatureKind::Binary:
                    if (v == 1) e.terms.push_back({fc[0], 1.0});
                    else {
                        e.terms.push_back({fc[0], -1.0});
                        e.constant += 1.0;
                    }
                    break;
                case FeatureKind::Categorical: e.terms.push_back({fc[static_cast<std::size_t>(v)], 1.0}); break;
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    // [level == l] = ω^l - ω^{l+1}, with ω^0 = 1 and ω^K = 0.
                    const auto l = static_cast<std::size_t>(v);
                    if (l == 0) e.constant += 1.0;
                    else e.terms.push_back({fc[l - 1], 1.0});
                    if (l < fc.size()) e.terms.push_back({fc[l], -1.0});
                    break;
                }
                case FeatureKind::Numerical:
                    throw std::invalid_argument("implications cannot reference numerical features");
            }
        }
        return e;
    }

    void side_row(std::string name, const Expr& e, Sense sense, double rhs) {
        for (const auto& t : e.terms) {
            auto& c = f_.instance.column(t.col);
            const auto kind = f_.registry.symbol(t.col).kind;
            if ((kind == SymbolKind::X || kind == SymbolKind::Nu) && !c.integer) {
                c.integer = true;
                c.branch_priority = kAuxPriority;
            }
        }
        row(std::move(name), e.terms, sense, rhs - e.constant);
    }

    void side_constraints() {
        const auto& q = rq_.query;
        for (const auto& lc : q.linear_constraints) {
            Expr e;
            for (const auto& [fi, coef] : lc.coeffs) {
                e.add(value_expr(fi), coef);
                e.constant -= coef * q.origin[static_cast<std::size_t>(fi)];
            }
            side_row(lc.name, e, lc.sense, lc.rhs);
        }
        for (std::size_t k = 0; k < q.implications.size(); ++k) {
            Expr e = literal_expr(q.implications[k].then_);
            e.add(literal_expr(q.implications[k].if_), -1.0);
            side_row("implication_" + std::to_string(k), e, Sense::GreaterEqual, 0.0);
        }
        for (const auto& rc : q.resource_constraints) {
            Expr e;
            for (const auto& [name, coef] : rc.terms) {
                const auto col = f_.registry.find(name);
                if (!col) throw std::invalid_argument("resource constraint '" + rc.name + "' references unknown column '" + name + "'");
                e.terms.push_back({*col, coef});
            }
            side_row(rc.name, e, rc.sense, rc.rhs);
        }
    }

    const Model& model_;
    const ResolvedQuery& rq_;
    Formulation f_;
    std::vector<std::vector<NodeRef>> split_nodes_;
    std::vector<NodeRef> oblique_nodes_;
};

}  // namespace

Formulation assemble(const Model& model, const ResolvedQuery& rq) {
    if (rq.plausibility && !model.isolation) throw std::invalid_argument("plausibility requires an isolation forest");
    return Builder(model, rq).run();
}

Formulation assemble_tree_structure(const Ensemble& trees) {
    Model m;
    m.classifier = trees;
    return Builder(m, ResolvedQuery{}).run_trees();
}

std::vector<double> encode_point(const Model& model, const Formulation& f, std::span<const double> x) {
    const auto& rq = f.rq;
    std::vector<double> v(f.instance.num_columns(), 0.0);
    auto encode_tree = [&](const Tree& t, const TreeColumns& tc) {
        int node = 0;
        while (true) {
            v[static_cast<std::size_t>(tc.y[static_cast<std::size_t>(node)])] = 1.0;
            const auto& n = t.nodes[static_cast<std::size_t>(node)];
            if (n.is_leaf()) break;
            const bool left = goes_left(n.split, x);
            const auto d = static_cast<std::size_t>(n.depth);
            if (left && tc.lambda[d] >= 0) v[static_cast<std::size_t>(tc.lambda[d])] = 1.0;
            node = left ? n.left : n.right;
        }
    };
    for (std::size_t t = 0; t < f.trees.size(); ++t) encode_tree(model.classifier.trees[t], f.trees[t]);
    for (std::size_t t = 0; t < f.iso_trees.size(); ++t) encode_tree(model.isolation->trees[t], f.iso_trees[t]);

    for (std::size_t i = 0; i < rq.features.size(); ++i) {
        const auto& fd = rq.features[i];
        const auto& fc = f.feature_cols[i];
        switch (fd.kind) {
            case FeatureKind::Numerical: {
                const auto& g = rq.grids[i];
                const auto mu = encode_numeric(g, x[i]);
                for (std::size_t j = 0; j < fc.size(); ++j) v[static_cast<std::size_t>(fc[j])] = mu[j];
                const double d = x[i] - rq.query.origin[i];
                if (rq.query.objective.norm == Norm::L0) {
                    const int jo = g.origin_level;
                    if (f.zneg[i] >= 0) v[static_cast<std::size_t>(f.zneg[i])] = mu[static_cast<std::size_t>(jo - 1)] < 1.0 ? 1.0 : 0.0;
                    if (f.zpos[i] >= 0) v[static_cast<std::size_t>(f.zpos[i])] = mu[static_cast<std::size_t>(jo)] > 0.0 ? 1.0 : 0.0;
                } else if (rq.query.objective.norm == Norm::L2) {
                    v[static_cast<std::size_t>(f.zpos[i])] = std::max(d, 0.0);
                    v[static_cast<std::size_t>(f.zneg[i])] = std::max(-d, 0.0);
                }
                break;
            }
            case FeatureKind::Binary: v[static_cast<std::size_t>(fc[0])] = x[i]; break;
            case FeatureKind::Categorical: v[static_cast<std::size_t>(fc[static_cast<std::size_t>(x[i])])] = 1.0; break;
            case FeatureKind::Ordinal:
            case FeatureKind::Discrete: {
                const auto level = *fd.level_of(x[i]);
                for (std::size_t j = 0; j < fc.size(); ++j)
                    v[static_cast<std::size_t>(fc[j])] = j + 1 <= level ? 1.0 : 0.0;
                break;
            }
        }
    }
    const auto scores = predict(model.classifier, x).scores;
    for (std::size_t c = 0; c < f.z.size(); ++c) v[static_cast<std::size_t>(f.z[c])] = scores[c];
    return v;
}

Point decode_point(const Formulation& f, std::span<const double> values) {
    const auto& rq = f.rq;
    Point x(rq.features.size(), 0.0);
    auto val = [&](int col) { return values[static_cast<std::size_t>(col)]; };
    for (std::size_t i = 0; i < rq.features.size(); ++i) {
        const auto& fd = rq.features[i];
        const auto& fc = f.feature_cols[i];
        switch (fd.kind) {
            case FeatureKind::Numerical: {
                std::vector<double> mu;
                for (int c : fc) mu.push_back(std::clamp(val(c), 0.0, 1.0));
                double xi = decode_numeric(rq.grids[i], mu);
                if (std::abs(xi - rq.query.origin[i]) <= l0_threshold(rq, static_cast<int>(i))) xi = rq.query.origin[i];
                x[i] = xi;
                break;
            }
            case FeatureKind::Binary: x[i] = val(fc[0]) >= 0.5 ? 1.0 : 0.0; break;
            case FeatureKind::Categorical: {
                std::size_t best = 0;
                for (std::size_t j = 1; j < fc.size(); ++j)
                    if (val(fc[j]) > val(fc[best])) best = j;
                x[i] = static_cast<double>(best);
                break;
            }
            case FeatureKind::Ordinal:
            case FeatureKind::Discrete: {
                std::size_t level = 0;
                for (int c : fc)
                    if (val(c) >= 0.5) ++level;
                x[i] = fd.values[level];
                break;
            }
        }
    }
    return x;
}

}  // namespace cfx
