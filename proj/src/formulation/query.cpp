#include "cfx/query.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cfx {

using detail::Json;
using detail::Reader;

std::string_view to_string(Norm n) {
    switch (n) {
        case Norm::L0: return "l0";
        case Norm::L1: return "l1";
        case Norm::L2: return "l2";
        case Norm::Piecewise: return "piecewise";
    }
    return "l1";
}

std::optional<Norm> parse_norm(std::string_view s) {
    if (s == "l0") return Norm::L0;
    if (s == "l1") return Norm::L1;
    if (s == "l2") return Norm::L2;
    if (s == "piecewise" || s == "piecewise-linear-convex") return Norm::Piecewise;
    return std::nullopt;
}

double PiecewiseCost::operator()(double v) const {
    if (v <= x.front()) return cost.front();
    if (v >= x.back()) return cost.back();
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double t = (v - x[k - 1]) / (x[k] - x[k - 1]);
    return cost[k - 1] + t * (cost[k] - cost[k - 1]);
}

double NumericGrid::at(int j) const {
    if (j <= 0) return 0.0;
    if (j > k()) return 1.0;
    return levels[static_cast<std::size_t>(j) - 1];
}

int NumericGrid::level_of(double threshold) const {
    const auto it = std::lower_bound(levels.begin(), levels.end(), threshold);
    if (it == levels.end() || *it != threshold) return -1;
    return static_cast<int>(it - levels.begin()) + 1;
}

namespace {

milp::Sense parse_sense(const Reader& r) {
    const auto s = r.as<std::string>();
    if (s == "<=" || s == "le") return milp::Sense::LessEqual;
    if (s == ">=" || s == "ge") return milp::Sense::GreaterEqual;
    if (s == "=" || s == "==" || s == "eq") return milp::Sense::Equal;
    r.fail("unknown sense '" + s + "'");
}

int feature_index(const Reader& r, const FeatureSpace& fs) {
    const auto name = r.as<std::string>();
    const auto i = fs.find(name);
    if (!i) r.fail("unknown feature '" + name + "'");
    return static_cast<int>(*i);
}

/// Category/level index of a literal value given by name or number.
int literal_value(const Reader& r, const FeatureDecl& f) {
    const auto& j = r.json();
    if (f.kind == FeatureKind::Binary) {
        if (j.is_boolean()) return j.get<bool>() ? 1 : 0;
        const int v = r.as<int>();
        if (v != 0 && v != 1) r.fail("binary literal must be 0 or 1");
        return v;
    }
    if (f.kind == FeatureKind::Numerical) r.fail("implications accept binary, categorical and ordinal features only");
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        const auto it = std::find(f.categories.begin(), f.categories.end(), name);
        if (it == f.categories.end()) r.fail("unknown category '" + name + "' for feature '" + f.name + "'");
        return static_cast<int>(it - f.categories.begin());
    }
    const int v = r.as<int>();
    if (v < 0 || v >= static_cast<int>(f.cardinality())) r.fail("category index out of range");
    return v;
}

Literal parse_literal(const Reader& r, const FeatureSpace& fs) {
    Literal lit;
    lit.feature = feature_index(r.at("feature"), fs);
    const auto& f = fs[static_cast<std::size_t>(lit.feature)];
    if (r.has("values")) {
        const auto vals = r.at("values");
        for (std::size_t k = 0; k < vals.size(); ++k) lit.values.push_back(literal_value(vals.at(k), f));
    } else {
        lit.values.push_back(literal_value(r.at("value"), f));
    }
    std::sort(lit.values.begin(), lit.values.end());
    lit.values.erase(std::unique(lit.values.begin(), lit.values.end()), lit.values.end());
    if (lit.values.empty()) r.fail("literal needs at least one value");
    return lit;
}

}  // namespace

double detail::feature_value(const Reader& r, const FeatureDecl& f) {
    const auto& j = r.json();
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (f.kind == FeatureKind::Categorical || f.kind == FeatureKind::Ordinal) {
            const auto it = std::find(f.categories.begin(), f.categories.end(), name);
            if (it == f.categories.end()) r.fail("unknown category '" + name + "'");
            const auto idx = static_cast<std::size_t>(it - f.categories.begin());
            return f.kind == FeatureKind::Ordinal ? f.values[idx] : static_cast<double>(idx);
        }
        r.fail("expected a number");
    }
    if (j.is_boolean() && f.kind == FeatureKind::Binary) return j.get<bool>() ? 1.0 : 0.0;
    return r.as<double>();
}

Query parse_query(std::string_view text, const Model& model) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DocumentError("", std::string("malformed document: ") + e.what());
    }
    const Reader r(doc, "");
    if (!r.is_object()) r.fail("expected an object");
    const auto& fs = model.features;
    Query q;

    const auto origin = r.at("origin");
    if (!origin.is_object()) origin.fail("expected an object mapping feature names to values");
    q.origin.assign(fs.size(), 0.0);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto& f = fs[i];
        const auto field = origin.at(f.name.c_str());
        q.origin[i] = detail::feature_value(field, f);
        if (!f.admits(q.origin[i])) field.fail("value outside the domain of " + std::string(to_string(f.kind)) + " feature");
    }
    for (const auto& [key, _] : origin.json().items())
        if (!fs.find(key)) throw DocumentError("/origin/" + key, "unknown feature");
    try {
        fs.check_point(q.origin);
    } catch (const std::invalid_argument& e) {
        origin.fail(e.what());
    }

    const auto tc = r.at("target_class");
    if (tc.json().is_string()) {
        const auto label = tc.as<std::string>();
        const auto& cls = model.classifier.classes;
        const auto it = std::find(cls.begin(), cls.end(), label);
        if (it == cls.end()) tc.fail("unknown class '" + label + "'");
        q.target_class = static_cast<int>(it - cls.begin());
    } else {
        q.target_class = tc.as<int>();
        if (q.target_class < 0 || q.target_class >= static_cast<int>(model.classifier.num_classes()))
            tc.fail("class index out of range");
    }

    q.objective.piecewise.assign(fs.size(), std::nullopt);
    if (r.has("objective")) {
        const auto obj = r.at("objective");
        if (obj.has("norm")) {
            const auto name = obj.get<std::string>("norm");
            const auto n = parse_norm(name);
            if (!n) obj.at("norm").fail("unknown norm '" + name + "'");
            q.objective.norm = *n;
        }
        if (obj.has("weights")) {
            const auto w = obj.at("weights");
            for (const auto& [key, _] : w.json().items()) {
                const auto entry = w.at(key.c_str());
                WeightOverride o;
                const auto idx = fs.find(key);
                if (!idx) entry.fail("unknown feature");
                o.feature = static_cast<int>(*idx);
                auto num = [&](const char* k, std::optional<double>& out) {
                    if (!entry.has(k)) return;
                    out = entry.get<double>(k);
                    if (*out < 0) entry.at(k).fail("cost weights must be nonnegative");
                };
                num("cost_down", o.cost_down);
                num("cost_up", o.cost_up);
                num("cost_true", o.cost_true);
                num("cost_false", o.cost_false);
                if (entry.has("category_costs")) {
                    o.category_costs = entry.get<std::vector<double>>("category_costs");
                    if (o.category_costs->size() != fs[*idx].categories.size() ||
                        fs[*idx].kind != FeatureKind::Categorical)
                        entry.at("category_costs").fail("expected one cost per category of a categorical feature");
                    for (double c : *o.category_costs)
                        if (c < 0) entry.at("category_costs").fail("cost weights must be nonnegative");
                }
                q.weight_overrides.push_back(std::move(o));
            }
        }
        if (obj.has("segments")) {
            const auto seg = obj.at("segments");
            for (const auto& [key, _] : seg.json().items()) {
                const auto entry = seg.at(key.c_str());
                const auto idx = fs.find(key);
                if (!idx) entry.fail("unknown feature");
                const auto kind = fs[*idx].kind;
                if (kind != FeatureKind::Numerical && !fs[*idx].is_ordered_grid())
                    entry.fail("piecewise costs apply to numerical, ordinal and discrete features");
                PiecewiseCost pc;
                for (std::size_t k = 0; k < entry.size(); ++k) {
                    const auto bp = entry.at(k).as<std::vector<double>>();
                    if (bp.size() != 2) entry.at(k).fail("breakpoint must be [x, cost]");
                    pc.x.push_back(bp[0]);
                    pc.cost.push_back(bp[1]);
                }
                if (pc.x.size() < 2 || pc.x.front() != 0.0 || pc.x.back() != 1.0)
                    entry.fail("breakpoints must start at x = 0 and end at x = 1");
                double prev_slope = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 1; k < pc.x.size(); ++k) {
                    if (!(pc.x[k] > pc.x[k - 1])) entry.fail("breakpoints must be strictly increasing in x");
                    const double slope = (pc.cost[k] - pc.cost[k - 1]) / (pc.x[k] - pc.x[k - 1]);
                    if (slope < prev_slope - 1e-12) entry.fail("non-convex breakpoint sequence");
                    prev_slope = slope;
                }
                for (double c : pc.cost)
                    if (!std::isfinite(c)) entry.fail("non-finite cost");
                q.objective.piecewise[*idx] = std::move(pc);
            }
        }
    }
    q.use_plausibility = r.get_or("use_plausibility", false);
    if (r.has("vote_margin")) {
        q.vote_margin = r.get<double>("vote_margin");
        if (!(*q.vote_margin > 0)) r.at("vote_margin").fail("vote margin must be positive");
    }
    if (r.has("epsilon")) {
        q.epsilon = r.get<double>("epsilon");
        if (!(*q.epsilon > 0 && *q.epsilon < 1)) r.at("epsilon").fail("epsilon must lie in (0,1)");
    }
    if (r.has("actionability_overrides")) {
        const auto list = r.at("actionability_overrides");
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto e = list.at(k);
            const int i = feature_index(e.at("feature"), fs);
            const auto a = e.get<std::string>("actionability");
            const auto act = parse_actionability(a);
            if (!act) e.at("actionability").fail("unknown actionability '" + a + "'");
            if (fs[static_cast<std::size_t>(i)].kind == FeatureKind::Categorical &&
                (*act == Actionability::Increasing || *act == Actionability::Decreasing))
                e.at("actionability").fail("categorical features have no order");
            q.actionability_overrides.emplace_back(i, *act);
        }
    }
    if (r.has("linear_constraints")) {
        const auto list = r.at("linear_constraints");
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto e = list.at(k);
            LinearConstraint lc;
            lc.name = e.get_or<std::string>("name", "lin" + std::to_string(k));
            const auto coeffs = e.at("coeffs");
            if (!coeffs.is_object()) coeffs.fail("expected an object mapping feature names to coefficients");
            for (const auto& [key, _] : coeffs.json().items()) {
                const auto idx = fs.find(key);
                if (!idx) coeffs.at(key.c_str()).fail("unknown feature");
                if (fs[*idx].kind == FeatureKind::Categorical)
                    coeffs.at(key.c_str()).fail("linear constraints cannot reference categorical features");
                lc.coeffs.emplace_back(static_cast<int>(*idx), coeffs.get<double>(key.c_str()));
            }
            lc.sense = parse_sense(e.at("sense"));
            lc.rhs = e.get<double>("rhs");
            q.linear_constraints.push_back(std::move(lc));
        }
    }
    if (r.has("implications")) {
        const auto list = r.at("implications");
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto e = list.at(k);
            q.implications.push_back({parse_literal(e.at("if"), fs), parse_literal(e.at("then"), fs)});
        }
    }
    if (r.has("resource_constraints")) {
        const auto list = r.at("resource_constraints");
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto e = list.at(k);
            ResourceConstraint rc;
            rc.name = e.get_or<std::string>("name", "res" + std::to_string(k));
            const auto terms = e.at("terms");
            if (!terms.is_object()) terms.fail("expected an object mapping column symbols to coefficients");
            for (const auto& [key, _] : terms.json().items())
                rc.terms.emplace_back(key, terms.get<double>(key.c_str()));
            rc.sense = parse_sense(e.at("sense"));
            rc.rhs = e.get<double>("rhs");
            q.resource_constraints.push_back(std::move(rc));
        }
    }
    return q;
}

Query load_query(const std::string& file, const Model& model) {
    std::ifstream in(file);
    if (!in) throw DocumentError(file, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_query(ss.str(), model);
}

std::string serialize_query(const Query& q, const Model& model) {
    Json j;
    Json origin = Json::object();
    for (std::size_t i = 0; i < model.features.size(); ++i) {
        const auto& f = model.features[i];
        const double v = q.origin[i];
        if (f.kind == FeatureKind::Categorical) origin[f.name] = f.categories.at(static_cast<std::size_t>(v));
        else if (f.kind == FeatureKind::Ordinal) origin[f.name] = f.categories.at(*f.level_of(v));
        else if (f.kind == FeatureKind::Binary) origin[f.name] = static_cast<int>(v);
        else origin[f.name] = v;
    }
    j["origin"] = std::move(origin);
    j["target_class"] = q.target_class;
    j["objective"] = {{"norm", std::string(to_string(q.objective.norm))}};
    j["use_plausibility"] = q.use_plausibility;
    if (q.vote_margin) j["vote_margin"] = *q.vote_margin;
    if (q.epsilon) j["epsilon"] = *q.epsilon;
    return j.dump(2) + "\n";
}

ResolvedQuery resolve_query(const Model& model, const Query& query) {
    ResolvedQuery rq;
    rq.query = query;
    const auto& fs0 = model.features;
    if (query.origin.size() != fs0.size()) throw std::invalid_argument("origin has the wrong number of features");
    fs0.check_point(query.origin);
    if (query.target_class < 0 || query.target_class >= static_cast<int>(model.classifier.num_classes()))
        throw std::invalid_argument("target class not in the classifier's classes");
    if (rq.query.objective.piecewise.size() != fs0.size()) rq.query.objective.piecewise.resize(fs0.size());

    std::vector<FeatureDecl> decls(fs0.begin(), fs0.end());
    for (const auto& [i, a] : query.actionability_overrides) {
        if (decls.at(static_cast<std::size_t>(i)).kind == FeatureKind::Categorical &&
            (a == Actionability::Increasing || a == Actionability::Decreasing))
            throw std::invalid_argument("categorical features have no order");
        decls[static_cast<std::size_t>(i)].actionability = a;
    }
    for (const auto& o : query.weight_overrides) {
        auto& d = decls.at(static_cast<std::size_t>(o.feature));
        if (o.cost_down) d.cost_down = *o.cost_down;
        if (o.cost_up) d.cost_up = *o.cost_up;
        if (o.cost_true) d.cost_true = *o.cost_true;
        if (o.cost_false) d.cost_false = *o.cost_false;
        if (o.category_costs) d.category_costs = *o.category_costs;
    }
    rq.features = FeatureSpace(std::move(decls));

    rq.plausibility = query.use_plausibility;
    if (rq.plausibility && !model.isolation)
        throw std::invalid_argument("plausibility requested but the model has no isolation forest (missing delta)");

    const Norm norm = query.objective.norm;
    const bool augment = norm != Norm::L2;
    rq.grids.resize(fs0.size());
    double gmin = 1.0;
    bool any_numeric = false;
    for (std::size_t i = 0; i < fs0.size(); ++i) {
        if (fs0[i].kind != FeatureKind::Numerical) continue;
        any_numeric = true;
        auto& g = rq.grids[i];
        const auto split = collect_split_levels(model, static_cast<int>(i), rq.plausibility);
        std::vector<std::pair<double, char>> lv;
        for (double v : split) lv.emplace_back(v, 1);
        const double xo = query.origin[i];
        if (augment && xo > 0.0 && xo < 1.0) lv.emplace_back(xo, 0);
        if (norm == Norm::Piecewise && rq.query.objective.piecewise[i])
            for (double b : rq.query.objective.piecewise[i]->x)
                if (b > 0.0 && b < 1.0) lv.emplace_back(b, 0);
        std::sort(lv.begin(), lv.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : a.second > b.second;
        });
        for (const auto& [v, s] : lv) {
            if (!g.levels.empty() && g.levels.back() == v) continue;
            g.levels.push_back(v);
            g.is_split.push_back(s);
        }
        if (xo == 0.0) g.origin_level = 0;
        else if (xo == 1.0) g.origin_level = g.k() + 1;
        else g.origin_level = g.level_of(xo);
        for (int j = 0; j <= g.k(); ++j) gmin = std::min(gmin, g.gap(j));
    }
    rq.epsilon = query.epsilon ? *query.epsilon : (any_numeric ? std::min(1e-4, gmin / 10.0) : 1e-4);
    rq.eta = query.vote_margin ? *query.vote_margin : 1e-6 * model.classifier.total_weight();

    rq.origin_class = predict(model.classifier, query.origin).cls;
    if (rq.origin_class == query.target_class)
        rq.warnings.push_back("origin is already classified as the target class");
    return rq;
}

std::vector<double> encode_numeric(const NumericGrid& g, double x) {
    std::vector<double> mu(static_cast<std::size_t>(g.k()) + 1, 0.0);
    for (int j = 0; j <= g.k(); ++j) {
        if (x >= g.at(j + 1)) mu[j] = 1.0;
        else if (x > g.at(j)) mu[j] = (x - g.at(j)) / g.gap(j);
        else break;
    }
    return mu;
}

double decode_numeric(const NumericGrid& g, std::span<const double> mu) {
    double x = 0.0;
    for (int j = 0; j <= g.k(); ++j) x += g.gap(j) * mu[j];
    return std::clamp(x, 0.0, 1.0);
}

double l0_threshold(const ResolvedQuery& rq, int i) {
    const auto& g = rq.grids.at(static_cast<std::size_t>(i));
    double w = 1.0;
    for (int j = 0; j <= g.k(); ++j) w = std::min(w, g.gap(j));
    return 0.5 * rq.epsilon * w;
}

double feature_cost(const ResolvedQuery& rq, int i, double value) {
    const auto& f = rq.features[static_cast<std::size_t>(i)];
    const double xo = rq.query.origin[static_cast<std::size_t>(i)];
    const Norm norm = rq.query.objective.norm;
    const auto& pw = rq.query.objective.piecewise[static_cast<std::size_t>(i)];
    auto ordered = [&](double d, bool changed) {
        switch (norm) {
            case Norm::L0: return changed ? (d < 0 ? f.cost_down : f.cost_up) : 0.0;
            case Norm::L2: return d < 0 ? f.cost_down * d * d : f.cost_up * d * d;
            case Norm::Piecewise:
                if (pw) return (*pw)(value);
                [[fallthrough]];
            case Norm::L1: return d < 0 ? -f.cost_down * d : f.cost_up * d;
        }
        return 0.0;
    };
    switch (f.kind) {
        case FeatureKind::Numerical: {
            const double d = value - xo;
            return ordered(d, std::abs(d) > l0_threshold(rq, i));
        }
        case FeatureKind::Ordinal:
        case FeatureKind::Discrete: {
            const double d = value - xo;
            return ordered(d, f.level_of(value) != f.level_of(xo));
        }
        case FeatureKind::Binary:
            if (value == xo) return 0.0;
            return value > 0.5 ? f.cost_true : f.cost_false;
        case FeatureKind::Categorical: {
            const auto c = static_cast<std::size_t>(value);
            return c == static_cast<std::size_t>(xo) ? 0.0 : f.category_costs[c];
        }
    }
    return 0.0;
}

}  // namespace cfx
