#include "cfx/explain.hpp"

#include "json_util.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace cfx {

using detail::Json;
using detail::Reader;

Certification certify(const Model& model, int target_class, double vote_margin, bool plausibility,
                      std::span<const double> x) {
    Certification c;
    c.vote_margin = vote_margin;
    const auto p = predict(model.classifier, x);
    c.predicted_class = p.cls;
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.scores.size(); ++k)
        if (static_cast<int>(k) != target_class) other = std::max(other, p.scores[k]);
    c.margin = p.scores[static_cast<std::size_t>(target_class)] - other;
    bool ok = p.cls == target_class;
    if (plausibility && model.isolation) {
        c.isolation_depth = isolation_avg_depth(*model.isolation, x);
        ok = ok && *c.isolation_depth >= model.isolation->delta - 1e-9;
    }
    c.routing_consistent = true;
    c.verified = ok;
    return c;
}

bool routing_consistent(const Model& model, const Formulation& f, std::span<const double> values,
                        std::span<const double> x) {
    auto check = [&](const Tree& t, const TreeColumns& tc) {
        const int leaf = route(t, x);
        return values[static_cast<std::size_t>(tc.y[static_cast<std::size_t>(leaf)])] >= 0.5;
    };
    for (std::size_t t = 0; t < f.trees.size(); ++t)
        if (!check(model.classifier.trees[t], f.trees[t])) return false;
    for (std::size_t t = 0; t < f.iso_trees.size(); ++t)
        if (!check(model.isolation->trees[t], f.iso_trees[t])) return false;
    return true;
}

void fill_costs(const ResolvedQuery& rq, const Point& x, Explanation& e) {
    e.objective = 0.0;
    e.deltas.clear();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = feature_cost(rq, static_cast<int>(i), x[i]);
        e.objective += c;
        if (x[i] != rq.query.origin[i] || c != 0.0)
            e.deltas.push_back({static_cast<int>(i), rq.query.origin[i], x[i], c});
    }
}

Explanation explain(const Model& model, const Query& query, const ExplainOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    ResolvedQuery rq = resolve_query(model, query);
    Explanation e;
    e.target_class = query.target_class;
    e.origin_class = rq.origin_class;
    e.origin = query.origin;
    e.plausibility = rq.plausibility;
    e.warnings = rq.warnings;

    for (int attempt = 0;; ++attempt) {
        const Formulation f = assemble(model, rq);
        e.formulation = {f.instance.num_columns(), f.instance.num_rows(), f.nnz(), f.n_vertices, rq.epsilon, rq.eta};
        std::vector<std::vector<double>> starts;
        if (opts.warm_start) {
            auto enc = encode_point(model, f, query.origin);
            if (f.instance.max_violation(enc) <= 1e-9) starts.push_back(std::move(enc));
        }
        const auto sol = milp::solve(f.instance, opts.solver, starts);
        e.status = sol.status;
        e.stats = sol.stats;
        e.surrogate_objective = sol.objective;
        e.counterfactual.reset();
        e.deltas.clear();
        e.objective = 0.0;
        e.certification = Certification{.vote_margin = rq.eta};
        if (!sol.has_values()) break;

        const Point x = decode_point(f, sol.values);
        auto cert = certify(model, query.target_class, rq.eta, rq.plausibility, x);
        cert.routing_consistent = routing_consistent(model, f, sol.values, x);
        cert.verified = cert.verified && cert.routing_consistent;
        e.counterfactual = x;
        e.certification = cert;
        fill_costs(f.rq, x, e);
        if (cert.verified) break;
        if (attempt == opts.max_eta_retries) {
            e.warnings.push_back("counterfactual failed post-verification after " + std::to_string(attempt) +
                                 " vote-margin doublings");
            break;
        }
        ++e.eta_retries;
        rq.eta *= 2.0;
    }
    if (e.eta_retries > 0)
        e.warnings.push_back("vote margin doubled " + std::to_string(e.eta_retries) + " time(s) to pass verification");
    e.stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return e;
}

namespace {

Json value_json(const FeatureDecl& f, double v) {
    switch (f.kind) {
        case FeatureKind::Categorical: return f.categories.at(static_cast<std::size_t>(v));
        case FeatureKind::Ordinal: return f.categories.at(*f.level_of(v));
        case FeatureKind::Binary: return static_cast<int>(v);
        default: return v;
    }
}

Json point_json(const Model& m, const Point& x) {
    Json j = Json::object();
    for (std::size_t i = 0; i < x.size(); ++i) j[m.features[i].name] = value_json(m.features[i], x[i]);
    return j;
}

Json finite(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

}  // namespace

std::string explanation_json(const Model& model, const Explanation& e, bool with_timing) {
    const auto& classes = model.classifier.classes;
    Json j;
    j["status"] = std::string(milp::to_string(e.status));
    j["target_class"] = e.target_class;
    j["target_label"] = classes.at(static_cast<std::size_t>(e.target_class));
    j["origin_class"] = e.origin_class;
    j["origin_label"] = classes.at(static_cast<std::size_t>(e.origin_class));
    j["plausibility"] = e.plausibility;
    j["origin"] = point_json(model, e.origin);
    if (e.counterfactual) {
        j["objective"] = e.objective;
        j["counterfactual"] = point_json(model, *e.counterfactual);
        Json deltas = Json::array();
        for (const auto& d : e.deltas) {
            const auto& f = model.features[static_cast<std::size_t>(d.feature)];
            deltas.push_back({{"feature", f.name},
                              {"from", value_json(f, d.from)},
                              {"to", value_json(f, d.to)},
                              {"cost", d.cost}});
        }
        j["deltas"] = std::move(deltas);
        const auto& c = e.certification;
        Json cert{{"predicted_class", c.predicted_class},
                  {"margin", c.margin},
                  {"vote_margin", c.vote_margin},
                  {"routing_consistent", c.routing_consistent},
                  {"verified", c.verified}};
        if (c.isolation_depth) {
            cert["isolation_depth"] = *c.isolation_depth;
            cert["delta"] = model.isolation->delta;
        }
        j["certification"] = std::move(cert);
    } else {
        j["objective"] = nullptr;
        j["counterfactual"] = nullptr;
        j["deltas"] = Json::array();
    }
    Json solver{{"nodes", e.stats.nodes},
                {"lp_iterations", e.stats.lp_iterations},
                {"root_bound", finite(e.stats.root_bound)},
                {"best_bound", finite(e.stats.best_bound)},
                {"gap", finite(e.stats.gap)},
                {"pwl_tolerance", e.stats.pwl_tolerance},
                {"surrogate_objective", finite(e.surrogate_objective)},
                {"eta_retries", e.eta_retries}};
    if (e.cells_evaluated) solver["cells_evaluated"] = *e.cells_evaluated;
    if (with_timing) solver["wall_time"] = e.stats.wall_time;
    j["solver"] = std::move(solver);
    j["formulation"] = {{"columns", e.formulation.columns},
                        {"rows", e.formulation.rows},
                        {"nnz", e.formulation.nnz},
                        {"n_vertices", e.formulation.n_vertices},
                        {"epsilon", e.formulation.epsilon},
                        {"vote_margin", e.formulation.vote_margin}};
    j["warnings"] = e.warnings;
    return j.dump(2) + "\n";
}

std::vector<std::string> check_explanation(const Model& model, std::string_view document) {
    Json doc;
    try {
        doc = Json::parse(document);
    } catch (const Json::parse_error& ex) {
        throw DocumentError("", std::string("malformed document: ") + ex.what());
    }
    const Reader r(doc, "");
    std::vector<std::string> issues;
    const auto status = r.get<std::string>("status");
    const int target = r.get<int>("target_class");
    if (target < 0 || target >= static_cast<int>(model.classifier.num_classes()))
        r.at("target_class").fail("class index out of range");
    if (r.at("counterfactual").is_null()) {
        if (status == "optimal") issues.push_back("/counterfactual: optimal status without a counterfactual");
        return issues;
    }
    const auto cf = r.at("counterfactual");
    const auto& fs = model.features;
    Point x(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) x[i] = detail::feature_value(cf.at(fs[i].name.c_str()), fs[i]);
    try {
        fs.check_point(x);
    } catch (const std::invalid_argument& ex) {
        issues.push_back(std::string("/counterfactual: ") + ex.what());
        return issues;
    }
    const auto cr = r.at("certification");
    const bool plaus = r.get_or("plausibility", false);
    const auto cert = certify(model, target, cr.get<double>("vote_margin"), plaus, x);
    if (cert.predicted_class != target)
        issues.push_back("/certification: counterfactual predicts class " + std::to_string(cert.predicted_class) +
                         ", not " + std::to_string(target));
    if (cr.get<int>("predicted_class") != cert.predicted_class)
        issues.push_back("/certification/predicted_class: recorded class differs from re-prediction");
    if (std::abs(cr.get<double>("margin") - cert.margin) > 1e-9)
        issues.push_back("/certification/margin: recorded margin differs from re-computed margin");
    if (plaus) {
        if (!model.isolation) {
            issues.push_back("/plausibility: model has no isolation forest");
        } else {
            if (*cert.isolation_depth < model.isolation->delta - 1e-9)
                issues.push_back("/certification/isolation_depth: average depth below delta");
            if (std::abs(cr.get<double>("isolation_depth") - *cert.isolation_depth) > 1e-9)
                issues.push_back("/certification/isolation_depth: recorded depth differs from re-computed depth");
        }
    }
    if (!cr.get<bool>("verified")) issues.push_back("/certification/verified: explanation is not verified");
    const auto deltas = r.at("deltas");
    double total = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        const auto d = deltas.at(k);
        const auto name = d.get<std::string>("feature");
        const auto idx = fs.find(name);
        if (!idx) d.at("feature").fail("unknown feature");
        if (detail::feature_value(d.at("to"), fs[*idx]) != x[*idx])
            issues.push_back(d.path() + "/to: differs from the counterfactual");
        total += d.get<double>("cost");
    }
    if (std::abs(total - r.get<double>("objective")) > 1e-6)
        issues.push_back("/deltas: cost shares do not sum to the objective");
    return issues;
}

}  // namespace cfx
