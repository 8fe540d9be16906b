#include "doctest.h"

#include "cfx/explain.hpp"
#include "cfx/milp/lp_format.hpp"
#include "cfx/synth.hpp"
#include "support/models.hpp"

#include <algorithm>

using namespace cfx;
using namespace cfx::testing;

namespace {

int count_rows(const milp::Instance& inst, std::string_view prefix) {
    int n = 0;
    for (const auto& r : inst.rows()) n += r.name.starts_with(prefix);
    return n;
}

int count_kind(const Formulation& f, SymbolKind kind) {
    int n = 0;
    for (std::size_t j = 0; j < f.registry.size(); ++j) n += f.registry.symbol(static_cast<int>(j)).kind == kind;
    return n;
}

struct Solved {
    Formulation f;
    milp::Solution sol;
};

Solved solve_query(const Model& m, const Query& q) {
    Solved s{assemble(m, resolve_query(m, q)), {}};
    s.sol = milp::solve(s.f.instance);
    return s;
}

double value(const Solved& s, const Symbol& sym) {
    return s.sol.values[static_cast<std::size_t>(s.f.registry.at(sym))];
}

}  // namespace

TEST_CASE("depth-1 tree gives 4 rows, 1 lambda and 3 y") {
    const Model m = parse_model(kStumpModel);
    const Formulation f = assemble_tree_structure(m.classifier);
    CHECK(f.instance.num_rows() == 4);
    CHECK(count_kind(f, SymbolKind::Lambda) == 1);
    CHECK(count_kind(f, SymbolKind::Y) == 3);
    CHECK(f.instance.num_columns() == 4);
    CHECK(f.n_vertices == 3);
}

TEST_CASE("100 trees of depth 5 give 500 binary lambda columns") {
    synth::Rng rng(1);
    Model m;
    m.features = synth::make_features({.numerical = 10});
    m.classifier = synth::make_forest(m.features, {.trees = 100, .depth = 5}, rng);
    validate_model(m);
    Query q = make_query(m, *synth::random_origin(m, 1, rng), 1);
    const Formulation f = assemble(m, resolve_query(m, q));
    int lambdas = 0;
    for (const auto& c : f.instance.columns())
        if (c.name.starts_with("lambda_")) {
            ++lambdas;
            CHECK(c.integer);
        }
    CHECK(lambdas == 500);
}

TEST_CASE("lambda fixing yields integral y on small trees") {
    synth::Rng rng(2);
    const auto fs = synth::make_features({.numerical = 3});
    for (int t = 0; t < 10; ++t) {
        const Ensemble e = synth::make_forest(fs, {.trees = 1, .depth = 1 + t % 5}, rng);
        Formulation f = assemble_tree_structure(e);
        const auto& tc = f.trees[0];
        for (int k = 0; k < 20; ++k) {
            milp::Instance inst = f.instance;
            for (int col : tc.lambda)
                if (col >= 0) {
                    const double v = static_cast<double>(rng() & 1U);
                    inst.column(col).lower = inst.column(col).upper = v;
                }
            const auto r = milp::lp_relax(inst);
            REQUIRE(r.status == milp::Status::Optimal);
            int leaves = 0;
            for (std::size_t v = 0; v < tc.y.size(); ++v) {
                const double y = r.values[static_cast<std::size_t>(tc.y[v])];
                CHECK(std::min(std::abs(y), std::abs(y - 1.0)) <= 1e-7);
                if (e.trees[0].nodes[v].is_leaf() && y > 0.5) ++leaves;
            }
            CHECK(leaves == 1);
        }
    }
}

TEST_CASE("one margin row per non-target class") {
    Tree t = make_tree({inner(NumericSplit{0, 0.5}, 1, 2), leaf({1, 0, 0}), leaf({0, 0.4, 0.6})});
    const Model m = make_model({numerical("a")}, {t}, 3);
    const Formulation f = assemble(m, resolve_query(m, make_query(m, {0.3}, 2)));
    CHECK(count_rows(f.instance, "margin_") == 2);
    CHECK(count_rows(f.instance, "score_") == 3);
}

TEST_CASE("margin row forces the target leaf") {
    const Model m = parse_model(kStumpModel);
    const auto s = solve_query(m, make_query(m, {0.3}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Y, 0, 2}) == doctest::Approx(1.0));
    CHECK(value(s, {SymbolKind::Z, 1, 0}) >= value(s, {SymbolKind::Z, 0, 0}) + 1e-6 - 1e-12);
}

TEST_CASE("numerical split forced right decodes above the threshold") {
    const Model m = parse_model(kStumpModel);
    Query q = make_query(m, {0.3}, 1, Norm::L2);
    const auto rq = resolve_query(m, q);
    REQUIRE(rq.grids[0].k() == 1);
    const auto s = solve_query(m, q);
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Mu, 0, 0}) == 1.0);
    CHECK(value(s, {SymbolKind::Mu, 0, 1}) >= rq.epsilon - 1e-12);
    const Point x = decode_point(s.f, s.sol.values);
    CHECK(x[0] == doctest::Approx(0.5 + 0.5 * rq.epsilon).epsilon(1e-12));
    CHECK(x[0] > 0.5);
}

TEST_CASE("numerical split forced left decodes at or below the threshold") {
    Tree t = make_tree({inner(NumericSplit{0, 0.5}, 1, 2), leaf({0, 1}), leaf({1, 0})});
    const Model m = make_model({numerical("a")}, {t});
    Query q = make_query(m, {0.8}, 1, Norm::L2);
    const auto s = solve_query(m, q);
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Mu, 0, 1}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(decode_point(s.f, s.sol.values)[0] <= 0.5 + 1e-9);
}

TEST_CASE("binary split follows the forced path") {
    const Model right = make_model({binary("b")}, {stump(BinarySplit{0})});
    auto s = solve_query(right, make_query(right, {0.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(decode_point(s.f, s.sol.values)[0] == 1.0);

    const Model left = make_model({binary("b")}, {make_tree({inner(BinarySplit{0}, 1, 2), leaf({0, 1}), leaf({1, 0})})});
    s = solve_query(left, make_query(left, {1.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(decode_point(s.f, s.sol.values)[0] == 0.0);
}

TEST_CASE("conflicting paths across trees are infeasible") {
    Tree t1 = make_tree({inner(NumericSplit{0, 0.5}, 1, 2), leaf({0, 1}), leaf({1, 0})});
    Tree t2 = stump(NumericSplit{0, 0.5});
    const Model m = make_model({numerical("a")}, {t1, t2});
    const auto s = solve_query(m, make_query(m, {0.3}, 1));
    CHECK(s.sol.status == milp::Status::Infeasible);
    const Explanation e = explain(m, make_query(m, {0.3}, 1));
    CHECK(e.status == milp::Status::Infeasible);
    CHECK(!e.counterfactual);
}

TEST_CASE("category split forced right selects the category") {
    const Model m = make_model({categorical("c", 3)}, {stump(CategorySplit{0, 2})});
    const auto s = solve_query(m, make_query(m, {0.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Nu, 0, 2}) == doctest::Approx(1.0));
    CHECK(value(s, {SymbolKind::Nu, 0, 0}) == doctest::Approx(0.0));
    CHECK(value(s, {SymbolKind::Nu, 0, 1}) == doctest::Approx(0.0));
}

TEST_CASE("untouched categorical feature stays at its origin category") {
    const Model m = make_model({numerical("a"), categorical("c", 3)}, {stump(NumericSplit{0, 0.5})});
    const auto s = solve_query(m, make_query(m, {0.3, 1.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Nu, 1, 1}) == doctest::Approx(1.0));
    CHECK(decode_point(s.f, s.sol.values)[1] == 1.0);
}

TEST_CASE("ordinal split forced right raises the level") {
    const Model m = make_model({ordinal("o", 3)}, {stump(NumericSplit{0, 0.25})});
    const auto s = solve_query(m, make_query(m, {0.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Omega, 0, 1}) == doctest::Approx(1.0));
    CHECK(decode_point(s.f, s.sol.values)[0] >= 0.5);

    std::vector<double> zeros(s.f.instance.num_columns(), 0.0);
    CHECK(decode_point(s.f, zeros)[0] == 0.0);
}

TEST_CASE("category set split") {
    const Model m = make_model({categorical("c", 4)}, {stump(CategorySetSplit{0, {1, 3}})});
    auto s = solve_query(m, make_query(m, {0.0}, 1));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Nu, 0, 1}) + value(s, {SymbolKind::Nu, 0, 3}) == doctest::Approx(1.0));

    s = solve_query(m, make_query(m, {3.0}, 0));
    REQUIRE(s.sol.status == milp::Status::Optimal);
    CHECK(value(s, {SymbolKind::Nu, 0, 1}) == doctest::Approx(0.0));
    CHECK(value(s, {SymbolKind::Nu, 0, 3}) == doctest::Approx(0.0));
}

TEST_CASE("oblique big-M constants") {
    const BigM m = oblique_big_m(ObliqueSplit{{{0, 1.0}, {1, 1.0}}, 0.5});
    CHECK(m.plus == doctest::Approx(1.5));
    CHECK(m.minus == doctest::Approx(0.5));
    const BigM n = oblique_big_m(ObliqueSplit{{{0, 2.0}, {1, -1.0}}, 0.25});
    CHECK(n.plus == doctest::Approx(1.75));
    CHECK(n.minus == doctest::Approx(1.25));
}

TEST_CASE("oblique rows are vacuous off the path") {
    const ObliqueSplit o{{{0, 1.0}, {1, 1.0}}, 0.5};
    const Model m = make_model({numerical("a"), numerical("b")}, {stump(o)});
    const Formulation f = assemble(m, resolve_query(m, make_query(m, {0.1, 0.1}, 1)));
    std::vector<int> rows;
    for (int i = 0; i < static_cast<int>(f.instance.num_rows()); ++i)
        if (f.instance.row(i).name.starts_with("oblique_")) rows.push_back(i);
    REQUIRE(rows.size() == 2);
    synth::Rng rng(9);
    for (int k = 0; k < 200; ++k) {
        const Point x = synth::random_point(m.features, rng);
        auto v = encode_point(m, f, x);
        v[static_cast<std::size_t>(f.trees[0].y[1])] = 0.0;
        v[static_cast<std::size_t>(f.trees[0].y[2])] = 0.0;
        for (int i : rows) {
            const auto& r = f.instance.row(i);
            double act = 0.0;
            for (const auto& t : r.terms) act += t.coef * v[static_cast<std::size_t>(t.col)];
            if (r.sense == milp::Sense::LessEqual) CHECK(act <= r.rhs + 1e-12);
            else CHECK(act >= r.rhs - 1e-12);
        }
    }
}

TEST_CASE("oblique split solved to the cheapest side") {
    const ObliqueSplit o{{{0, 1.0}, {1, 1.0}}, 0.5};
    const Model m = make_model({numerical("a"), numerical("b")}, {stump(o)});
    const Explanation e = explain(m, make_query(m, {0.1, 0.2}, 1));
    REQUIRE(e.status == milp::Status::Optimal);
    CHECK(e.certification.verified);
    CHECK((*e.counterfactual)[0] + (*e.counterfactual)[1] > 0.5);
    CHECK(e.objective == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("l1 feature costs") {
    const Model m = parse_model(kStumpModel);
    auto rq = resolve_query(m, make_query(m, {0.3}, 1));
    CHECK(feature_cost(rq, 0, 0.5) == doctest::Approx(0.2));

    Model w = m;
    FeatureDecl f = w.features[0];
    f.cost_down = 2.0;
    f.cost_up = 1.0;
    w.features = FeatureSpace({f});
    rq = resolve_query(w, make_query(w, {0.5}, 1));
    CHECK(feature_cost(rq, 0, 0.3) == doctest::Approx(0.4));
    CHECK(feature_cost(rq, 0, 0.6) == doctest::Approx(0.1));
}

TEST_CASE("origin level is inserted for l0 and l1 but not l2") {
    const Model m = parse_model(kStumpModel);
    CHECK(resolve_query(m, make_query(m, {0.3}, 1, Norm::L1)).grids[0].k() == 2);
    CHECK(resolve_query(m, make_query(m, {0.3}, 1, Norm::L0)).grids[0].k() == 2);
    CHECK(resolve_query(m, make_query(m, {0.3}, 1, Norm::L2)).grids[0].k() == 1);
    const auto rq = resolve_query(m, make_query(m, {0.5}, 1, Norm::L1));
    CHECK(rq.grids[0].k() == 1);
    CHECK(rq.grids[0].origin_level == 1);
}

TEST_CASE("default epsilon and vote margin") {
    const Model m = make_model({numerical("a")}, {stump(NumericSplit{0, 0.5}), stump(NumericSplit{0, 0.5003})});
    const auto rq = resolve_query(m, make_query(m, {0.3}, 1, Norm::L2));
    CHECK(rq.epsilon == doctest::Approx(0.00003));
    CHECK(rq.eta == doctest::Approx(2e-6));
    const auto wide = resolve_query(parse_model(kStumpModel), make_query(m, {0.3}, 1, Norm::L2));
    CHECK(wide.epsilon == doctest::Approx(1e-4));
}

TEST_CASE("plausibility threshold restricts admissible leaves") {
    // classifier: class 1 above 0.2; isolation: depth 2 only above 0.5
    Model m = make_model({numerical("a")}, {stump(NumericSplit{0, 0.2})});
    Ensemble iso;
    iso.kind = EnsembleKind::Isolation;
    iso.correction = false;
    iso.delta = 2.0;
    iso.trees.push_back(make_tree({inner(NumericSplit{0, 0.5}, 1, 2), iso_leaf(), inner(NumericSplit{0, 0.7}, 3, 4),
                                   iso_leaf(), iso_leaf()}));
    m.isolation = iso;
    validate_model(m);
    Query q = make_query(m, {0.1}, 1);
    q.use_plausibility = true;
    const Explanation e = explain(m, q);
    REQUIRE(e.status == milp::Status::Optimal);
    CHECK((*e.counterfactual)[0] > 0.5);
    CHECK(*e.certification.isolation_depth >= 2.0);

    m.isolation->delta = 0.0;
    const Explanation free = explain(m, q);
    q.use_plausibility = false;
    const Explanation plain = explain(m, q);
    REQUIRE(free.status == milp::Status::Optimal);
    // isolation levels refine the grid, so only the strictness offset differs
    CHECK((*free.counterfactual)[0] < 0.5);
    CHECK(std::abs(free.objective - plain.objective) <= 1e-4);
    CHECK(plain.objective < e.objective);
}

TEST_CASE("increasing actionability blocks downward moves") {
    Tree t = make_tree({inner(NumericSplit{0, 0.3}, 1, 2), leaf({0, 1}), leaf({1, 0})});
    Model m = make_model({numerical("age")}, {t});
    Query q = make_query(m, {0.4}, 1);
    q.actionability_overrides.push_back({0, Actionability::Increasing});
    const auto rq = resolve_query(m, q);
    const Formulation f = assemble(m, rq);
    // μ up to the origin level pinned at 1
    for (int j = 0; j <= rq.grids[0].origin_level - 1; ++j)
        CHECK(f.instance.column(f.registry.at({SymbolKind::Mu, 0, j})).lower == 1.0);
    CHECK(milp::solve(f.instance).status == milp::Status::Infeasible);

    q.actionability_overrides = {{0, Actionability::Decreasing}};
    const Explanation e = explain(m, q);
    REQUIRE(e.status == milp::Status::Optimal);
    CHECK(e.objective == doctest::Approx(0.1));
}

TEST_CASE("fixed binary feature reproduces the origin encoding") {
    const Model m = make_model({binary("sex"), numerical("a")},
                               {stump(BinarySplit{0}), stump(NumericSplit{1, 0.5})});
    Query q = make_query(m, {0.0, 0.2}, 1);
    q.actionability_overrides.push_back({0, Actionability::Fixed});
    const Formulation f = assemble(m, resolve_query(m, q));
    const auto& c = f.instance.column(f.registry.at({SymbolKind::X, 0, 0}));
    CHECK(c.lower == 0.0);
    CHECK(c.upper == 0.0);
    // class 1 needs both trees to vote for it
    CHECK(explain(m, q).status == milp::Status::Infeasible);
}

TEST_CASE("logical implication between binary features") {
    const Model m = make_model({binary("x1"), binary("x2")}, {stump(BinarySplit{0})});
    Query q = make_query(m, {0.0, 0.0}, 1);
    q.implications.push_back({{0, {1}}, {1, {1}}});
    const Explanation e = explain(m, q);
    REQUIRE(e.status == milp::Status::Optimal);
    CHECK((*e.counterfactual)[0] == 1.0);
    CHECK((*e.counterfactual)[1] == 1.0);
    CHECK(e.objective == doctest::Approx(2.0));
}

TEST_CASE("linear constraint over numerical features") {
    const Model m = make_model({numerical("a"), numerical("b")},
                               {stump(NumericSplit{0, 0.5}), stump(NumericSplit{1, 0.5})});
    Query q = make_query(m, {0.3, 0.8}, 1);
    // a may only rise as far as b falls
    q.linear_constraints.push_back({"budget", {{0, 1.0}, {1, 1.0}}, milp::Sense::LessEqual, 0.0});
    const Explanation e = explain(m, q);
    REQUIRE(e.status == milp::Status::Optimal);
    const Point& x = *e.counterfactual;
    CHECK(x[0] - 0.3 + x[1] - 0.8 <= 1e-9);
    CHECK(x[1] > 0.5);
    CHECK(x[1] <= 0.8 - 0.2 + 1e-9);
}

TEST_CASE("resource constraint names registry columns") {
    const Model m = make_model({binary("x1"), binary("x2")}, {stump(BinarySplit{0})});
    Query q = make_query(m, {0.0, 0.0}, 1);
    q.resource_constraints.push_back({"res", {{"x_f0", 1.0}, {"x_f1", -1.0}}, milp::Sense::LessEqual, 0.0});
    const Explanation e = explain(m, q);
    REQUIRE(e.status == milp::Status::Optimal);
    CHECK((*e.counterfactual)[1] == 1.0);
    q.resource_constraints[0].terms[0].first = "x_f9";
    CHECK_THROWS_AS(explain(m, q), std::invalid_argument);
}

TEST_CASE("single tree explanation is the nearest target leaf region") {
    Tree t = make_tree({inner(NumericSplit{0, 0.5}, 1, 2), inner(NumericSplit{1, 0.3}, 3, 4),
                        inner(NumericSplit{1, 0.6}, 5, 6), leaf({1, 0}), leaf({0, 1}), leaf({0, 1}), leaf({1, 0})});
    const Model m = make_model({numerical("a"), numerical("b")}, {t});
    const Explanation e = explain(m, make_query(m, {0.4, 0.1}, 1));
    REQUIRE(e.status == milp::Status::Optimal);
    // left-right leaf needs b > 0.3 (cost 0.2), right-left needs a > 0.5 (cost 0.1)
    CHECK((*e.counterfactual)[0] > 0.5);
    CHECK((*e.counterfactual)[1] == doctest::Approx(0.1));
    CHECK(e.objective == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("identical inputs export identical LP text") {
    synth::Rng rng(4);
    Model m;
    m.features = synth::make_features({.numerical = 4, .binary = 1, .categorical = 1, .ordinal = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 10, .depth = 4}, rng);
    validate_model(m);
    const Query q = make_query(m, *synth::random_origin(m, 1, rng), 1);
    const auto a = milp::export_lp(assemble(m, resolve_query(m, q)).instance);
    const auto b = milp::export_lp(assemble(m, resolve_query(m, q)).instance);
    CHECK(a.text == b.text);
    CHECK(a.collisions.empty());
}

TEST_CASE("registry is a bijection onto columns") {
    synth::Rng rng(6);
    Model m;
    m.features = synth::make_features({.numerical = 3, .binary = 1, .categorical = 1, .ordinal = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 5, .depth = 3}, rng);
    validate_model(m);
    for (Norm norm : {Norm::L0, Norm::L1, Norm::L2}) {
        const Formulation f = assemble(m, resolve_query(m, make_query(m, *synth::random_origin(m, 1, rng), 1, norm)));
        REQUIRE(f.registry.size() == f.instance.num_columns());
        for (int j = 0; j < static_cast<int>(f.registry.size()); ++j) {
            const Symbol& s = f.registry.symbol(j);
            CHECK(f.registry.at(s) == j);
            CHECK(f.registry.find(VariableRegistry::name_of(s)) == j);
            CHECK(f.instance.column(j).name == VariableRegistry::name_of(s));
        }
    }
    CHECK(VariableRegistry::name_of({SymbolKind::Lambda, 3, 1}) == "lambda_t3_d1");
    CHECK(VariableRegistry::name_of({SymbolKind::IsoY, 2, 5}) == "y_iso2_v5");
    CHECK(VariableRegistry::name_of({SymbolKind::Omega, 4, 2}) == "omega_f4_2");
}

TEST_CASE("encoded points satisfy the instance") {
    synth::Rng rng(8);
    Model m;
    m.features = synth::make_features({.numerical = 3, .binary = 1, .categorical = 1, .ordinal = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 8, .depth = 4}, rng);
    validate_model(m);
    for (Norm norm : {Norm::L0, Norm::L1, Norm::L2}) {
        int checked = 0;
        for (int k = 0; k < 200 && checked < 20; ++k) {
            Point x = synth::random_point(m.features, rng);
            const int cls = predict(m.classifier, x).cls;
            if (cls != 1) continue;
            Query q = make_query(m, synth::random_point(m.features, rng), 1, norm);
            const Formulation f = assemble(m, resolve_query(m, q));
            const auto v = encode_point(m, f, x);
            milp::Instance relaxed = f.instance;
            CHECK(relaxed.max_violation(v) <= 1e-9);
            const Point back = decode_point(f, v);
            for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-9));
            CHECK(routing_consistent(m, f, v, back));
            ++checked;
        }
        CHECK(checked > 0);
    }
}
