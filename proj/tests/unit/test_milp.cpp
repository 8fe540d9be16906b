#include "doctest.h"

#include "cfx/milp/lp_format.hpp"
#include "cfx/milp/solver.hpp"
#include "support/fixtures.hpp"
#include "cfx/formulation.hpp"

#include <fstream>
#include <sstream>

using namespace cfx;
using namespace cfx::milp;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("one-variable rounding") {
    Instance inst;
    const int x = inst.add_column({.name = "x", .integer = true, .cost = 1.0});
    inst.add_row("r", {{x, 1.0}}, Sense::GreaterEqual, 0.7);
    const Solution s = solve(inst);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.values[0] == 1.0);
    CHECK(s.objective == doctest::Approx(1.0));
    const Solution r = lp_relax(inst);
    CHECK(r.objective == doctest::Approx(0.7));
}

TEST_CASE("contradictory rows are infeasible") {
    Instance inst;
    const int x = inst.add_column({.name = "x", .cost = 1.0});
    inst.add_row("lo", {{x, 1.0}}, Sense::LessEqual, 0.2);
    inst.add_row("hi", {{x, 1.0}}, Sense::GreaterEqual, 0.8);
    CHECK(solve(inst).status == Status::Infeasible);
    CHECK(lp_relax(inst).status == Status::Infeasible);
}

TEST_CASE("continuous instance: relaxation equals solve") {
    Instance inst;
    const int a = inst.add_column({.name = "a", .upper = 4.0, .cost = -1.0});
    const int b = inst.add_column({.name = "b", .upper = 4.0, .cost = -2.0});
    inst.add_row("c1", {{a, 1.0}, {b, 1.0}}, Sense::LessEqual, 5.0);
    inst.add_row("c2", {{a, 1.0}, {b, -1.0}}, Sense::GreaterEqual, -1.0);
    const Solution s = solve(inst), r = lp_relax(inst);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == r.objective);
    CHECK(s.values == r.values);
    CHECK(s.objective == doctest::Approx(-8.0));
}

TEST_CASE("small knapsack") {
    Instance inst;
    const std::vector<double> w{5, 4, 6, 3}, v{10, 40, 30, 50};
    std::vector<Term> cap;
    for (int j = 0; j < 4; ++j) cap.push_back({inst.add_column({.name = "x" + std::to_string(j), .integer = true,
                                                                .cost = -v[j]}), w[j]});
    inst.add_row("cap", cap, Sense::LessEqual, 10.0);
    const Solution s = solve(inst);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == doctest::Approx(-90.0));
    CHECK(s.stats.gap <= 1e-6);
    CHECK(s.stats.root_bound <= s.objective + 1e-9);
}

TEST_CASE("general integers") {
    Instance inst;
    const int x = inst.add_column({.name = "x", .upper = 10.0, .integer = true, .cost = -1.0});
    const int y = inst.add_column({.name = "y", .upper = 10.0, .integer = true, .cost = -1.0});
    inst.add_row("a", {{x, 2.0}, {y, 2.0}}, Sense::LessEqual, 7.0);
    inst.add_row("b", {{x, 1.0}, {y, -1.0}}, Sense::Equal, 0.0);
    const Solution s = solve(inst);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.values[0] == 1.0);
    CHECK(s.values[1] == 1.0);
}

TEST_CASE("node limit reports limit-reached") {
    Instance inst;
    std::vector<Term> row;
    for (int j = 0; j < 12; ++j)
        row.push_back({inst.add_column({.name = "x" + std::to_string(j), .integer = true, .cost = 1.0}), 2.0});
    inst.add_row("odd", row, Sense::Equal, 11.0);
    SolverConfig cfg;
    cfg.node_limit = 5;
    cfg.root_dive = false;
    const Solution s = solve(inst, cfg);
    CHECK(s.status == Status::LimitReached);
    cfg.node_limit = 100000;
    CHECK(solve(inst, cfg).status == Status::Infeasible);
}

TEST_CASE("separable quadratic through the piecewise surrogate") {
    Instance inst;
    const int x = inst.add_column({.name = "x", .lower = -1.0, .upper = 1.0, .quad = 1.0});
    const int b = inst.add_column({.name = "b", .integer = true, .cost = 0.1});
    inst.add_row("link", {{x, 1.0}, {b, -0.5}}, Sense::GreaterEqual, 0.3);
    SolverConfig cfg;
    cfg.pwl_segments = 16;
    const Solution s = solve(inst, cfg);
    REQUIRE(s.status == Status::Optimal);
    const double h = 2.0 / 16;
    CHECK(s.stats.pwl_tolerance == doctest::Approx(h * h / 4.0));
    CHECK(s.values[0] == doctest::Approx(0.3));
    CHECK(s.values[1] == 0.0);
    CHECK(s.exact_objective == doctest::Approx(0.09));
    CHECK(s.objective >= s.exact_objective - 1e-12);
    CHECK(s.objective - s.exact_objective <= s.stats.pwl_tolerance + 1e-12);
    CHECK(surrogate_objective(inst, s.values, 16) == doctest::Approx(s.objective));
}

TEST_CASE("invalid instances are rejected") {
    Instance inst;
    inst.add_column({.name = "x", .lower = 1.0, .upper = 0.0});
    CHECK_THROWS_AS(solve(inst), std::invalid_argument);
    Instance q;
    q.add_column({.name = "x", .quad = -1.0});
    CHECK_THROWS_AS(solve(q), std::invalid_argument);
    Instance f;
    f.add_column({.name = "x", .upper = std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(solve(f), std::invalid_argument);
}

TEST_CASE("rows merge duplicates and drop zeros") {
    Instance inst;
    const int a = inst.add_column({.name = "a"});
    const int b = inst.add_column({.name = "b"});
    inst.add_row("r", {{b, 1.0}, {a, 2.0}, {b, -1.0}, {a, 0.5}}, Sense::LessEqual, 1.0);
    REQUIRE(inst.row(0).terms.size() == 1);
    CHECK(inst.row(0).terms[0].col == a);
    CHECK(inst.row(0).terms[0].coef == 2.5);
    CHECK(inst.nnz() == 1);
}

TEST_CASE("LP export of one binary and one row matches the golden file") {
    Instance inst;
    const int x = inst.add_column({.name = "x", .integer = true, .cost = 2.0});
    const int y = inst.add_column({.name = "y", .upper = 3.0, .cost = -1.0});
    inst.add_row("cap", {{x, 1.0}, {y, 0.5}}, Sense::LessEqual, 1.5);
    const LpExport e = export_lp(inst);
    CHECK(e.text == read_file(CFX_TEST_DATA "/one_binary.lp"));
    CHECK(export_lp(inst).text == e.text);
}

TEST_CASE("LP export sanitizes and suffixes names") {
    Instance inst;
    inst.add_column({.name = "a b", .integer = true});
    inst.add_column({.name = "a_b", .integer = true});
    inst.add_column({.name = "g", .upper = 5.0, .integer = true});
    const LpExport e = export_lp(inst);
    REQUIRE(e.collisions.size() == 1);
    CHECK(e.text.find("General\ng\n") != std::string::npos);
}

TEST_CASE("relaxation bounds the optimum on oracle fixtures") {
    for (std::uint64_t k = 0; k < 30; ++k) {
        const auto fx = cfx::testing::oracle_fixture(k);
        const auto f = assemble(fx.model, resolve_query(fx.model, fx.query));
        const Solution s = solve(f.instance);
        const Solution r = lp_relax(f.instance);
        if (s.status != Status::Optimal) continue;
        CHECK(r.objective <= s.objective + 1e-9);
        CHECK(s.stats.root_bound <= s.objective + 1e-9);
        CHECK(f.instance.max_violation(s.values) <= 1e-7);
        for (std::size_t j = 0; j < s.values.size(); ++j)
            if (f.instance.column(static_cast<int>(j)).integer)
                CHECK(std::abs(s.values[j] - std::round(s.values[j])) <= 1e-7);
    }
}

TEST_CASE("worker count does not change the objective") {
    for (std::uint64_t k = 0; k < 30; ++k) {
        const auto fx = cfx::testing::oracle_fixture(k);
        const auto f = assemble(fx.model, resolve_query(fx.model, fx.query));
        SolverConfig one, four;
        four.threads = 4;
        const Solution a = solve(f.instance, one), b = solve(f.instance, four);
        CHECK(a.status == b.status);
        if (a.status == Status::Optimal) {
            CHECK(a.objective == b.objective);
            CHECK(a.values == b.values);
        }
        const Solution c = solve(f.instance, one);
        CHECK(c.values == a.values);
    }
}

TEST_CASE("depth-first order reaches the same optimum") {
    for (std::uint64_t k = 0; k < 30; ++k) {
        const auto fx = cfx::testing::oracle_fixture(k);
        const auto f = assemble(fx.model, resolve_query(fx.model, fx.query));
        SolverConfig dfs;
        dfs.node_order = NodeOrder::DepthFirst;
        const Solution a = solve(f.instance), b = solve(f.instance, dfs);
        CHECK(a.status == b.status);
        if (a.status == Status::Optimal) CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
    }
}
