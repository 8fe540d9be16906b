#include "doctest.h"

#include "cfx/cli.hpp"
#include "cfx/formulation.hpp"
#include "cfx/milp/lp_format.hpp"
#include "cfx/synth.hpp"
#include "support/models.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cfx;
using namespace cfx::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run cfx_run(std::vector<std::string> args) {
    args.insert(args.begin(), "cfx");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

/// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("cfx_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_stump(const fs::path& dir) {
    write(dir / "m.json", kStumpModel);
    write(dir / "q.json", kStumpQuery);
    return dir;
}

}  // namespace

TEST_CASE("explain on the minimal model is optimal") {
    const auto d = write_stump(scratch("explain"));
    const Run r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "q.json").string()});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["status"] == "optimal");
    CHECK(j["objective"].get<double>() == doctest::Approx(0.20005).epsilon(1e-12));
    CHECK(j["counterfactual"]["a"].get<double>() == doctest::Approx(0.50005).epsilon(1e-12));
    CHECK(j["certification"]["verified"] == true);
    CHECK(!j["solver"].contains("wall_time"));
}

TEST_CASE("explain writes --out and honours overrides") {
    const auto d = write_stump(scratch("out"));
    const Run r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "q.json").string(),
                           "--objective", "l2", "--epsilon", "0.001", "--margin", "0.01", "--out",
                           (d / "e.json").string(), "--with-timing"});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(slurp(d / "e.json"));
    CHECK(j["formulation"]["epsilon"].get<double>() == 0.001);
    CHECK(j["formulation"]["vote_margin"].get<double>() == 0.01);
    CHECK(j["counterfactual"]["a"].get<double>() == doctest::Approx(0.5005).epsilon(1e-12));
    CHECK(j["solver"].contains("wall_time"));
}

TEST_CASE("unreachable target through a fixed feature exits 2") {
    const auto d = scratch("infeasible");
    const Model m = make_model({binary("sex"), numerical("a")}, {stump(BinarySplit{0}), stump(NumericSplit{1, 0.5})});
    FeatureDecl sex = m.features[0];
    sex.actionability = Actionability::Fixed;
    Model fixed = m;
    fixed.features = FeatureSpace({sex, m.features[1]});
    write(d / "m.json", serialize_model(fixed));
    write(d / "q.json", R"({"origin":{"sex":0,"a":0.2},"target_class":1})");
    const Run r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "q.json").string()});
    CHECK(r.code == kExitInfeasible);
    CHECK(nlohmann::json::parse(r.out)["status"] == "infeasible");
}

TEST_CASE("node limit exits 3") {
    const auto d = scratch("limit");
    synth::Rng rng(21);
    Model m;
    m.features = synth::make_features({.numerical = 6});
    m.classifier = synth::make_forest(m.features, {.trees = 20, .depth = 4}, rng);
    validate_model(m);
    Query q = make_query(m, *synth::random_origin(m, 1, rng), 1);
    write(d / "m.json", serialize_model(m));
    write(d / "q.json", serialize_query(q, m));
    const Run r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "q.json").string(),
                           "--node-limit", "1"});
    CHECK(r.code == kExitLimit);
    CHECK(nlohmann::json::parse(r.out)["status"] == "limit-reached");
}

TEST_CASE("malformed documents exit 1 with a field path") {
    const auto d = write_stump(scratch("malformed"));
    write(d / "bad.json", R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":9},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})");
    Run r = cfx_run({"explain", "--model", (d / "bad.json").string(), "--query", (d / "q.json").string()});
    CHECK(r.code == kExitError);
    CHECK(r.err.find("/classifier/trees/0/nodes/0") != std::string::npos);

    write(d / "badq.json", R"({"origin":{"a":0.3},"target_class":"maybe"})");
    r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "badq.json").string()});
    CHECK(r.code == kExitError);
    CHECK(r.err.find("/target_class") != std::string::npos);

    r = cfx_run({"explain", "--model", (d / "missing.json").string(), "--query", (d / "q.json").string()});
    CHECK(r.code == kExitError);
    r = cfx_run({"explain", "--model", (d / "m.json").string()});
    CHECK(r.code == kExitError);
    r = cfx_run({"frobnicate"});
    CHECK(r.code == kExitError);
}

TEST_CASE("repeated explain runs are byte-identical") {
    const auto d = scratch("determinism");
    synth::Rng rng(31);
    Model m;
    m.features = synth::make_features({.numerical = 4, .binary = 1, .categorical = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 10, .depth = 3}, rng);
    validate_model(m);
    write(d / "m.json", serialize_model(m));
    write(d / "q.json", serialize_query(make_query(m, *synth::random_origin(m, 1, rng), 1), m));
    const std::vector<std::string> base{"explain", "--model", (d / "m.json").string(), "--query",
                                        (d / "q.json").string(), "--threads", "1"};
    const Run a = cfx_run(base), b = cfx_run(base);
    REQUIRE(a.code == kExitOk);
    CHECK(a.out == b.out);
    auto multi = base;
    multi.back() = "4";
    const Run c = cfx_run(multi);
    REQUIRE(c.code == kExitOk);
    CHECK(nlohmann::json::parse(c.out)["objective"] == nlohmann::json::parse(a.out)["objective"]);
}

TEST_CASE("export-milp writes the assembled instance") {
    const auto d = write_stump(scratch("export"));
    const Run r = cfx_run({"export-milp", "--model", (d / "m.json").string(), "--query", (d / "q.json").string(),
                           "--out", (d / "x.lp").string()});
    REQUIRE(r.code == kExitOk);
    const Model m = load_model((d / "m.json").string());
    const Query q = load_query((d / "q.json").string(), m);
    const auto f = assemble(m, resolve_query(m, q));
    CHECK(slurp(d / "x.lp") == milp::export_lp(f.instance).text);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["nnz"] == f.nnz());
    CHECK(j["n_vertices"] == 3);
    CHECK(slurp(d / "x.lp") == slurp(CFX_TEST_DATA "/stump.lp"));
}

TEST_CASE("oracle subcommand reports the evaluated cells") {
    const auto d = write_stump(scratch("oracle"));
    const Run r = cfx_run({"oracle", "--model", (d / "m.json").string(), "--query", (d / "q.json").string()});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["solver"]["cells_evaluated"] == 2);
    CHECK(j["objective"].get<double>() == doctest::Approx(0.20005).epsilon(1e-12));
}

TEST_CASE("bench writes one CSV row per configuration") {
    const auto d = scratch("bench");
    Run r = cfx_run({"synth", "--out-dir", d.string(), "--trees-list", "2,3", "--depth-list", "2", "--features", "3",
                     "--queries", "2", "--seed", "5"});
    REQUIRE(r.code == kExitOk);
    r = cfx_run({"bench", "--model-dir", d.string(), "--trees-list", "2,3", "--depth-list", "2", "--repeats", "3",
                 "--out", (d / "t.csv").string()});
    REQUIRE(r.code == kExitOk);
    std::istringstream csv(slurp(d / "t.csv"));
    std::vector<std::string> lines;
    for (std::string line; std::getline(csv, line);) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "trees,depth,objective,mean_s,std_s,ci95_lo,ci95_hi,n");
    CHECK(lines[1].starts_with("2,2,l1,"));
    CHECK(lines[2].starts_with("3,2,l1,"));
    CHECK(lines[1].ends_with(",6"));

    r = cfx_run({"bench", "--model-dir", d.string(), "--trees-list", "7", "--depth-list", "2"});
    CHECK(r.code == kExitError);
}

TEST_CASE("validate reports structure and certifies explanations") {
    const auto d = write_stump(scratch("validate"));
    Run r = cfx_run({"validate", "--model", (d / "m.json").string()});
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["valid"] == true);
    CHECK(j["diagnostics"].empty());
    CHECK(j["classifier"]["n_vertices"] == 3);

    r = cfx_run({"explain", "--model", (d / "m.json").string(), "--query", (d / "q.json").string(), "--out",
                 (d / "e.json").string()});
    REQUIRE(r.code == kExitOk);
    r = cfx_run({"validate", "--model", (d / "m.json").string(), "--explanation", (d / "e.json").string()});
    CHECK(r.code == kExitOk);
    CHECK(nlohmann::json::parse(r.out)["explanation"]["verified"] == true);

    auto e = nlohmann::json::parse(slurp(d / "e.json"));
    e["counterfactual"]["a"] = 0.4;
    write(d / "tampered.json", e.dump());
    r = cfx_run({"validate", "--model", (d / "m.json").string(), "--explanation", (d / "tampered.json").string()});
    CHECK(r.code == kExitError);

    write(d / "bad.json", R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":9},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})");
    r = cfx_run({"validate", "--model", (d / "bad.json").string()});
    CHECK(r.code == kExitError);
    j = nlohmann::json::parse(r.out);
    CHECK(j["valid"] == false);
    REQUIRE(!j["diagnostics"].empty());
    CHECK(j["diagnostics"][0].dump().find("/classifier/trees/0/nodes/0") != std::string::npos);
}

TEST_CASE("validate counts vertices of synthetic models") {
    const auto d = scratch("vertices");
    Run r = cfx_run({"synth", "--out-dir", d.string(), "--trees-list", "7", "--depth-list", "3", "--seed", "2"});
    REQUIRE(r.code == kExitOk);
    const Model m = load_model((d / "model_t7_d3.json").string());
    std::size_t nodes = 0;
    for (const auto& t : m.classifier.trees) nodes += t.nodes.size();
    r = cfx_run({"validate", "--model", (d / "model_t7_d3.json").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(nlohmann::json::parse(r.out)["classifier"]["n_vertices"] == nodes);
}
