#include "cfx/cli.hpp"

#include "cfx/explain.hpp"
#include "cfx/milp/lp_format.hpp"
#include "cfx/model_io.hpp"
#include "cfx/oracle.hpp"
#include "cfx/parallel.hpp"
#include "cfx/synth.hpp"

#include <CLI11.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace cfx {

namespace {

using Json = nlohmann::ordered_json;
namespace fsys = std::filesystem;

struct QueryOptions {
    std::string model;
    std::string query;
    std::string objective;
    bool plausibility = false;
    std::optional<double> epsilon;
    std::optional<double> margin;
};

struct SolveOptions {
    double time_limit = std::numeric_limits<double>::infinity();
    long node_limit = std::numeric_limits<long>::max();
    int threads = 0;
    int pwl_segments = 16;
    bool depth_first = false;
};

void add_query_options(CLI::App* app, QueryOptions& o) {
    app->add_option("--model", o.model, "model document")->required();
    app->add_option("--query", o.query, "query document")->required();
    app->add_option("--objective", o.objective, "l0, l1, l2 or piecewise (overrides the query)");
    app->add_flag("--plausibility", o.plausibility, "enforce the isolation-forest depth bound");
    app->add_option("--epsilon", o.epsilon, "split strictness");
    app->add_option("--margin", o.margin, "vote margin");
}

void add_solve_options(CLI::App* app, SolveOptions& o) {
    app->add_option("--time-limit", o.time_limit, "seconds");
    app->add_option("--node-limit", o.node_limit, "branch-and-bound nodes");
    app->add_option("--threads", o.threads, "worker threads (0: CFX_THREADS or the OpenMP default)");
    app->add_option("--pwl-segments", o.pwl_segments, "segments per quadratic term");
    app->add_flag("--depth-first", o.depth_first, "depth-first node order");
}

void apply_overrides(const QueryOptions& o, Query& q) {
    if (!o.objective.empty()) {
        const auto n = parse_norm(o.objective);
        if (!n) throw std::invalid_argument("unknown objective '" + o.objective + "'");
        q.objective.norm = *n;
    }
    if (o.plausibility) q.use_plausibility = true;
    if (o.epsilon) {
        if (!(*o.epsilon > 0 && *o.epsilon < 1)) throw std::invalid_argument("--epsilon must lie in (0,1)");
        q.epsilon = o.epsilon;
    }
    if (o.margin) {
        if (!(*o.margin > 0)) throw std::invalid_argument("--margin must be positive");
        q.vote_margin = o.margin;
    }
}

ExplainOptions explain_options(const SolveOptions& s) {
    ExplainOptions o;
    o.solver.time_limit = s.time_limit;
    o.solver.node_limit = s.node_limit;
    o.solver.threads = resolve_threads(s.threads);
    o.solver.pwl_segments = s.pwl_segments;
    o.solver.node_order = s.depth_first ? milp::NodeOrder::DepthFirst : milp::NodeOrder::BestBound;
    return o;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DocumentError("", "cannot open file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << text;
}

int exit_code(const Explanation& e) {
    switch (e.status) {
        case milp::Status::Optimal: return e.certification.verified ? kExitOk : kExitError;
        case milp::Status::Infeasible: return kExitInfeasible;
        case milp::Status::LimitReached: return kExitLimit;
    }
    return kExitError;
}

std::vector<std::string> query_documents(const std::string& text) {
    const Json j = Json::parse(text);
    std::vector<std::string> docs;
    if (j.is_array())
        for (const auto& q : j) docs.push_back(q.dump());
    else
        docs.push_back(j.dump());
    return docs;
}

std::string model_file(const std::string& dir, int trees, int depth) {
    return (fsys::path(dir) / ("model_t" + std::to_string(trees) + "_d" + std::to_string(depth) + ".json")).string();
}

std::string queries_file(const std::string& dir, int trees, int depth) {
    return (fsys::path(dir) / ("queries_t" + std::to_string(trees) + "_d" + std::to_string(depth) + ".json")).string();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Json model_stats(const Model& m) {
    Json j;
    auto ensemble_stats = [](const Ensemble& e) {
        std::size_t nodes = 0, internal = 0;
        std::map<int, std::size_t> hist;
        for (const auto& t : e.trees) {
            nodes += t.nodes.size();
            internal += t.num_internal();
            for (const auto& n : t.nodes)
                if (n.is_leaf()) ++hist[n.depth];
        }
        Json s{{"trees", e.trees.size()},
               {"n_vertices", nodes},
               {"n_internal", internal},
               {"n_leaves", nodes - internal},
               {"max_depth", e.max_depth()}};
        Json h = Json::object();
        for (const auto& [d, c] : hist) h[std::to_string(d)] = c;
        s["leaf_depths"] = std::move(h);
        return s;
    };
    j["classifier"] = ensemble_stats(m.classifier);
    Json levels = Json::object();
    for (std::size_t i = 0; i < m.features.size(); ++i) {
        const auto& f = m.features[i];
        if (f.kind == FeatureKind::Numerical || f.is_ordered_grid())
            levels[f.name] = collect_split_levels(m, static_cast<int>(i), true).size();
    }
    j["levels"] = std::move(levels);
    if (m.isolation) {
        auto s = ensemble_stats(*m.isolation);
        s["delta"] = m.isolation->delta;
        s["correction"] = m.isolation->correction;
        j["isolation_forest"] = std::move(s);
    }
    return j;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        const int v = std::stoi(item, &pos);
        if (pos != item.size() || v <= 0) throw std::invalid_argument("expected a comma-separated list of positive integers: '" + s + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal counterfactual explanations for tree ensembles", "cfx"};
    app.require_subcommand(1);

    QueryOptions eq;
    SolveOptions es;
    std::string explain_out;
    bool with_timing = false;
    auto* explain_cmd = app.add_subcommand("explain", "solve the counterfactual MILP");
    add_query_options(explain_cmd, eq);
    add_solve_options(explain_cmd, es);
    explain_cmd->add_option("--out", explain_out, "explanation document (default: standard output)");
    explain_cmd->add_flag("--with-timing", with_timing, "include wall time in the document");

    QueryOptions oq;
    std::string oracle_out;
    std::uint64_t cell_cap = 10'000'000;
    int oracle_threads = 0;
    auto* oracle_cmd = app.add_subcommand("oracle", "brute-force optimum over the cell decomposition");
    add_query_options(oracle_cmd, oq);
    oracle_cmd->add_option("--cell-cap", cell_cap, "maximum number of cells");
    oracle_cmd->add_option("--threads", oracle_threads, "worker threads");
    oracle_cmd->add_option("--out", oracle_out, "explanation document");

    QueryOptions xq;
    std::string export_out;
    auto* export_cmd = app.add_subcommand("export-milp", "write the MILP in LP format");
    add_query_options(export_cmd, xq);
    export_cmd->add_option("--out", export_out, "LP file")->required();

    std::string bench_dir, trees_list = "10,25", depth_list = "3", bench_objective = "l1", bench_out, bench_queries;
    int repeats = 3;
    SolveOptions bs;
    auto* bench_cmd = app.add_subcommand("bench", "time explain over a model suite");
    bench_cmd->add_option("--model-dir", bench_dir, "directory with model_t<T>_d<D>.json files")->required();
    bench_cmd->add_option("--trees-list", trees_list, "comma-separated tree counts");
    bench_cmd->add_option("--depth-list", depth_list, "comma-separated depths");
    bench_cmd->add_option("--objective", bench_objective, "l0, l1, l2 or piecewise");
    bench_cmd->add_option("--repeats", repeats, "runs per query")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--queries", bench_queries, "query document or array (default: queries_t<T>_d<D>.json)");
    bench_cmd->add_option("--out", bench_out, "CSV file (default: standard output)");
    add_solve_options(bench_cmd, bs);

    std::string validate_model_path, validate_expl;
    auto* validate_cmd = app.add_subcommand("validate", "check a model and report structure");
    validate_cmd->add_option("--model", validate_model_path, "model document")->required();
    validate_cmd->add_option("--explanation", validate_expl, "explanation document to re-certify");

    std::string synth_dir, synth_trees = "10", synth_depths = "3";
    int synth_numerical = 10, synth_binary = 0, synth_categorical = 0, synth_ordinal = 0, synth_queries = 10;
    std::uint64_t synth_seed = 1;
    bool synth_isolation = false;
    double synth_step = 0.0;
    auto* synth_cmd = app.add_subcommand("synth", "write synthetic models and queries");
    synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
    synth_cmd->add_option("--trees-list", synth_trees, "comma-separated tree counts");
    synth_cmd->add_option("--depth-list", synth_depths, "comma-separated depths");
    synth_cmd->add_option("--features", synth_numerical, "numerical features");
    synth_cmd->add_option("--binary", synth_binary, "binary features");
    synth_cmd->add_option("--categorical", synth_categorical, "categorical features");
    synth_cmd->add_option("--ordinal", synth_ordinal, "ordinal features");
    synth_cmd->add_option("--queries", synth_queries, "queries per model");
    synth_cmd->add_option("--seed", synth_seed, "random seed");
    synth_cmd->add_option("--threshold-step", synth_step, "snap thresholds to multiples of this step");
    synth_cmd->add_flag("--isolation", synth_isolation, "also fit an isolation forest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (explain_cmd->parsed()) {
            const Model model = load_model(eq.model);
            Query q = load_query(eq.query, model);
            apply_overrides(eq, q);
            const auto e = explain(model, q, explain_options(es));
            write_output(explain_out, explanation_json(model, e, with_timing), out);
            return exit_code(e);
        }
        if (oracle_cmd->parsed()) {
            const Model model = load_model(oq.model);
            Query q = load_query(oq.query, model);
            apply_overrides(oq, q);
            const auto e = brute_force_explain(model, q, {.cell_cap = cell_cap, .threads = oracle_threads});
            write_output(oracle_out, explanation_json(model, e), out);
            return exit_code(e);
        }
        if (export_cmd->parsed()) {
            const Model model = load_model(xq.model);
            Query q = load_query(xq.query, model);
            apply_overrides(xq, q);
            const auto f = assemble(model, resolve_query(model, q));
            const auto lp = milp::export_lp(f.instance);
            write_output(export_out, lp.text, out);
            Json s{{"columns", f.instance.num_columns()},
                   {"rows", f.instance.num_rows()},
                   {"nnz", f.nnz()},
                   {"n_vertices", f.n_vertices},
                   {"name_collisions", lp.collisions}};
            out << s.dump(2) << "\n";
            return kExitOk;
        }
        if (bench_cmd->parsed()) {
            const auto norm = parse_norm(bench_objective);
            if (!norm) throw std::invalid_argument("unknown objective '" + bench_objective + "'");
            const auto opts = explain_options(bs);
            std::string csv = "trees,depth,objective,mean_s,std_s,ci95_lo,ci95_hi,n\n";
            for (int trees : parse_int_list(trees_list)) {
                for (int depth : parse_int_list(depth_list)) {
                    const auto mf = model_file(bench_dir, trees, depth);
                    if (!fsys::exists(mf)) throw DocumentError("", "missing model file '" + mf + "'");
                    const Model model = load_model(mf);
                    const auto qf = bench_queries.empty() ? queries_file(bench_dir, trees, depth) : bench_queries;
                    if (!fsys::exists(qf)) throw DocumentError("", "missing query file '" + qf + "'");
                    std::vector<Query> queries;
                    for (const auto& doc : query_documents(read_file(qf))) {
                        queries.push_back(parse_query(doc, model));
                        queries.back().objective.norm = *norm;
                    }
                    std::vector<double> times;
                    for (int r = 0; r < repeats; ++r)
                        for (const auto& q : queries) times.push_back(explain(model, q, opts).stats.wall_time);
                    const double n = static_cast<double>(times.size());
                    double mean = 0.0, var = 0.0;
                    for (double t : times) mean += t / n;
                    for (double t : times) var += (t - mean) * (t - mean);
                    const double sd = times.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
                    double half = 0.0;
                    if (times.size() > 1) {
                        const boost::math::students_t dist(n - 1.0);
                        half = boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
                    }
                    csv += std::to_string(trees) + "," + std::to_string(depth) + "," + std::string(to_string(*norm)) +
                           "," + fmt(mean) + "," + fmt(sd) + "," + fmt(mean - half) + "," + fmt(mean + half) + "," +
                           std::to_string(times.size()) + "\n";
                }
            }
            write_output(bench_out, csv, out);
            return kExitOk;
        }
        if (validate_cmd->parsed()) {
            Json report;
            Model model;
            try {
                model = load_model(validate_model_path);
            } catch (const DocumentError& e) {
                report["valid"] = false;
                report["diagnostics"] = Json::array({{{"path", e.path()}, {"message", e.what()}}});
                out << report.dump(2) << "\n";
                return kExitError;
            }
            report["valid"] = true;
            report["diagnostics"] = Json::array();
            report.update(model_stats(model));
            int code = kExitOk;
            if (!validate_expl.empty()) {
                const auto issues = check_explanation(model, read_file(validate_expl));
                report["explanation"] = {{"verified", issues.empty()}, {"diagnostics", issues}};
                if (!issues.empty()) code = kExitError;
            }
            out << report.dump(2) << "\n";
            return code;
        }
        if (synth_cmd->parsed()) {
            fsys::create_directories(synth_dir);
            const auto fs = synth::make_features({.numerical = synth_numerical,
                                                  .binary = synth_binary,
                                                  .categorical = synth_categorical,
                                                  .ordinal = synth_ordinal});
            for (int trees : parse_int_list(synth_trees)) {
                for (int depth : parse_int_list(synth_depths)) {
                    synth::Rng rng(synth_seed * 1000003ULL + static_cast<std::uint64_t>(trees) * 1009ULL +
                                   static_cast<std::uint64_t>(depth));
                    Model m;
                    m.features = fs;
                    m.classifier = synth::make_forest(
                        fs, {.trees = trees, .depth = depth, .threshold_step = synth_step}, rng);
                    if (synth_isolation) {
                        std::vector<Point> samples;
                        for (int k = 0; k < 100000 && samples.size() < 256; ++k) {
                            auto x = synth::random_point(fs, rng);
                            if (predict(m.classifier, x).cls == 1) samples.push_back(std::move(x));
                        }
                        if (samples.empty()) throw std::runtime_error("no target-class samples for the isolation forest");
                        m.isolation = synth::fit_isolation(fs, samples, {.threshold_step = synth_step}, rng);
                    }
                    validate_model(m);
                    write_output(model_file(synth_dir, trees, depth), serialize_model(m), out);
                    Json qs = Json::array();
                    for (int k = 0; k < synth_queries; ++k) {
                        const auto origin = synth::random_origin(m, 1, rng);
                        if (!origin) break;
                        Query q;
                        q.origin = *origin;
                        q.target_class = 1;
                        qs.push_back(Json::parse(serialize_query(q, m)));
                    }
                    write_output(queries_file(synth_dir, trees, depth), qs.dump(2) + "\n", out);
                }
            }
            return kExitOk;
        }
    } catch (const DocumentError& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const milp::NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace cfx
