// Serial reference vs OpenMP timings for the parallel kernels.

#include "cfx/explain.hpp"
#include "cfx/model_io.hpp"
#include "cfx/oracle.hpp"
#include "cfx/parallel.hpp"
#include "cfx/synth.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <vector>

using namespace cfx;

namespace {

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel, bool same) {
    std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmarks"};
    int threads = 0, reps = 3, points = 200000;
    app.add_option("--threads", threads, "OpenMP workers (0: CFX_THREADS or the OpenMP default)");
    app.add_option("--reps", reps, "repetitions, best time reported");
    app.add_option("--points", points, "points per batch kernel");
    CLI11_PARSE(app, argc, argv);
    threads = resolve_threads(threads);

    synth::Rng rng(2024);
    Model m;
    m.features = synth::make_features({.numerical = 10});
    m.classifier = synth::make_forest(m.features, {.trees = 100, .depth = 6}, rng);
    std::vector<Point> sample;
    for (int k = 0; k < 512; ++k) sample.push_back(synth::random_point(m.features, rng));
    m.isolation = synth::fit_isolation(m.features, sample, {.trees = 100, .depth = 8, .sample_size = 256}, rng);
    validate_model(m);
    std::vector<double> batch;
    batch.reserve(static_cast<std::size_t>(points) * 10);
    for (int k = 0; k < points; ++k) {
        const Point x = synth::random_point(m.features, rng);
        batch.insert(batch.end(), x.begin(), x.end());
    }

    std::printf("threads %d (omp max %d), best of %d\n", threads, omp_get_max_threads(), reps);
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial s", "omp s", "speedup");

    std::vector<int> ps, pp;
    const double t_ps = best_of(reps, [&] { ps = predict_batch_serial(m.classifier, batch, 10); });
    const double t_pp = best_of(reps, [&] { pp = predict_batch(m.classifier, batch, 10, threads); });
    row("predict_batch", t_ps, t_pp, ps == pp);

    std::vector<double> is, ip;
    const double t_is = best_of(reps, [&] { is = isolation_depth_batch_serial(*m.isolation, batch, 10); });
    const double t_ip = best_of(reps, [&] { ip = isolation_depth_batch(*m.isolation, batch, 10, threads); });
    row("isolation_depth_batch", t_is, t_ip, is == ip);

    // oracle over a few hundred thousand cells
    Model om;
    om.features = synth::make_features({.numerical = 3, .binary = 1, .categorical = 1});
    om.classifier = synth::make_forest(om.features, {.trees = 12, .depth = 3, .threshold_step = 0.02}, rng);
    validate_model(om);
    Query oq;
    oq.origin = *synth::random_origin(om, 1, rng);
    oq.target_class = 1;
    oq.objective.piecewise.assign(om.features.size(), std::nullopt);
    Explanation os, op;
    const double t_os = best_of(reps, [&] { os = brute_force_explain_serial(om, oq); });
    const double t_op = best_of(reps, [&] { op = brute_force_explain(om, oq, {.threads = threads}); });
    std::printf("(oracle cells: %llu)\n", static_cast<unsigned long long>(os.cells_evaluated.value_or(0)));
    row("oracle", t_os, t_op, os.objective == op.objective && os.counterfactual == op.counterfactual);

    // branch and bound node batches
    Model bm;
    bm.features = synth::make_features({.numerical = 10});
    bm.classifier = synth::make_forest(bm.features, {.trees = 25, .depth = 4}, rng);
    validate_model(bm);
    Query bq;
    bq.origin = *synth::random_origin(bm, 1, rng);
    bq.target_class = 1;
    bq.objective.piecewise.assign(bm.features.size(), std::nullopt);
    ExplainOptions one, many;
    many.solver.threads = threads;
    Explanation bs, bp;
    const double t_bs = best_of(reps, [&] { bs = explain(bm, bq, one); });
    const double t_bp = best_of(reps, [&] { bp = explain(bm, bq, many); });
    std::printf("(branch-and-bound nodes: %ld)\n", bs.stats.nodes);
    row("branch-and-bound", t_bs, t_bp, bs.objective == bp.objective);
    return 0;
}
