#include "cfx/ensemble.hpp"
#include "cfx/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfx {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CFX_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<int> predict_batch_serial(const Ensemble& e, std::span<const double> points,
                                      std::size_t n_features) {
    const std::size_t n = points.size() / n_features;
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = predict(e, points.subspan(i * n_features, n_features)).cls;
    return out;
}

std::vector<int> predict_batch(const Ensemble& e, std::span<const double> points, std::size_t n_features,
                               int threads) {
    const auto n = static_cast<long>(points.size() / n_features);
    std::vector<int> out(static_cast<std::size_t>(n));
    const int nthreads = resolve_threads(threads);
    const std::size_t classes = e.num_classes();
#pragma omp parallel num_threads(nthreads)
    {
        std::vector<double> scores(classes);
#pragma omp for schedule(static)
        for (long i = 0; i < n; ++i) {
            const auto x = points.subspan(static_cast<std::size_t>(i) * n_features, n_features);
            std::fill(scores.begin(), scores.end(), 0.0);
            for (const auto& t : e.trees) {
                const auto& probs = t.nodes[route(t, x)].class_probs;
                for (std::size_t c = 0; c < classes; ++c) scores[c] += t.weight * probs[c];
            }
            int best = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (scores[c] > scores[best]) best = static_cast<int>(c);
            out[static_cast<std::size_t>(i)] = best;
        }
    }
    return out;
}

std::vector<double> isolation_depth_batch_serial(const Ensemble& iso, std::span<const double> points,
                                                 std::size_t n_features) {
    const std::size_t n = points.size() / n_features;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = isolation_avg_depth(iso, points.subspan(i * n_features, n_features));
    return out;
}

std::vector<double> isolation_depth_batch(const Ensemble& iso, std::span<const double> points,
                                          std::size_t n_features, int threads) {
    const auto n = static_cast<long>(points.size() / n_features);
    std::vector<double> out(static_cast<std::size_t>(n));
    const int nthreads = resolve_threads(threads);
#pragma omp parallel for num_threads(nthreads) schedule(static)
    for (long i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            isolation_avg_depth(iso, points.subspan(static_cast<std::size_t>(i) * n_features, n_features));
    return out;
}

}  // namespace cfx
