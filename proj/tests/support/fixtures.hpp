#pragma once

#include "cfx/model_io.hpp"
#include "cfx/synth.hpp"

#include <cstdint>

namespace cfx::testing {

struct Fixture {
    Model model;
    Query query;
};

/// Small random instance within oracle limits: 2-4 mixed features, 2-8
/// trees of depth <= 3, thresholds on a 0.05 grid, l0/l1/l2 cycling with
/// index, and monotone or fixed actionability on every other fixture.
inline Fixture oracle_fixture(std::uint64_t index) {
    synth::Rng rng(1469598103934665603ULL ^ (index * 1099511628211ULL));
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Fixture fx;
    synth::FeatureMix mix{.numerical = 0};
    const int p = pick(2, 4);
    for (int k = 0; k < p; ++k) {
        switch (k == 0 ? 0 : pick(0, 3)) {
            case 0: ++mix.numerical; break;
            case 1: ++mix.binary; break;
            case 2: ++mix.categorical; break;
            default: ++mix.ordinal; break;
        }
    }
    mix.categories = pick(2, 4);
    mix.ordinal_levels = pick(3, 5);
    auto fs = synth::make_features(mix);
    std::vector<FeatureDecl> decls(fs.begin(), fs.end());
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    for (auto& d : decls) {
        d.cost_down = weight(rng);
        d.cost_up = weight(rng);
        d.cost_true = weight(rng);
        d.cost_false = weight(rng);
        for (auto& c : d.category_costs) c = weight(rng);
    }
    if (index % 2 == 1) {
        auto& d = decls[static_cast<std::size_t>(pick(0, p - 1))];
        const int a = d.kind == FeatureKind::Categorical ? 1 : pick(1, 3);
        d.actionability = static_cast<Actionability>(a);
    }
    fx.model.features = FeatureSpace(std::move(decls));
    synth::ForestSpec spec{.trees = pick(2, 8),
                           .depth = pick(1, 3),
                           .classes = pick(0, 3) == 0 ? 3 : 2,
                           .voting = pick(0, 1) ? Voting::Soft : Voting::Hard,
                           .threshold_step = 0.05};
    fx.model.classifier = synth::make_forest(fx.model.features, spec, rng);
    validate_model(fx.model);

    fx.query.origin = synth::random_point(fx.model.features, rng);
    const int origin_class = predict(fx.model.classifier, fx.query.origin).cls;
    int target = pick(0, spec.classes - 2);
    if (target >= origin_class) ++target;
    fx.query.target_class = target;
    fx.query.objective.norm = static_cast<Norm>(index % 3);  // L0, L1, L2
    fx.query.objective.piecewise.assign(fx.model.features.size(), std::nullopt);
    return fx;
}

/// Random classifier plus an isolation forest fit on target-class points:
/// 2-3 numerical features with optional binary and categorical ones, 2-5
/// trees of depth <= 3, 4-8 isolation trees of depth 3-5. The origin is
/// predicted away from the target.
inline Fixture plausibility_fixture(std::uint64_t index) {
    synth::Rng rng(0x9E3779B97F4A7C15ULL ^ (index * 0xC2B2AE3D27D4EB4FULL));
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (;;) {
        Fixture fx;
        synth::FeatureMix mix{.numerical = pick(2, 3), .binary = pick(0, 1), .categorical = pick(0, 1)};
        fx.model.features = synth::make_features(mix);
        synth::ForestSpec spec{.trees = pick(2, 5), .depth = pick(2, 3), .threshold_step = 0.05};
        fx.model.classifier = synth::make_forest(fx.model.features, spec, rng);
        const int target = pick(0, 1);
        std::vector<Point> samples;
        for (int k = 0; k < 400; ++k) {
            Point x = synth::random_point(fx.model.features, rng);
            if (predict(fx.model.classifier, x).cls == target) samples.push_back(std::move(x));
        }
        if (samples.size() < 40) continue;
        const synth::IsolationSpec iso{.trees = pick(4, 8), .depth = pick(3, 5), .sample_size = 32};
        fx.model.isolation = synth::fit_isolation(fx.model.features, samples, iso, rng);
        validate_model(fx.model);
        const auto origin = synth::random_origin(fx.model, target, rng);
        if (!origin) continue;
        fx.query.origin = *origin;
        fx.query.target_class = target;
        fx.query.objective.norm = static_cast<Norm>(index % 3);
        fx.query.objective.piecewise.assign(fx.model.features.size(), std::nullopt);
        fx.query.use_plausibility = true;
        return fx;
    }
}

}  // namespace cfx::testing
