#pragma once

#include "cfx/ensemble.hpp"
#include "cfx/query.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace cfx::synth {

using Rng = std::mt19937_64;

struct FeatureMix {
    int numerical = 10;
    int binary = 0;
    int categorical = 0;
    int ordinal = 0;
    int categories = 3;
    int ordinal_levels = 4;
};

/// Features named f0, f1, ... in the order numerical, binary, categorical,
/// ordinal; unit costs.
FeatureSpace make_features(const FeatureMix& mix);

struct ForestSpec {
    int trees = 10;
    int depth = 3;
    int classes = 2;
    Voting voting = Voting::Soft;
    /// > 0: numerical thresholds are multiples of this step (keeps the
    /// number of distinct levels small).
    double threshold_step = 0.0;
    /// Probability that a numerical split becomes an oblique split over two
    /// numerical features.
    double oblique_prob = 0.0;
    /// Probability that a categorical split uses a category set.
    double set_split_prob = 0.3;
};

/// Random trees grown to `depth` wherever a separating split exists. Leaf
/// class probabilities follow a hidden linear concept evaluated at the leaf
/// box center, so the trees agree with each other roughly like a trained
/// forest.
Ensemble make_forest(const FeatureSpace& fs, const ForestSpec& spec, Rng& rng);

struct IsolationSpec {
    int trees = 20;
    int depth = 6;
    int sample_size = 64;
    bool correction = true;
    double outlier_fraction = 0.1;
    double threshold_step = 0.0;
};

/// Isolation forest grown on random subsamples of `samples`; delta is set so
/// that `outlier_fraction` of the samples fall below it.
Ensemble fit_isolation(const FeatureSpace& fs, std::span<const Point> samples, const IsolationSpec& spec, Rng& rng);

/// Smallest d such that at most ceil(fraction * n) samples have average
/// depth below d.
double outlier_threshold(const Ensemble& iso, std::span<const Point> samples, double fraction);

Point random_point(const FeatureSpace& fs, Rng& rng);

/// Origin predicted differently from `target`; nullopt after `attempts`
/// misses.
std::optional<Point> random_origin(const Model& model, int target, Rng& rng, int attempts = 1000);

/// Gaussian clusters (clamped to [0,1]) on the numerical features; other
/// features drawn uniformly.
std::vector<Point> cluster_samples(const FeatureSpace& fs, std::span<const Point> centers, double spread, int n,
                                   Rng& rng);

/// Two numerical features; class 1 iff f0 > 0.5; class-1 data in two
/// clusters around (0.8, 0.15) and (0.8, 0.85); origin (0.3, 0.5). The
/// cheapest counterfactual (0.5+, 0.5) sits between the clusters.
struct PlausibilityFixture {
    Model model;
    Query query;
};
PlausibilityFixture two_cluster_fixture(std::uint64_t seed);

}  // namespace cfx::synth
