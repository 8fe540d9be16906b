#pragma once

#include "cfx/feature_space.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cfx {

/// Left iff x[feature] <= threshold. Also used for ordinal/discrete features,
/// with the threshold expressed in grid-value units.
struct NumericSplit {
    int feature = 0;
    double threshold = 0.5;
};

/// Left iff x[feature] == 0.
struct BinarySplit {
    int feature = 0;
};

/// One-vs-all: right iff the category equals `category`.
struct CategorySplit {
    int feature = 0;
    int category = 0;
};

/// Right iff the category belongs to `right` (sorted, unique).
struct CategorySetSplit {
    int feature = 0;
    std::vector<int> right;
};

/// Left iff sum_k a_k x_k <= intercept, over numerical features only.
struct ObliqueSplit {
    struct Term {
        int feature = 0;
        double coef = 0.0;
    };
    std::vector<Term> terms;
    double intercept = 0.0;
};

using Split = std::variant<NumericSplit, BinarySplit, CategorySplit, CategorySetSplit, ObliqueSplit>;

struct TreeNode {
    static constexpr int kNone = -1;

    int left = kNone;
    int right = kNone;
    Split split;
    int depth = 0;  // edge count from the root, recomputed at load time

    // classifier leaves
    std::vector<double> class_probs;
    // isolation leaves
    int n_samples = 1;

    bool is_leaf() const { return left == kNone; }
};

struct Tree {
    double weight = 1.0;
    std::vector<TreeNode> nodes;  // root at index 0

    int max_depth() const;
    std::size_t num_internal() const;
    std::size_t num_leaves() const;
    /// Ids of internal nodes at `depth`, ascending.
    std::vector<int> internal_at_depth(int depth) const;
    /// Recomputes node depths; throws std::invalid_argument on dangling or
    /// repeated child ids and on cycles.
    void compute_depths();
};

enum class EnsembleKind { Classifier, Isolation };
enum class Voting { Soft, Hard };

struct Ensemble {
    EnsembleKind kind = EnsembleKind::Classifier;
    Voting voting = Voting::Soft;
    std::vector<std::string> classes;  // classifier only
    std::vector<Tree> trees;

    // isolation only
    double delta = 0.0;
    bool correction = true;

    std::size_t num_classes() const { return classes.size(); }
    std::size_t num_internal() const;
    double total_weight() const;
    int max_depth() const;
};

/// Expected path length of an unsuccessful search in a binary search tree
/// built on n points: 0 for n <= 1, 1 for n = 2, otherwise
/// 2(ln(n-1) + Euler-gamma) - 2(n-1)/n.
double expected_path_correction(int n_samples);

/// Depth a leaf contributes to the isolation score.
double leaf_isolation_depth(const Ensemble& iso, const TreeNode& leaf);

struct Model {
    FeatureSpace features;
    Ensemble classifier;
    std::optional<Ensemble> isolation;
};

// Routing ----------------------------------------------------------------

bool goes_left(const Split& split, std::span<const double> x);
/// Id of the leaf reached by x.
int route(const Tree& tree, std::span<const double> x);

struct Prediction {
    int cls = 0;
    std::vector<double> scores;
};

/// z_c = sum_t w_t p_{t,leaf(x),c}; class = argmax with lowest-index ties.
Prediction predict(const Ensemble& e, std::span<const double> x);
/// predict() preceded by a domain check against the feature space.
Prediction predict_checked(const Model& m, std::span<const double> x);

/// Mean over isolation trees of the reached leaf depth (plus correction when
/// enabled on the ensemble).
double isolation_avg_depth(const Ensemble& iso, std::span<const double> x);

/// Sorted unique NumericSplit thresholds on `feature` over the ensembles.
std::vector<double> collect_split_levels(std::span<const Ensemble* const> ensembles, int feature);
std::vector<double> collect_split_levels(const Model& m, int feature, bool include_isolation);

// Batch kernels ------------------------------------------------------------
// Row-major points (n_points x n_features). The OpenMP kernels must return
// exactly what the serial references return.

std::vector<int> predict_batch_serial(const Ensemble& e, std::span<const double> points,
                                      std::size_t n_features);
std::vector<int> predict_batch(const Ensemble& e, std::span<const double> points,
                               std::size_t n_features, int threads = 0);
std::vector<double> isolation_depth_batch_serial(const Ensemble& iso, std::span<const double> points,
                                                 std::size_t n_features);
std::vector<double> isolation_depth_batch(const Ensemble& iso, std::span<const double> points,
                                          std::size_t n_features, int threads = 0);

}  // namespace cfx
