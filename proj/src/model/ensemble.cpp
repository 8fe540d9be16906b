#include "cfx/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfx {

int Tree::max_depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

std::size_t Tree::num_internal() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(),
                                                  [](const TreeNode& n) { return !n.is_leaf(); }));
}

std::size_t Tree::num_leaves() const { return nodes.size() - num_internal(); }

std::vector<int> Tree::internal_at_depth(int depth) const {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(nodes.size()); ++v)
        if (!nodes[v].is_leaf() && nodes[v].depth == depth) out.push_back(v);
    return out;
}

void Tree::compute_depths() {
    const int n = static_cast<int>(nodes.size());
    if (n == 0) throw std::invalid_argument("tree has no nodes");
    std::vector<int> parent_count(n, 0);
    for (int v = 0; v < n; ++v) {
        const auto& node = nodes[v];
        if (node.is_leaf()) {
            if (node.right != TreeNode::kNone)
                throw std::invalid_argument("node " + std::to_string(v) + " has a right child but no left child");
            continue;
        }
        for (int c : {node.left, node.right}) {
            if (c < 0 || c >= n)
                throw std::invalid_argument("node " + std::to_string(v) + " references missing child " +
                                            std::to_string(c));
            if (c == 0) throw std::invalid_argument("node " + std::to_string(v) + " points back to the root");
        }
        if (node.left == node.right)
            throw std::invalid_argument("node " + std::to_string(v) + " has identical children");
        ++parent_count[node.left];
        ++parent_count[node.right];
    }
    for (int v = 1; v < n; ++v) {
        if (parent_count[v] != 1)
            throw std::invalid_argument("node " + std::to_string(v) + " has " + std::to_string(parent_count[v]) +
                                        " parents");
    }
    // Every non-root node has exactly one parent and the root none, so a
    // traversal from the root either reaches all n nodes or a cycle exists.
    std::vector<int> stack{0};
    int visited = 0;
    nodes[0].depth = 0;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        ++visited;
        if (nodes[v].is_leaf()) continue;
        for (int c : {nodes[v].left, nodes[v].right}) {
            nodes[c].depth = nodes[v].depth + 1;
            stack.push_back(c);
        }
    }
    if (visited != n) throw std::invalid_argument("tree contains a cycle or unreachable nodes");
}

std::size_t Ensemble::num_internal() const {
    std::size_t n = 0;
    for (const auto& t : trees) n += t.num_internal();
    return n;
}

double Ensemble::total_weight() const {
    double w = 0.0;
    for (const auto& t : trees) w += t.weight;
    return w;
}

int Ensemble::max_depth() const {
    int d = 0;
    for (const auto& t : trees) d = std::max(d, t.max_depth());
    return d;
}

double expected_path_correction(int n_samples) {
    constexpr double kEulerGamma = 0.5772156649015329;
    if (n_samples <= 1) return 0.0;
    if (n_samples == 2) return 1.0;
    const double n = n_samples;
    return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

double leaf_isolation_depth(const Ensemble& iso, const TreeNode& leaf) {
    return leaf.depth + (iso.correction ? expected_path_correction(leaf.n_samples) : 0.0);
}

namespace {

struct LeftVisitor {
    std::span<const double> x;

    bool operator()(const NumericSplit& s) const { return x[s.feature] <= s.threshold; }
    bool operator()(const BinarySplit& s) const { return x[s.feature] == 0.0; }
    bool operator()(const CategorySplit& s) const { return static_cast<int>(x[s.feature]) != s.category; }
    bool operator()(const CategorySetSplit& s) const {
        return !std::binary_search(s.right.begin(), s.right.end(), static_cast<int>(x[s.feature]));
    }
    bool operator()(const ObliqueSplit& s) const {
        double acc = 0.0;
        for (const auto& t : s.terms) acc += t.coef * x[t.feature];
        return acc <= s.intercept;
    }
};

}  // namespace

bool goes_left(const Split& split, std::span<const double> x) { return std::visit(LeftVisitor{x}, split); }

int route(const Tree& tree, std::span<const double> x) {
    int v = 0;
    while (!tree.nodes[v].is_leaf()) {
        const auto& node = tree.nodes[v];
        v = goes_left(node.split, x) ? node.left : node.right;
    }
    return v;
}

Prediction predict(const Ensemble& e, std::span<const double> x) {
    Prediction p;
    p.scores.assign(e.num_classes(), 0.0);
    for (const auto& t : e.trees) {
        const auto& leaf = t.nodes[route(t, x)];
        for (std::size_t c = 0; c < p.scores.size(); ++c) p.scores[c] += t.weight * leaf.class_probs[c];
    }
    p.cls = 0;
    for (std::size_t c = 1; c < p.scores.size(); ++c)
        if (p.scores[c] > p.scores[p.cls]) p.cls = static_cast<int>(c);
    return p;
}

Prediction predict_checked(const Model& m, std::span<const double> x) {
    m.features.check_point(x);
    return predict(m.classifier, x);
}

double isolation_avg_depth(const Ensemble& iso, std::span<const double> x) {
    if (iso.kind != EnsembleKind::Isolation) throw std::invalid_argument("not an isolation forest");
    if (iso.trees.empty()) return 0.0;
    double total = 0.0;
    for (const auto& t : iso.trees) total += leaf_isolation_depth(iso, t.nodes[route(t, x)]);
    return total / static_cast<double>(iso.trees.size());
}

std::vector<double> collect_split_levels(std::span<const Ensemble* const> ensembles, int feature) {
    std::vector<double> levels;
    for (const Ensemble* e : ensembles) {
        for (const auto& t : e->trees)
            for (const auto& n : t.nodes) {
                if (n.is_leaf()) continue;
                if (const auto* s = std::get_if<NumericSplit>(&n.split); s && s->feature == feature)
                    levels.push_back(s->threshold);
            }
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

std::vector<double> collect_split_levels(const Model& m, int feature, bool include_isolation) {
    std::vector<const Ensemble*> es{&m.classifier};
    if (include_isolation && m.isolation) es.push_back(&*m.isolation);
    return collect_split_levels(std::span<const Ensemble* const>(es), feature);
}

}  // namespace cfx
