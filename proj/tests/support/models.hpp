#pragma once

#include "cfx/model_io.hpp"
#include "cfx/query.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cfx::testing {

inline TreeNode leaf(std::vector<double> probs) {
    TreeNode n;
    n.class_probs = std::move(probs);
    return n;
}

inline TreeNode iso_leaf(int n_samples = 1) {
    TreeNode n;
    n.n_samples = n_samples;
    return n;
}

inline TreeNode inner(Split s, int left, int right) {
    TreeNode n;
    n.split = std::move(s);
    n.left = left;
    n.right = right;
    return n;
}

inline Tree make_tree(std::vector<TreeNode> nodes, double weight = 1.0) {
    Tree t;
    t.weight = weight;
    t.nodes = std::move(nodes);
    t.compute_depths();
    return t;
}

/// Split on `s`, class 0 on the left, class 1 on the right.
inline Tree stump(Split s) {
    return make_tree({inner(std::move(s), 1, 2), leaf({1, 0}), leaf({0, 1})});
}

inline FeatureDecl numerical(std::string name) {
    FeatureDecl f;
    f.name = std::move(name);
    return f;
}

inline FeatureDecl binary(std::string name) {
    FeatureDecl f;
    f.name = std::move(name);
    f.kind = FeatureKind::Binary;
    return f;
}

inline FeatureDecl categorical(std::string name, int k) {
    FeatureDecl f;
    f.name = std::move(name);
    f.kind = FeatureKind::Categorical;
    for (int j = 0; j < k; ++j) f.categories.push_back("c" + std::to_string(j));
    f.category_costs.assign(static_cast<std::size_t>(k), 1.0);
    return f;
}

inline FeatureDecl ordinal(std::string name, int k) {
    FeatureDecl f;
    f.name = std::move(name);
    f.kind = FeatureKind::Ordinal;
    for (int j = 0; j < k; ++j) {
        f.categories.push_back("l" + std::to_string(j));
        f.values.push_back(static_cast<double>(j) / (k - 1));
    }
    return f;
}

inline Model make_model(std::vector<FeatureDecl> features, std::vector<Tree> trees, int classes = 2) {
    Model m;
    m.features = FeatureSpace(std::move(features));
    m.classifier.voting = Voting::Soft;
    for (int c = 0; c < classes; ++c) m.classifier.classes.push_back("k" + std::to_string(c));
    m.classifier.trees = std::move(trees);
    validate_model(m);
    return m;
}

inline Query make_query(const Model& m, Point origin, int target, Norm norm = Norm::L1) {
    Query q;
    q.origin = std::move(origin);
    q.target_class = target;
    q.objective.norm = norm;
    q.objective.piecewise.assign(m.features.size(), std::nullopt);
    return q;
}

inline const char* kStumpModel = R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":2},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})";

inline const char* kStumpQuery = R"({"origin":{"a":0.3},"target_class":"yes","objective":{"norm":"l1"}})";

}  // namespace cfx::testing
