#include "cfx/model_io.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cfx {

using detail::Json;
using detail::Reader;

namespace {

FeatureDecl parse_feature(const Reader& r) {
    FeatureDecl f;
    f.name = r.get<std::string>("name");
    const auto kind = r.get<std::string>("kind");
    const auto k = parse_feature_kind(kind);
    if (!k) r.at("kind").fail("unknown feature kind '" + kind + "'");
    f.kind = *k;
    if (r.has("actionability")) {
        const auto a = r.get<std::string>("actionability");
        const auto act = parse_actionability(a);
        if (!act) r.at("actionability").fail("unknown actionability '" + a + "'");
        f.actionability = *act;
    }
    f.cost_down = r.get_or("cost_down", 1.0);
    f.cost_up = r.get_or("cost_up", 1.0);
    f.cost_true = r.get_or("cost_true", 1.0);
    f.cost_false = r.get_or("cost_false", 1.0);
    for (const char* key : {"cost_down", "cost_up", "cost_true", "cost_false"})
        if (r.has(key) && r.get<double>(key) < 0) r.at(key).fail("cost weights must be nonnegative");

    switch (f.kind) {
        case FeatureKind::Numerical:
        case FeatureKind::Binary: break;
        case FeatureKind::Categorical: {
            f.categories = r.get<std::vector<std::string>>("categories");
            if (f.categories.size() < 2) r.at("categories").fail("categorical features need at least 2 categories");
            if (r.has("category_costs")) {
                f.category_costs = r.get<std::vector<double>>("category_costs");
                if (f.category_costs.size() != f.categories.size())
                    r.at("category_costs").fail("expected one cost per category");
                for (double c : f.category_costs)
                    if (c < 0) r.at("category_costs").fail("cost weights must be nonnegative");
            } else {
                f.category_costs.assign(f.categories.size(), 1.0);
            }
            break;
        }
        case FeatureKind::Ordinal: {
            f.categories = r.get<std::vector<std::string>>("levels");
            if (f.categories.size() < 2) r.at("levels").fail("ordinal features need at least 2 levels");
            if (r.has("values")) {
                f.values = r.get<std::vector<double>>("values");
                if (f.values.size() != f.categories.size()) r.at("values").fail("expected one value per level");
            } else {
                const double k = static_cast<double>(f.categories.size()) - 1.0;
                for (std::size_t j = 0; j < f.categories.size(); ++j) f.values.push_back(static_cast<double>(j) / k);
            }
            break;
        }
        case FeatureKind::Discrete: {
            f.values = r.get<std::vector<double>>("values");
            if (f.values.size() < 2) r.at("values").fail("discrete features need at least 2 grid values");
            break;
        }
    }
    if (f.is_ordered_grid()) {
        for (std::size_t j = 0; j < f.values.size(); ++j) {
            if (f.values[j] < 0.0 || f.values[j] > 1.0) r.at("values").fail("grid values must lie in [0,1]");
            if (j > 0 && !(f.values[j] > f.values[j - 1])) r.at("values").fail("grid values must be strictly increasing");
        }
    }
    if (!f.categories.empty()) {
        std::set<std::string> seen(f.categories.begin(), f.categories.end());
        if (seen.size() != f.categories.size())
            r.at(f.kind == FeatureKind::Ordinal ? "levels" : "categories").fail("names must be unique");
    }
    return f;
}

Split parse_split(const Reader& r) {
    const auto kind = r.get<std::string>("split_kind");
    if (kind == "numeric") return NumericSplit{r.get<int>("feature"), r.get<double>("threshold")};
    if (kind == "binary") return BinarySplit{r.get<int>("feature")};
    if (kind == "category") return CategorySplit{r.get<int>("feature"), r.get<int>("category")};
    if (kind == "category_set") {
        CategorySetSplit s{r.get<int>("feature"), r.get<std::vector<int>>("categories_right")};
        std::sort(s.right.begin(), s.right.end());
        if (std::adjacent_find(s.right.begin(), s.right.end()) != s.right.end())
            r.at("categories_right").fail("duplicate category");
        return s;
    }
    if (kind == "oblique") {
        ObliqueSplit s;
        const auto terms = r.at("coefficients");
        for (std::size_t k = 0; k < terms.size(); ++k) {
            const auto t = terms.at(k);
            s.terms.push_back({t.get<int>("feature"), t.get<double>("coef")});
        }
        s.intercept = r.get<double>("intercept");
        return s;
    }
    r.at("split_kind").fail("unknown split kind '" + kind + "'");
}

Tree parse_tree(const Reader& r, EnsembleKind ekind) {
    Tree t;
    t.weight = ekind == EnsembleKind::Classifier ? r.get_or("weight", 1.0) : 1.0;
    const auto nodes = r.at("nodes");
    if (nodes.size() == 0) nodes.fail("tree has no nodes");
    t.nodes.resize(nodes.size());
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        const auto n = nodes.at(v);
        auto& node = t.nodes[v];
        if (n.has("left") || n.has("right") || n.has("split_kind")) {
            node.left = n.get<int>("left");
            node.right = n.get<int>("right");
            for (const char* key : {"left", "right"}) {
                const int c = key[0] == 'l' ? node.left : node.right;
                if (c <= 0 || c >= static_cast<int>(nodes.size()))
                    n.at(key).fail("child " + std::to_string(c) + " is not a node of this tree");
            }
            node.split = parse_split(n);
        } else if (ekind == EnsembleKind::Classifier) {
            node.class_probs = n.get<std::vector<double>>("class_probs");
        } else {
            node.depth = n.get<int>("depth");
            node.n_samples = n.get_or("n_samples", 1);
        }
    }
    return t;
}

Ensemble parse_ensemble(const Reader& r, EnsembleKind kind) {
    Ensemble e;
    e.kind = kind;
    if (kind == EnsembleKind::Classifier) {
        const auto voting = r.get_or<std::string>("voting", "soft");
        if (voting == "soft") e.voting = Voting::Soft;
        else if (voting == "hard") e.voting = Voting::Hard;
        else r.at("voting").fail("voting must be 'soft' or 'hard'");
        e.classes = r.get<std::vector<std::string>>("classes");
    } else {
        e.delta = r.get<double>("delta");
        e.correction = r.get_or("correction", true);
    }
    const auto trees = r.at("trees");
    for (std::size_t t = 0; t < trees.size(); ++t) e.trees.push_back(parse_tree(trees.at(t), kind));
    return e;
}

std::string tree_path(const std::string& ens, std::size_t t) { return "/" + ens + "/trees/" + std::to_string(t); }

void validate_split(const FeatureSpace& fs, const Split& split, const std::string& path) {
    auto feature_of = [&](int i, const char* key) -> const FeatureDecl& {
        if (i < 0 || i >= static_cast<int>(fs.size()))
            throw DocumentError(path + "/" + key, "feature index " + std::to_string(i) + " out of range");
        return fs[static_cast<std::size_t>(i)];
    };
    auto mismatch = [&](const FeatureDecl& f, const char* split_kind) {
        throw DocumentError(path + "/split_kind", std::string(split_kind) + " split on " +
                                                      std::string(to_string(f.kind)) + " feature '" + f.name + "'");
    };
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, NumericSplit>) {
                const auto& f = feature_of(s.feature, "feature");
                if (f.kind == FeatureKind::Numerical) {
                    if (!(s.threshold > 0.0 && s.threshold < 1.0))
                        throw DocumentError(path + "/threshold", "numeric thresholds must lie in (0,1)");
                } else if (f.is_ordered_grid()) {
                    if (!(s.threshold >= f.values.front() && s.threshold < f.values.back()))
                        throw DocumentError(path + "/threshold", "threshold does not separate the grid of '" + f.name + "'");
                } else {
                    mismatch(f, "numeric");
                }
            } else if constexpr (std::is_same_v<S, BinarySplit>) {
                const auto& f = feature_of(s.feature, "feature");
                if (f.kind != FeatureKind::Binary) mismatch(f, "binary");
            } else if constexpr (std::is_same_v<S, CategorySplit>) {
                const auto& f = feature_of(s.feature, "feature");
                if (f.kind != FeatureKind::Categorical) mismatch(f, "category");
                if (s.category < 0 || s.category >= static_cast<int>(f.categories.size()))
                    throw DocumentError(path + "/category", "category index out of range");
            } else if constexpr (std::is_same_v<S, CategorySetSplit>) {
                const auto& f = feature_of(s.feature, "feature");
                if (f.kind != FeatureKind::Categorical) mismatch(f, "category_set");
                if (s.right.empty() || s.right.size() >= f.categories.size())
                    throw DocumentError(path + "/categories_right", "degenerate category set (empty or full)");
                for (int c : s.right)
                    if (c < 0 || c >= static_cast<int>(f.categories.size()))
                        throw DocumentError(path + "/categories_right", "category index out of range");
            } else {
                if (s.terms.empty()) throw DocumentError(path + "/coefficients", "oblique split without terms");
                for (std::size_t k = 0; k < s.terms.size(); ++k) {
                    const auto& f = feature_of(s.terms[k].feature, "coefficients");
                    if (f.kind != FeatureKind::Numerical)
                        throw DocumentError(path + "/coefficients/" + std::to_string(k),
                                            "oblique split references non-numerical feature '" + f.name + "'");
                }
            }
        },
        split);
}

void validate_ensemble(const FeatureSpace& fs, Ensemble& e, const std::string& name) {
    if (e.kind == EnsembleKind::Classifier) {
        if (e.classes.size() < 2) throw DocumentError("/" + name + "/classes", "need at least 2 classes");
        std::set<std::string> seen(e.classes.begin(), e.classes.end());
        if (seen.size() != e.classes.size()) throw DocumentError("/" + name + "/classes", "class names must be unique");
    } else if (!std::isfinite(e.delta)) {
        throw DocumentError("/" + name + "/delta", "delta must be finite");
    }
    if (e.trees.empty()) throw DocumentError("/" + name + "/trees", "ensemble has no trees");
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
        auto& tree = e.trees[t];
        const auto tpath = tree_path(name, t);
        if (!(tree.weight > 0.0) || !std::isfinite(tree.weight))
            throw DocumentError(tpath + "/weight", "tree weights must be positive");
        std::vector<int> declared_depth;
        for (const auto& n : tree.nodes) declared_depth.push_back(n.depth);
        try {
            tree.compute_depths();
        } catch (const std::invalid_argument& ex) {
            throw DocumentError(tpath + "/nodes", ex.what());
        }
        for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
            const auto& node = tree.nodes[v];
            const auto npath = tpath + "/nodes/" + std::to_string(v);
            if (!node.is_leaf()) {
                validate_split(fs, node.split, npath);
                continue;
            }
            if (e.kind == EnsembleKind::Classifier) {
                if (node.class_probs.size() != e.classes.size())
                    throw DocumentError(npath + "/class_probs", "expected " + std::to_string(e.classes.size()) + " probabilities");
                double sum = 0.0;
                for (double p : node.class_probs) {
                    if (!(p >= 0.0 && p <= 1.0)) throw DocumentError(npath + "/class_probs", "probabilities must lie in [0,1]");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw DocumentError(npath + "/class_probs", "probabilities must sum to 1");
                if (e.voting == Voting::Hard) {
                    const auto ones = std::count(node.class_probs.begin(), node.class_probs.end(), 1.0);
                    if (ones != 1) throw DocumentError(npath + "/class_probs", "hard voting requires one-hot leaves");
                }
            } else {
                if (declared_depth[v] != node.depth)
                    throw DocumentError(npath + "/depth", "declared depth " + std::to_string(declared_depth[v]) +
                                                              " differs from root distance " + std::to_string(node.depth));
                if (node.n_samples < 1) throw DocumentError(npath + "/n_samples", "n_samples must be >= 1");
            }
        }
    }
}

Json split_to_json(const Split& split) {
    Json j;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, NumericSplit>) {
                j["split_kind"] = "numeric";
                j["feature"] = s.feature;
                j["threshold"] = s.threshold;
            } else if constexpr (std::is_same_v<S, BinarySplit>) {
                j["split_kind"] = "binary";
                j["feature"] = s.feature;
            } else if constexpr (std::is_same_v<S, CategorySplit>) {
                j["split_kind"] = "category";
                j["feature"] = s.feature;
                j["category"] = s.category;
            } else if constexpr (std::is_same_v<S, CategorySetSplit>) {
                j["split_kind"] = "category_set";
                j["feature"] = s.feature;
                j["categories_right"] = s.right;
            } else {
                j["split_kind"] = "oblique";
                Json terms = Json::array();
                for (const auto& t : s.terms) terms.push_back(Json{{"feature", t.feature}, {"coef", t.coef}});
                j["coefficients"] = terms;
                j["intercept"] = s.intercept;
            }
        },
        split);
    return j;
}

Json tree_to_json(const Ensemble& e, const Tree& t) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) {
        Json j;
        if (!n.is_leaf()) {
            j = split_to_json(n.split);
            j["left"] = n.left;
            j["right"] = n.right;
        } else if (e.kind == EnsembleKind::Classifier) {
            j["class_probs"] = n.class_probs;
        } else {
            j["depth"] = n.depth;
            j["n_samples"] = n.n_samples;
        }
        nodes.push_back(std::move(j));
    }
    Json out;
    if (e.kind == EnsembleKind::Classifier) out["weight"] = t.weight;
    out["nodes"] = std::move(nodes);
    return out;
}

}  // namespace

void validate_model(Model& m) {
    validate_ensemble(m.features, m.classifier, "classifier");
    if (m.classifier.kind != EnsembleKind::Classifier)
        throw DocumentError("/classifier", "classifier section holds a non-classifier ensemble");
    if (m.isolation) {
        if (m.isolation->kind != EnsembleKind::Isolation)
            throw DocumentError("/isolation_forest", "isolation section holds a non-isolation ensemble");
        validate_ensemble(m.features, *m.isolation, "isolation_forest");
    }
}

Model parse_model(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& ex) {
        throw DocumentError("", std::string("malformed JSON: ") + ex.what());
    }
    const Reader root(doc, "");
    if (!root.is_object()) root.fail("model document must be an object");
    const int version = root.get<int>("schema_version");
    if (version != kSchemaVersion) root.at("schema_version").fail("unsupported schema version " + std::to_string(version));

    Model m;
    std::vector<FeatureDecl> decls;
    const auto features = root.at("features");
    for (std::size_t i = 0; i < features.size(); ++i) decls.push_back(parse_feature(features.at(i)));
    try {
        m.features = FeatureSpace(std::move(decls));
    } catch (const std::invalid_argument& ex) {
        features.fail(ex.what());
    }
    m.classifier = parse_ensemble(root.at("classifier"), EnsembleKind::Classifier);
    if (root.has("isolation_forest") && !root.at("isolation_forest").is_null())
        m.isolation = parse_ensemble(root.at("isolation_forest"), EnsembleKind::Isolation);
    validate_model(m);
    return m;
}

Model load_model(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw DocumentError("", "cannot open model file '" + file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

std::string serialize_model(const Model& m) {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    Json features = Json::array();
    for (const auto& f : m.features) {
        Json j;
        j["name"] = f.name;
        j["kind"] = to_string(f.kind);
        j["actionability"] = to_string(f.actionability);
        switch (f.kind) {
            case FeatureKind::Numerical:
                j["cost_down"] = f.cost_down;
                j["cost_up"] = f.cost_up;
                break;
            case FeatureKind::Binary:
                j["cost_true"] = f.cost_true;
                j["cost_false"] = f.cost_false;
                break;
            case FeatureKind::Categorical:
                j["categories"] = f.categories;
                j["category_costs"] = f.category_costs;
                break;
            case FeatureKind::Ordinal:
                j["levels"] = f.categories;
                j["values"] = f.values;
                j["cost_down"] = f.cost_down;
                j["cost_up"] = f.cost_up;
                break;
            case FeatureKind::Discrete:
                j["values"] = f.values;
                j["cost_down"] = f.cost_down;
                j["cost_up"] = f.cost_up;
                break;
        }
        features.push_back(std::move(j));
    }
    doc["features"] = std::move(features);

    Json cls;
    cls["voting"] = m.classifier.voting == Voting::Soft ? "soft" : "hard";
    cls["classes"] = m.classifier.classes;
    Json trees = Json::array();
    for (const auto& t : m.classifier.trees) trees.push_back(tree_to_json(m.classifier, t));
    cls["trees"] = std::move(trees);
    doc["classifier"] = std::move(cls);

    if (m.isolation) {
        Json iso;
        iso["delta"] = m.isolation->delta;
        iso["correction"] = m.isolation->correction;
        Json itrees = Json::array();
        for (const auto& t : m.isolation->trees) itrees.push_back(tree_to_json(*m.isolation, t));
        iso["trees"] = std::move(itrees);
        doc["isolation_forest"] = std::move(iso);
    }
    return doc.dump(1, ' ') + "\n";
}

}  // namespace cfx
