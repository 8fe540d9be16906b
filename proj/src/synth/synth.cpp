#include "cfx/synth.hpp"

#include "cfx/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cfx::synth {

namespace {

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Region of a tree node: value range for numerical features (level range
/// for ordinal/discrete ones) and the allowed values of the others.
struct Box {
    std::vector<double> lo, hi;
    std::vector<std::vector<char>> allowed;

    explicit Box(const FeatureSpace& fs) {
        for (const auto& f : fs) {
            if (f.kind == FeatureKind::Numerical) {
                lo.push_back(0.0);
                hi.push_back(1.0);
            } else if (f.is_ordered_grid()) {
                lo.push_back(0.0);
                hi.push_back(static_cast<double>(f.values.size() - 1));
            } else {
                lo.push_back(0.0);
                hi.push_back(0.0);
            }
            allowed.emplace_back(f.cardinality(), 1);
        }
    }
};

/// Hidden linear concept: per class, one weight per numerical/binary/ordinal
/// feature and one per category.
struct Concept {
    std::vector<std::vector<double>> w;  // [class][feature]
    std::vector<std::vector<std::vector<double>>> cat;  // [class][feature][category]

    double score(const FeatureSpace& fs, const Box& b, std::size_t c) const {
        double s = 0.0;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto& f = fs[i];
            switch (f.kind) {
                case FeatureKind::Numerical: s += w[c][i] * (0.5 * (b.lo[i] + b.hi[i]) - 0.5); break;
                case FeatureKind::Binary: {
                    const double m = b.allowed[i][0] && b.allowed[i][1] ? 0.5 : (b.allowed[i][1] ? 1.0 : 0.0);
                    s += w[c][i] * (m - 0.5);
                    break;
                }
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    const auto a = static_cast<std::size_t>(b.lo[i]), z = static_cast<std::size_t>(b.hi[i]);
                    double m = 0.0;
                    for (std::size_t j = a; j <= z; ++j) m += f.values[j];
                    s += w[c][i] * (m / static_cast<double>(z - a + 1) - 0.5);
                    break;
                }
                case FeatureKind::Categorical: {
                    double m = 0.0, all = 0.0;
                    int n = 0;
                    for (std::size_t j = 0; j < f.categories.size(); ++j) {
                        all += cat[c][i][j];
                        if (b.allowed[i][j]) m += cat[c][i][j], ++n;
                    }
                    s += m / n - all / static_cast<double>(f.categories.size());
                    break;
                }
            }
        }
        return s;
    }
};

class TreeGrower {
public:
    TreeGrower(const FeatureSpace& fs, const ForestSpec& spec, const Concept& hidden, Rng& rng)
        : fs_(fs), spec_(spec), concept_(hidden), rng_(rng) {
        for (std::size_t i = 0; i < fs.size(); ++i)
            if (fs[i].kind == FeatureKind::Numerical) numerical_.push_back(static_cast<int>(i));
    }

    Tree grow() {
        Tree t;
        build(t, Box(fs_), 0);
        return t;
    }

private:
    int build(Tree& t, const Box& box, int depth) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        t.nodes[id].depth = depth;
        Box left = box, right = box;
        std::optional<Split> split;
        if (depth < spec_.depth) split = choose(box, left, right);
        if (!split) {
            t.nodes[id].class_probs = leaf_probs(box);
            return id;
        }
        t.nodes[id].split = *split;
        const int l = build(t, left, depth + 1);
        const int r = build(t, right, depth + 1);
        t.nodes[id].left = l;
        t.nodes[id].right = r;
        return id;
    }

    std::optional<Split> choose(const Box& box, Box& left, Box& right) {
        const int p = static_cast<int>(fs_.size());
        for (int attempt = 0; attempt < 32; ++attempt) {
            const int i = uniform_int(rng_, 0, p - 1);
            const auto ui = static_cast<std::size_t>(i);
            const auto& f = fs_[ui];
            switch (f.kind) {
                case FeatureKind::Numerical: {
                    if (spec_.oblique_prob > 0 && numerical_.size() >= 2 && uniform(rng_, 0, 1) < spec_.oblique_prob) {
                        int k = i;
                        while (k == i) k = numerical_[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(numerical_.size()) - 1))];
                        ObliqueSplit s;
                        s.terms = {{i, uniform(rng_, -1, 1)}, {k, uniform(rng_, -1, 1)}};
                        std::sort(s.terms.begin(), s.terms.end(), [](auto& a, auto& b) { return a.feature < b.feature; });
                        for (const auto& term : s.terms) {
                            const auto u = static_cast<std::size_t>(term.feature);
                            s.intercept += term.coef * uniform(rng_, box.lo[u], box.hi[u]);
                        }
                        return s;
                    }
                    const double lo = box.lo[ui], hi = box.hi[ui];
                    double thr;
                    if (spec_.threshold_step > 0) {
                        const double st = spec_.threshold_step;
                        const int a = static_cast<int>(std::floor(lo / st + 1e-9)) + 1;
                        const int b = static_cast<int>(std::ceil(hi / st - 1e-9)) - 1;
                        if (a > b) continue;
                        thr = uniform_int(rng_, a, b) * st;
                        if (!(thr > 0.0 && thr < 1.0)) continue;
                    } else {
                        if (hi - lo < 1e-3) continue;
                        thr = uniform(rng_, lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
                    }
                    left.hi[ui] = thr;
                    right.lo[ui] = thr;
                    return NumericSplit{i, thr};
                }
                case FeatureKind::Binary:
                    if (!(box.allowed[ui][0] && box.allowed[ui][1])) continue;
                    left.allowed[ui] = {1, 0};
                    right.allowed[ui] = {0, 1};
                    return BinarySplit{i};
                case FeatureKind::Categorical: {
                    std::vector<int> allowed;
                    for (std::size_t j = 0; j < box.allowed[ui].size(); ++j)
                        if (box.allowed[ui][j]) allowed.push_back(static_cast<int>(j));
                    if (allowed.size() < 2) continue;
                    std::vector<int> rset;
                    const bool use_set = allowed.size() >= 3 && uniform(rng_, 0, 1) < spec_.set_split_prob;
                    if (use_set) {
                        std::shuffle(allowed.begin(), allowed.end(), rng_);
                        const int n = uniform_int(rng_, 1, static_cast<int>(allowed.size()) - 1);
                        rset.assign(allowed.begin(), allowed.begin() + n);
                        std::sort(rset.begin(), rset.end());
                    } else {
                        rset = {allowed[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(allowed.size()) - 1))]};
                    }
                    for (std::size_t j = 0; j < box.allowed[ui].size(); ++j) {
                        const bool in = std::binary_search(rset.begin(), rset.end(), static_cast<int>(j));
                        left.allowed[ui][j] = box.allowed[ui][j] && !in;
                        right.allowed[ui][j] = box.allowed[ui][j] && in;
                    }
                    if (use_set) return CategorySetSplit{i, rset};
                    return CategorySplit{i, rset[0]};
                }
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    const int a = static_cast<int>(box.lo[ui]), b = static_cast<int>(box.hi[ui]);
                    if (b <= a) continue;
                    const int j = uniform_int(rng_, a + 1, b);
                    left.hi[ui] = j - 1;
                    right.lo[ui] = j;
                    const auto uj = static_cast<std::size_t>(j);
                    return NumericSplit{i, 0.5 * (f.values[uj - 1] + f.values[uj])};
                }
            }
        }
        return std::nullopt;
    }

    std::vector<double> leaf_probs(const Box& box) const {
        const auto nc = static_cast<std::size_t>(spec_.classes);
        std::vector<double> s(nc);
        for (std::size_t c = 0; c < nc; ++c) s[c] = 6.0 * concept_.score(fs_, box, c);
        const double mx = *std::max_element(s.begin(), s.end());
        double total = 0.0;
        for (auto& v : s) total += (v = std::exp(v - mx));
        for (auto& v : s) v /= total;
        if (spec_.voting == Voting::Hard) {
            const auto k = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
            std::fill(s.begin(), s.end(), 0.0);
            s[k] = 1.0;
        } else {
            // Renormalize so the probabilities sum to one to rounding.
            double sum = 0.0;
            for (std::size_t c = 0; c + 1 < nc; ++c) sum += s[c];
            s[nc - 1] = std::max(0.0, 1.0 - sum);
        }
        return s;
    }

    const FeatureSpace& fs_;
    const ForestSpec& spec_;
    const Concept& concept_;
    Rng& rng_;
    std::vector<int> numerical_;
};

class IsolationGrower {
public:
    IsolationGrower(const FeatureSpace& fs, const IsolationSpec& spec, Rng& rng) : fs_(fs), spec_(spec), rng_(rng) {}

    Tree grow(std::span<const Point> samples, std::vector<std::size_t> idx) {
        Tree t;
        build(t, samples, idx, 0);
        return t;
    }

private:
    int build(Tree& t, std::span<const Point> samples, const std::vector<std::size_t>& idx, int depth) {
        const int id = static_cast<int>(t.nodes.size());
        t.nodes.emplace_back();
        t.nodes[id].depth = depth;
        std::optional<Split> split;
        if (depth < spec_.depth && idx.size() > 1) split = choose(samples, idx);
        if (!split) {
            t.nodes[id].n_samples = static_cast<int>(idx.size());
            return id;
        }
        std::vector<std::size_t> li, ri;
        for (auto k : idx) (goes_left(*split, samples[k]) ? li : ri).push_back(k);
        t.nodes[id].split = *split;
        const int l = build(t, samples, li, depth + 1);
        const int r = build(t, samples, ri, depth + 1);
        t.nodes[id].left = l;
        t.nodes[id].right = r;
        return id;
    }

    std::optional<Split> choose(std::span<const Point> samples, const std::vector<std::size_t>& idx) {
        std::vector<int> order(fs_.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng_);
        for (int i : order) {
            const auto ui = static_cast<std::size_t>(i);
            const auto& f = fs_[ui];
            double mn = 1e300, mx = -1e300;
            for (auto k : idx) mn = std::min(mn, samples[k][ui]), mx = std::max(mx, samples[k][ui]);
            if (!(mx > mn)) continue;
            switch (f.kind) {
                case FeatureKind::Numerical: {
                    double thr;
                    if (spec_.threshold_step > 0) {
                        const double st = spec_.threshold_step;
                        const int a = static_cast<int>(std::ceil(mn / st - 1e-9));
                        const int b = static_cast<int>(std::ceil(mx / st - 1e-9)) - 1;
                        const int a1 = std::max(a, 1), b1 = std::min(b, static_cast<int>(std::round(1.0 / st)) - 1);
                        if (a1 > b1) continue;
                        thr = uniform_int(rng_, a1, b1) * st;
                    } else {
                        thr = uniform(rng_, mn, mx);
                        if (!(thr > 0.0 && thr < 1.0) || thr >= mx) continue;
                    }
                    return NumericSplit{i, thr};
                }
                case FeatureKind::Binary: return BinarySplit{i};
                case FeatureKind::Categorical: {
                    std::vector<int> present;
                    for (auto k : idx) present.push_back(static_cast<int>(samples[k][ui]));
                    std::sort(present.begin(), present.end());
                    present.erase(std::unique(present.begin(), present.end()), present.end());
                    return CategorySplit{i, present[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(present.size()) - 1))]};
                }
                case FeatureKind::Ordinal:
                case FeatureKind::Discrete: {
                    const auto a = *f.level_of(mn), b = *f.level_of(mx);
                    const auto j = static_cast<std::size_t>(uniform_int(rng_, static_cast<int>(a) + 1, static_cast<int>(b)));
                    return NumericSplit{i, 0.5 * (f.values[j - 1] + f.values[j])};
                }
            }
        }
        return std::nullopt;
    }

    const FeatureSpace& fs_;
    const IsolationSpec& spec_;
    Rng& rng_;
};

}  // namespace

FeatureSpace make_features(const FeatureMix& mix) {
    std::vector<FeatureDecl> decls;
    auto name = [&] { return "f" + std::to_string(decls.size()); };
    for (int k = 0; k < mix.numerical; ++k) decls.push_back({.name = name(), .kind = FeatureKind::Numerical});
    for (int k = 0; k < mix.binary; ++k) decls.push_back({.name = name(), .kind = FeatureKind::Binary});
    for (int k = 0; k < mix.categorical; ++k) {
        FeatureDecl f{.name = name(), .kind = FeatureKind::Categorical};
        for (int j = 0; j < mix.categories; ++j) f.categories.push_back("c" + std::to_string(j));
        f.category_costs.assign(static_cast<std::size_t>(mix.categories), 1.0);
        decls.push_back(std::move(f));
    }
    for (int k = 0; k < mix.ordinal; ++k) {
        FeatureDecl f{.name = name(), .kind = FeatureKind::Ordinal};
        for (int j = 0; j < mix.ordinal_levels; ++j) {
            f.categories.push_back("l" + std::to_string(j));
            f.values.push_back(static_cast<double>(j) / (mix.ordinal_levels - 1));
        }
        decls.push_back(std::move(f));
    }
    return FeatureSpace(std::move(decls));
}

Ensemble make_forest(const FeatureSpace& fs, const ForestSpec& spec, Rng& rng) {
    if (spec.classes < 2) throw std::invalid_argument("need at least two classes");
    Concept con;
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto nc = static_cast<std::size_t>(spec.classes);
    con.w.assign(nc, std::vector<double>(fs.size(), 0.0));
    con.cat.assign(nc, std::vector<std::vector<double>>(fs.size()));
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t i = 0; i < fs.size(); ++i) {
            con.w[c][i] = normal(rng);
            for (std::size_t j = 0; j < fs[i].categories.size(); ++j) con.cat[c][i].push_back(normal(rng));
        }
    Ensemble e;
    e.kind = EnsembleKind::Classifier;
    e.voting = spec.voting;
    for (int c = 0; c < spec.classes; ++c) e.classes.push_back("class" + std::to_string(c));
    TreeGrower grower(fs, spec, con, rng);
    for (int t = 0; t < spec.trees; ++t) e.trees.push_back(grower.grow());
    return e;
}

double outlier_threshold(const Ensemble& iso, std::span<const Point> samples, double fraction) {
    std::vector<double> d;
    for (const auto& x : samples) d.push_back(isolation_avg_depth(iso, x));
    std::sort(d.begin(), d.end());
    const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d.size()) - 1e-9));
    return d[std::min(m, d.size() - 1)];
}

Ensemble fit_isolation(const FeatureSpace& fs, std::span<const Point> samples, const IsolationSpec& spec, Rng& rng) {
    if (samples.empty()) throw std::invalid_argument("isolation forest needs samples");
    Ensemble e;
    e.kind = EnsembleKind::Isolation;
    e.correction = spec.correction;
    IsolationGrower grower(fs, spec, rng);
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    const auto psi = std::min<std::size_t>(static_cast<std::size_t>(spec.sample_size), samples.size());
    for (int t = 0; t < spec.trees; ++t) {
        std::shuffle(all.begin(), all.end(), rng);
        std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(psi));
        std::sort(idx.begin(), idx.end());
        e.trees.push_back(grower.grow(samples, std::move(idx)));
    }
    e.delta = outlier_threshold(e, samples, spec.outlier_fraction);
    return e;
}

Point random_point(const FeatureSpace& fs, Rng& rng) {
    Point x(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto& f = fs[i];
        switch (f.kind) {
            case FeatureKind::Numerical: x[i] = uniform(rng, 0.0, 1.0); break;
            case FeatureKind::Binary: x[i] = uniform_int(rng, 0, 1); break;
            case FeatureKind::Categorical: x[i] = uniform_int(rng, 0, static_cast<int>(f.categories.size()) - 1); break;
            case FeatureKind::Ordinal:
            case FeatureKind::Discrete:
                x[i] = f.values[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(f.values.size()) - 1))];
                break;
        }
    }
    return x;
}

std::optional<Point> random_origin(const Model& model, int target, Rng& rng, int attempts) {
    for (int k = 0; k < attempts; ++k) {
        auto x = random_point(model.features, rng);
        if (predict(model.classifier, x).cls != target) return x;
    }
    return std::nullopt;
}

std::vector<Point> cluster_samples(const FeatureSpace& fs, std::span<const Point> centers, double spread, int n,
                                   Rng& rng) {
    std::normal_distribution<double> normal(0.0, spread);
    std::vector<Point> out;
    for (int k = 0; k < n; ++k) {
        const auto& c = centers[static_cast<std::size_t>(k) % centers.size()];
        Point x = random_point(fs, rng);
        for (std::size_t i = 0; i < fs.size(); ++i)
            if (fs[i].kind == FeatureKind::Numerical) x[i] = std::clamp(c[i] + normal(rng), 0.0, 1.0);
        out.push_back(std::move(x));
    }
    return out;
}

PlausibilityFixture two_cluster_fixture(std::uint64_t seed) {
    Rng rng(seed);
    PlausibilityFixture fx;
    auto& m = fx.model;
    m.features = make_features({.numerical = 2});
    m.classifier.kind = EnsembleKind::Classifier;
    m.classifier.classes = {"reject", "accept"};
    Tree t;
    t.nodes.resize(3);
    t.nodes[0].split = NumericSplit{0, 0.5};
    t.nodes[0].left = 1;
    t.nodes[0].right = 2;
    t.nodes[1].class_probs = {1.0, 0.0};
    t.nodes[2].class_probs = {0.0, 1.0};
    m.classifier.trees.push_back(std::move(t));
    const std::vector<Point> centers{{0.8, 0.15}, {0.8, 0.85}};
    const auto samples = cluster_samples(m.features, centers, 0.05, 256, rng);
    m.isolation = fit_isolation(m.features, samples, {.trees = 10, .depth = 5, .sample_size = 64}, rng);
    validate_model(m);
    fx.query.origin = {0.3, 0.5};
    fx.query.target_class = 1;
    fx.query.objective.norm = Norm::L1;
    fx.query.objective.piecewise.assign(2, std::nullopt);
    fx.query.use_plausibility = true;
    return fx;
}

}  // namespace cfx::synth
