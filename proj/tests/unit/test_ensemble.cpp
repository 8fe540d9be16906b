#include "doctest.h"

#include "cfx/synth.hpp"
#include "support/models.hpp"

#include <set>

using namespace cfx;
using namespace cfx::testing;

TEST_CASE("minimal document parses to one tree with three nodes") {
    const Model m = parse_model(kStumpModel);
    REQUIRE(m.classifier.trees.size() == 1);
    CHECK(m.classifier.trees[0].nodes.size() == 3);
    CHECK(m.classifier.trees[0].max_depth() == 1);
    CHECK(!m.isolation);
}

TEST_CASE("dangling child id is reported with its path") {
    const std::string doc = R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":7},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})";
    try {
        parse_model(doc);
        FAIL("expected a DocumentError");
    } catch (const DocumentError& e) {
        CHECK(e.path().find("/classifier/trees/0/nodes/0") == 0);
    }
}

TEST_CASE("schema violations are rejected") {
    auto rejects = [](const std::string& doc) {
        CHECK_THROWS_AS(parse_model(doc), DocumentError);
    };
    // leaf probabilities do not sum to one
    rejects(R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":2},
  {"class_probs":[0.7,0]},{"class_probs":[0,1]}]}]}})");
    // binary split on a numerical feature
    rejects(R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"binary","left":1,"right":2},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})");
    // threshold outside (0,1)
    rejects(R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":1.5,"left":1,"right":2},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})");
    // wrong schema version
    rejects(R"({"schema_version":2,"features":[],"classifier":{"voting":"soft","classes":["a"],"trees":[]}})");
    // repeated child
    rejects(R"({"schema_version":1,"features":[{"name":"a","kind":"numerical"}],
 "classifier":{"voting":"soft","classes":["no","yes"],"trees":[{"weight":1,"nodes":[
  {"feature":0,"split_kind":"numeric","threshold":0.5,"left":1,"right":1},
  {"class_probs":[1,0]},{"class_probs":[0,1]}]}]}})");
}

TEST_CASE("serialization round trip is a fixed point") {
    synth::Rng rng(3);
    Model m;
    m.features = synth::make_features({.numerical = 3, .binary = 1, .categorical = 1, .ordinal = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 20, .depth = 4, .classes = 3}, rng);
    const auto samples = synth::cluster_samples(m.features, std::vector<Point>{synth::random_point(m.features, rng)},
                                                0.2, 200, rng);
    m.isolation = synth::fit_isolation(m.features, samples, {.trees = 10, .depth = 5}, rng);
    validate_model(m);
    const std::string once = serialize_model(m);
    const Model back = parse_model(once);
    CHECK(serialize_model(back) == once);
    for (int k = 0; k < 100; ++k) {
        const Point x = synth::random_point(m.features, rng);
        CHECK(predict(back.classifier, x).scores == predict(m.classifier, x).scores);
        CHECK(isolation_avg_depth(*back.isolation, x) == isolation_avg_depth(*m.isolation, x));
    }
}

TEST_CASE("predict follows the left-iff-below rule") {
    const Model m = parse_model(kStumpModel);
    const auto p = predict(m.classifier, Point{0.3});
    CHECK(p.cls == 0);
    CHECK(p.scores == std::vector<double>{1.0, 0.0});
    CHECK(predict(m.classifier, Point{0.5}).cls == 0);
    CHECK(predict(m.classifier, Point{0.5000001}).cls == 1);
}

TEST_CASE("ties go to the lowest class index") {
    Tree a = make_tree({leaf({1, 0})});
    Tree b = make_tree({leaf({0, 1})});
    const Model m = make_model({numerical("a")}, {a, b});
    const auto p = predict(m.classifier, Point{0.3});
    CHECK(p.scores == std::vector<double>{1.0, 1.0});
    CHECK(p.cls == 0);
}

TEST_CASE("routing of binary, category and oblique splits") {
    CHECK(goes_left(BinarySplit{0}, Point{0.0}));
    CHECK(!goes_left(BinarySplit{0}, Point{1.0}));
    CHECK(goes_left(CategorySplit{0, 2}, Point{1.0}));
    CHECK(!goes_left(CategorySplit{0, 2}, Point{2.0}));
    CHECK(!goes_left(CategorySetSplit{0, {1, 3}}, Point{3.0}));
    CHECK(goes_left(CategorySetSplit{0, {1, 3}}, Point{2.0}));
    const ObliqueSplit o{{{0, 1.0}, {1, 1.0}}, 0.5};
    CHECK(goes_left(o, Point{0.2, 0.3}));
    CHECK(!goes_left(o, Point{0.2, 0.31}));
}

TEST_CASE("isolation depth is the mean leaf depth") {
    Ensemble iso;
    iso.kind = EnsembleKind::Isolation;
    iso.correction = false;
    // leaf at depth 2
    iso.trees.push_back(make_tree({inner(NumericSplit{0, 0.5}, 1, 2), inner(NumericSplit{0, 0.2}, 3, 4), iso_leaf(),
                                   iso_leaf(), iso_leaf()}));
    CHECK(isolation_avg_depth(iso, Point{0.1}) == doctest::Approx(2.0));

    // second tree reaching depth 4
    iso.trees.push_back(make_tree({inner(NumericSplit{0, 0.9}, 1, 2), inner(NumericSplit{0, 0.8}, 3, 4), iso_leaf(),
                                   inner(NumericSplit{0, 0.7}, 5, 6), iso_leaf(), inner(NumericSplit{0, 0.6}, 7, 8),
                                   iso_leaf(), iso_leaf(), iso_leaf()}));
    CHECK(route(iso.trees[1], Point{0.1}) == 7);
    CHECK(isolation_avg_depth(iso, Point{0.1}) == doctest::Approx(3.0));

    iso.correction = true;
    iso.trees[0].nodes[3].n_samples = 4;
    const double c4 = expected_path_correction(4);
    CHECK(c4 == doctest::Approx(2.0 * (std::log(3.0) + 0.5772156649015329) - 1.5));
    CHECK(isolation_avg_depth(iso, Point{0.1}) == doctest::Approx((2.0 + c4 + 4.0) / 2.0));
    CHECK(expected_path_correction(1) == 0.0);
    CHECK(expected_path_correction(2) == 1.0);
}

TEST_CASE("split levels are sorted and deduplicated") {
    const Model m = make_model({numerical("a")}, {stump(NumericSplit{0, 0.5}), stump(NumericSplit{0, 0.2}),
                                                  stump(NumericSplit{0, 0.5})});
    CHECK(collect_split_levels(m, 0, false) == std::vector<double>{0.2, 0.5});

    Model mi = make_model({numerical("a")}, {stump(NumericSplit{0, 0.3})});
    Ensemble iso;
    iso.kind = EnsembleKind::Isolation;
    iso.trees.push_back(make_tree({inner(NumericSplit{0, 0.6}, 1, 2), iso_leaf(), iso_leaf()}));
    mi.isolation = iso;
    validate_model(mi);
    CHECK(collect_split_levels(mi, 0, true) == std::vector<double>{0.3, 0.6});
    CHECK(collect_split_levels(mi, 0, false) == std::vector<double>{0.3});
}

TEST_CASE("split levels match a direct node scan") {
    synth::Rng rng(17);
    const auto fs = synth::make_features({.numerical = 5});
    Model m;
    m.features = fs;
    m.classifier = synth::make_forest(fs, {.trees = 100, .depth = 5}, rng);
    validate_model(m);
    for (int i = 0; i < 5; ++i) {
        std::set<double> seen;
        for (const auto& t : m.classifier.trees)
            for (const auto& n : t.nodes)
                if (!n.is_leaf())
                    if (const auto* s = std::get_if<NumericSplit>(&n.split); s && s->feature == i) seen.insert(s->threshold);
        CHECK(collect_split_levels(m, i, false) == std::vector<double>(seen.begin(), seen.end()));
    }
}

TEST_CASE("batch kernels match the serial references") {
    synth::Rng rng(5);
    Model m;
    m.features = synth::make_features({.numerical = 4, .binary = 1, .categorical = 1});
    m.classifier = synth::make_forest(m.features, {.trees = 30, .depth = 5, .classes = 3}, rng);
    const auto samples = synth::cluster_samples(m.features, std::vector<Point>{synth::random_point(m.features, rng)},
                                                0.2, 300, rng);
    const Ensemble iso = synth::fit_isolation(m.features, samples, {.trees = 25, .depth = 7}, rng);
    std::vector<double> flat;
    for (int k = 0; k < 2000; ++k) {
        const Point x = synth::random_point(m.features, rng);
        flat.insert(flat.end(), x.begin(), x.end());
    }
    const std::size_t p = m.features.size();
    CHECK(predict_batch(m.classifier, flat, p, 4) == predict_batch_serial(m.classifier, flat, p));
    CHECK(isolation_depth_batch(iso, flat, p, 4) == isolation_depth_batch_serial(iso, flat, p));
    CHECK(predict_batch_serial(m.classifier, flat, p)[7] ==
          predict(m.classifier, std::span<const double>(flat).subspan(7 * p, p)).cls);
}

TEST_CASE("points outside the declared domain are rejected") {
    const Model m = make_model({numerical("a"), binary("b"), categorical("c", 3)}, {stump(NumericSplit{0, 0.5})});
    CHECK_NOTHROW(predict_checked(m, Point{0.4, 1.0, 2.0}));
    CHECK_THROWS_AS(predict_checked(m, Point{1.4, 1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(predict_checked(m, Point{0.4, 0.5, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(predict_checked(m, Point{0.4, 1.0, 3.0}), std::invalid_argument);
}
