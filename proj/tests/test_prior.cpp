#include "boal/error.hpp"
#include "boal/prior.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace boal;
using boal::test::FunctionExpert;

namespace {

// Two experts, 0 and 2*sqrt(x): under uniform weights the score equals x.
std::shared_ptr<const Committee> score_equals_feature() {
    std::vector<ExpertPtr> experts{
        std::make_shared<FunctionExpert>("zero", [](const Episode&, int) { return 0.0; }),
        std::make_shared<FunctionExpert>("root",
                                         [](const Episode& e, int t) { return 2.0 * std::sqrt(e.features(t)[0]); })};
    return std::make_shared<const Committee>(std::move(experts));
}

Episode ep1(const std::string& id, std::vector<double> xs, std::optional<std::vector<double>> labels = {}) {
    return Episode(id, 1, std::move(xs), std::move(labels));
}

} // namespace

TEST_CASE("prior validation") {
    CHECK_THROWS_AS(EpisodicPrior(std::vector<Episode>{}), ValidationError);
    CHECK_THROWS_AS(EpisodicPrior(std::vector<Episode>{ep1("a", {1, 2}), ep1("b", {1, 2, 3})}), ValidationError);
    CHECK_THROWS_AS(EpisodicPrior(std::vector<Episode>{ep1("a", {1, 2}), ep1("a", {3, 4})}), ValidationError);
    CHECK_THROWS_AS(EpisodicPrior(std::vector<Episode>{ep1("a", {1, 2}), Episode("b", 2, {1, 2, 3, 4})}),
                    ValidationError);
    Episode live = Episode::live("l", 2, 1);
    CHECK_THROWS_AS(EpisodicPrior(std::vector<Episode>{live}), ValidationError);
    const EpisodicPrior p(std::vector<Episode>{ep1("a", {1, 2}), ep1("b", {3, 4}), ep1("c", {5, 6})});
    CHECK(p.size() == 3);
    CHECK(p.truncated(2).size() == 2);
    CHECK(p.truncated(9).size() == 3);
    CHECK(p.truncated(2).episode(1).id() == "b");
}

TEST_CASE("slices are calendar aligned") {
    std::vector<double> a(10), b(10);
    for (int i = 0; i < 10; ++i) {
        a[static_cast<std::size_t>(i)] = i + 1;
        b[static_cast<std::size_t>(i)] = 100 + i + 1;
    }
    const EpisodicPrior p(std::vector<Episode>{ep1("a", a), ep1("b", b)});
    const auto s = slice(p, 3, 5);
    REQUIRE(s.size() == 2);
    CHECK(s[0].length() == 3);
    CHECK(s[0].features(3)[0] == 3.0);
    CHECK(s[0].features(5)[0] == 5.0);
    CHECK(s[1].features(4)[0] == 104.0);
    CHECK_THROWS_AS(s[0].features(6), ValidationError);

    const auto full = slice(p, 1, 10);
    CHECK(full[1].length() == 10);
    const auto single = slice(p, 5, 5);
    CHECK(single[0].features(5)[0] == 5.0);
    CHECK(single[1].features(5)[0] == 105.0);

    CHECK_THROWS_AS(slice(p, 0, 3), ValidationError);
    CHECK_THROWS_AS(slice(p, 4, 11), ValidationError);
    CHECK_THROWS_AS(slice(p, 5, 4), ValidationError);
}

TEST_CASE("OPT estimate") {
    const EnsembleState s(score_equals_feature());
    SUBCASE("single episode") {
        const EpisodicPrior p(std::vector<Episode>{ep1("a", {1, 5, 2})});
        CHECK(estimate_opt(p, 1, 3, s) == doctest::Approx(5.0));
    }
    SUBCASE("two episodes") {
        const EpisodicPrior p(std::vector<Episode>{ep1("a", {1, 5, 2}), ep1("b", {4, 1, 3})});
        CHECK(estimate_opt(p, 1, 3, s) == doctest::Approx(4.5));
        CHECK(estimate_opt(p, 2, 3, s) == doctest::Approx(4.0));
        const auto traces = historical_traces(p, 1, 3, s);
        CHECK(estimate_opt(p, 1, 3, s) == mean_of_maxima(traces));
    }
    SUBCASE("concentrated weights") {
        const EnsembleState c(score_equals_feature(), {0.0, -std::numeric_limits<double>::infinity()}, 1.0);
        const EpisodicPrior p(std::vector<Episode>{ep1("a", {1, 5, 2}), ep1("b", {4, 1, 3})});
        CHECK(estimate_opt(p, 1, 3, c) == 0.0);
    }
}

TEST_CASE("historical traces") {
    const EpisodicPrior p(std::vector<Episode>{ep1("a", {1, 5, 2, 8}), ep1("b", {4, 1, 3, 0})});
    const EnsembleState s(score_equals_feature());
    const auto traces = historical_traces(p, 2, 4, s);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0] == s.score_trace(p.episode(0), 2, 4));
    CHECK(traces[1] == s.score_trace(p.episode(1), 2, 4));

    SUBCASE("agreeing experts give zero traces") {
        const EnsembleState same(boal::test::constant_committee({3, 3}, 4));
        for (const auto& tr : historical_traces(p, 1, 4, same))
            for (double v : tr)
                CHECK(v == 0.0);
    }
    SUBCASE("down-weighting the outlier shrinks every trace value") {
        std::vector<ExpertPtr> experts{
            std::make_shared<FunctionExpert>("a", [](const Episode&, int) { return 0.0; }),
            std::make_shared<FunctionExpert>("b", [](const Episode&, int) { return 0.0; }),
            std::make_shared<FunctionExpert>("out", [](const Episode& e, int t) { return e.features(t)[0]; })};
        const EnsembleState uniform(std::make_shared<const Committee>(experts));
        const EnsembleState updated = uniform.update(std::vector<double>{0.0, 0.0, 1.0});
        const auto before = historical_traces(p, 1, 4, uniform);
        const auto after = historical_traces(p, 1, 4, updated);
        for (std::size_t k = 0; k < before.size(); ++k)
            for (std::size_t i = 0; i < before[k].size(); ++i) {
                if (before[k][i] > 0.0)
                    CHECK(after[k][i] < before[k][i]);
                else
                    CHECK(after[k][i] == 0.0);
            }
    }
}

TEST_CASE("prior statistics never read labels") {
    const EnsembleState s(score_equals_feature());
    const EpisodicPrior labelled(std::vector<Episode>{ep1("a", {1, 5, 2}, std::vector<double>{9, 9, 9}),
                                                      ep1("b", {4, 1, 3}, std::vector<double>{-1, 0, 1})});
    const EpisodicPrior relabelled(std::vector<Episode>{ep1("a", {1, 5, 2}, std::vector<double>{0, 0, 0}),
                                                        ep1("b", {4, 1, 3})});
    CHECK(historical_traces(labelled, 1, 3, s) == historical_traces(relabelled, 1, 3, s));
    CHECK(estimate_opt(labelled, 1, 3, s) == estimate_opt(relabelled, 1, 3, s));
}
