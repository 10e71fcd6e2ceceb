#include "boal/bench.hpp"
#include "boal/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace boal;
using boal::test::TempDir;
using boal::test::write_text;

namespace {

bool same_features(const Episode& a, const Episode& b) {
    if (a.horizon() != b.horizon() || a.dimension() != b.dimension())
        return false;
    for (int t = 1; t <= a.horizon(); ++t) {
        const auto x = a.features(t), y = b.features(t);
        if (!std::equal(x.begin(), x.end(), y.begin()))
            return false;
    }
    return true;
}

ParseError::Kind parse_kind(const std::filesystem::path& p) {
    try {
        (void)load_episode_file(p);
    } catch (const ParseError& e) {
        return e.kind();
    }
    FAIL("no ParseError");
    return ParseError::Kind::io;
}

} // namespace

TEST_CASE("streams are deterministic and seed dependent") {
    StreamSpec spec;
    spec.horizon = 50;
    const auto a = gen_streams(spec, 3);
    const auto b = gen_streams(spec, 3);
    REQUIRE(a.size() == 3);
    CHECK(a.episode(0).id() == "ep001");
    CHECK(a.episode(2).id() == "ep003");
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(same_features(a.episode(k), b.episode(k)));
    spec.seed = 2;
    const auto c = gen_streams(spec, 3);
    CHECK_FALSE(same_features(a.episode(0), c.episode(0)));
    CHECK_FALSE(same_features(a.episode(0), a.episode(1)));
    CHECK_FALSE(a.episode(0).has_labels());
}

TEST_CASE("noise-free streams follow the shared seasonal curve") {
    StreamSpec spec;
    spec.horizon = 20;
    spec.noise = 0.0;
    spec.amplitude = 2.0;
    const auto p = gen_streams(spec, 2);
    for (int t = 1; t <= 20; ++t) {
        const double expected = 2.0 * std::sin(std::numbers::pi * t / 20.0);
        CHECK(seasonal_mean(spec, t) == doctest::Approx(expected).epsilon(1e-14));
        for (std::size_t k = 0; k < 2; ++k)
            for (double x : p.episode(k).features(t))
                CHECK(x == seasonal_mean(spec, t));
    }
    CHECK(seasonal_mean(spec, 10) == doctest::Approx(2.0));
}

TEST_CASE("iid uniform streams stay in the unit interval") {
    StreamSpec spec;
    spec.process = StreamProcess::iid_uniform;
    spec.horizon = 100;
    const auto p = gen_streams(spec, 5);
    double lo = 1.0, hi = 0.0;
    for (const auto& e : p.episodes())
        for (int t = 1; t <= e->horizon(); ++t)
            for (double x : e->features(t)) {
                CHECK((x >= 0.0 && x < 1.0));
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
    CHECK(lo < 0.05);
    CHECK(hi > 0.95);
    CHECK(parse_process("iid_uniform") == StreamProcess::iid_uniform);
    CHECK(parse_process(process_name(StreamProcess::ar1_seasonal)) == StreamProcess::ar1_seasonal);
    CHECK_THROWS_AS(parse_process("brownian"), ConfigError);
}

TEST_CASE("stream and family validation") {
    StreamSpec spec;
    spec.phi = 1.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = {};
    spec.noise = -1;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = {};
    spec.horizon = 0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    CHECK_THROWS_AS(gen_streams(StreamSpec{}, 0), ValidationError);

    SyntheticFamily f;
    f.kappa = 1.0;
    CHECK_THROWS_AS(f.validate(), ValidationError);
    f = {};
    f.n_models = 1;
    CHECK_THROWS_AS(f.validate(), ValidationError);
    f = {};
    f.target_index = 15;
    CHECK_THROWS_AS(f.validate(), ValidationError);
    f = {};
    f.theta.clear();
    CHECK_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("linear response model") {
    const Episode ep("e", 1, {2.0, 3.0});
    SUBCASE("no memory") {
        const LinearResponseModel m("m", {1.0}, 0.0);
        CHECK(m.predict(ep, 1) == 2.0);
        CHECK(m.predict(ep, 2) == 3.0);
        CHECK(label_with(ep, m).labels()[1] == 3.0);
    }
    SUBCASE("decayed memory") {
        const LinearResponseModel m("m", {1.0}, 0.5);
        CHECK(m.predict(ep, 1) == 2.0);
        CHECK(m.predict(ep, 2) == 4.0);
    }
    SUBCASE("against a direct sum") {
        StreamSpec spec;
        spec.horizon = 30;
        const auto p = gen_streams(spec, 1);
        const Episode& e = p.episode(0);
        const std::vector<double> theta{0.3, -1.2, 0.7, 2.0};
        const LinearResponseModel m("m", theta, 0.8);
        const auto prefix = m.predict_prefix(e, 30);
        for (int t = 1; t <= 30; ++t) {
            double direct = 0.0;
            for (int s = 1; s <= t; ++s) {
                double dot = 0.0;
                for (std::size_t j = 0; j < 4; ++j)
                    dot += theta[j] * e.features(s)[j];
                direct += std::pow(0.8, t - s) * dot;
            }
            CHECK(m.predict(e, t) == doctest::Approx(direct).epsilon(1e-12));
            CHECK(prefix[static_cast<std::size_t>(t - 1)] == doctest::Approx(direct).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(LinearResponseModel("m", {}, 0.5), ValidationError);
    CHECK_THROWS_AS(LinearResponseModel("m", {1.0}, 1.0), ValidationError);
    const LinearResponseModel wide("w", {1.0, 2.0}, 0.1);
    CHECK_THROWS_AS(wide.predict(ep, 1), EvaluationError);
}

TEST_CASE("model family") {
    const SyntheticFamily f;
    const auto a = gen_family(f);
    const auto b = gen_family(f);
    REQUIRE(a.experts.size() == 14);
    REQUIRE(a.target);
    CHECK(a.target->theta() == b.target->theta());
    for (std::size_t i = 0; i < a.experts.size(); ++i) {
        CHECK(a.experts[i]->theta() == b.experts[i]->theta());
        CHECK(a.experts[i]->theta() != a.target->theta());
        CHECK(a.experts[i]->kappa() == f.kappa);
        for (std::size_t j = 0; j < f.theta.size(); ++j)
            CHECK(std::abs(a.experts[i]->theta()[j] - f.theta[j]) <= f.perturbation * std::abs(f.theta[j]) + 1e-15);
    }
    CHECK(a.expert_ptrs().size() == 14);

    SUBCASE("committee disagrees on typical streams") {
        StreamSpec spec;
        const auto streams = gen_streams(spec, 1);
        const EnsembleState s(std::make_shared<const Committee>(a.expert_ptrs()));
        auto trace = s.score_trace(streams.episode(0), 1, spec.horizon);
        std::nth_element(trace.begin(), trace.begin() + trace.size() / 2, trace.end());
        CHECK(trace[trace.size() / 2] > 0.0);
    }
    SUBCASE("vanishing perturbation gives vanishing scores") {
        SyntheticFamily tight;
        tight.perturbation = 1e-12;
        const auto fam = gen_family(tight);
        const auto streams = gen_streams(StreamSpec{}, 1);
        const EnsembleState s(std::make_shared<const Committee>(fam.expert_ptrs()));
        for (double v : s.score_trace(streams.episode(0), 1, 200))
            CHECK(v < 1e-20);
    }
}

TEST_CASE("episode CSV round trip") {
    TempDir dir;
    StreamSpec spec;
    spec.horizon = 25;
    const auto streams = gen_streams(spec, 3);
    const auto fam = gen_family(SyntheticFamily{});
    std::vector<EpisodePtr> labelled;
    for (const auto& e : streams.episodes())
        labelled.push_back(std::make_shared<const Episode>(label_with(*e, *fam.target)));

    write_episodes(dir / "eval.csv", labelled);
    write_episodes(dir / "prior.csv", streams.episodes());
    const auto back = load_episode_file(dir / "eval.csv");
    REQUIRE(back.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(back[k].id() == labelled[k]->id());
        CHECK(same_features(back[k], *labelled[k]));
        REQUIRE(back[k].has_labels());
        const auto l1 = back[k].labels(), l2 = labelled[k]->labels();
        CHECK(std::equal(l1.begin(), l1.end(), l2.begin()));
    }
    const auto prior = load_episodes(dir / "prior.csv");
    CHECK(prior.size() == 3);
    CHECK_FALSE(prior.episode(0).has_labels());

    write_expert_trace(dir / "model_02.csv", *fam.experts[0], labelled);
    const auto traced = load_expert_traces(dir / "model_02.csv");
    CHECK(traced->id() == "model_02");
    for (const auto& e : labelled)
        for (int t = 1; t <= 25; ++t)
            CHECK(traced->predict(*e, t) == fam.experts[0]->predict(*e, t));
}

TEST_CASE("number formatting round trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e308, 0.0, 123456789.125})
        CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(3.0) == "3");
}

TEST_CASE("trace lookup") {
    TempDir dir;
    write_text(dir / "alpha.csv", "episode_id,t,prediction\na,1,7.5\na,2,1\nb,1,-2\n");
    const auto ex = load_expert_traces(dir / "alpha.csv");
    const Episode a("a", 1, {0.0, 0.0});
    const Episode b("b", 1, {0.0, 0.0});
    const Episode c("c", 1, {0.0});
    CHECK(ex->predict(a, 1) == 7.5);
    CHECK(ex->predict(b, 1) == -2.0);
    try {
        (void)ex->predict(c, 1);
        FAIL("expected an error");
    } catch (const EvaluationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("alpha") != std::string::npos);
        CHECK(msg.find("'c'") != std::string::npos);
        CHECK(msg.find("t=1") != std::string::npos);
    }
    try {
        (void)ex->predict(b, 2);
        FAIL("expected an error");
    } catch (const EvaluationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("alpha") != std::string::npos);
        CHECK(msg.find("'b'") != std::string::npos);
        CHECK(msg.find("t=2") != std::string::npos);
    }
    write_text(dir / "bad.csv", "episode_id,t,value\na,1,1\n");
    CHECK_THROWS_AS(load_expert_traces(dir / "bad.csv"), ParseError);
}

TEST_CASE("malformed episode files") {
    TempDir dir;
    auto kind = [&](const std::string& name, const std::string& text) {
        write_text(dir / name, text);
        return parse_kind(dir / name);
    };
    using K = ParseError::Kind;
    CHECK(parse_kind(dir / "missing.csv") == K::io);
    CHECK(kind("empty.csv", "") == K::header);
    CHECK(kind("header.csv", "id,t,f_1\na,1,0\n") == K::header);
    CHECK(kind("featname.csv", "episode_id,t,x\na,1,0\n") == K::header);
    CHECK(kind("cols.csv", "episode_id,t,f_1,f_2\na,1,0\n") == K::columns);
    CHECK(kind("num.csv", "episode_id,t,f_1\na,1,abc\n") == K::number);
    CHECK(kind("nan.csv", "episode_id,t,f_1\na,1,nan\n") == K::number);
    CHECK(kind("step.csv", "episode_id,t,f_1\na,1.5,0\n") == K::number);
    CHECK(kind("gap.csv", "episode_id,t,f_1\na,1,0\na,3,0\n") == K::contiguity);
    CHECK(kind("start.csv", "episode_id,t,f_1\na,2,0\n") == K::contiguity);
    CHECK(kind("dup.csv", "episode_id,t,f_1\na,1,0\nb,1,0\na,1,0\n") == K::duplicate_id);
    CHECK(kind("label.csv", "episode_id,t,f_1,label\na,1,0,1\na,2,0,\n") == K::label);

    write_text(dir / "rowno.csv", "episode_id,t,f_1\na,1,0\na,2,oops\n");
    try {
        (void)load_episode_file(dir / "rowno.csv");
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }

    write_text(dir / "ok.csv", "episode_id,t,f_1,f_2\nx,1,1,2\nx,2,3,4\ny,1,5,6\ny,2,7,8\n");
    const auto eps = load_episode_file(dir / "ok.csv");
    REQUIRE(eps.size() == 2);
    CHECK(eps[1].features(2)[1] == 8.0);
    // Different lengths load fine; the prior rejects them.
    write_text(dir / "ragged.csv", "episode_id,t,f_1\nx,1,1\nx,2,3\ny,1,5\n");
    CHECK(load_episode_file(dir / "ragged.csv").size() == 2);
    CHECK_THROWS_AS(load_episodes(dir / "ragged.csv"), ValidationError);
}
