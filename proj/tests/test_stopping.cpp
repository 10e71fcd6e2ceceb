#include "boal/error.hpp"
#include "boal/stopping.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

using namespace boal;

namespace {

struct Pick {
    int index = 0; // 1-based within the segment, 0 if nothing selected
    bool forced = false;
    int selections = 0;
};

// Feeds the scores to the rule and records where it selected.
Pick drive(OnlineMax& rule, const std::vector<double>& scores) {
    Pick p;
    const int t0 = rule.context().t0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const auto d = rule.step(t0 + static_cast<int>(k), scores[k]);
        CHECK((!d.forced || d.selected()));
        if (d.selected()) {
            ++p.selections;
            p.index = static_cast<int>(k) + 1;
            p.forced = d.forced;
            break;
        }
    }
    return p;
}

SegmentContext seg(int t0, int te) {
    return SegmentContext{t0, te};
}

} // namespace

TEST_CASE("secretary window length") {
    CHECK(secretary_window(5) == 1);
    CHECK(secretary_window(1) == 0);
    CHECK(secretary_window(2) == 0);
    CHECK(secretary_window(10) == 3);
    for (int n = 1; n <= 500; ++n)
        CHECK(secretary_window(n) == static_cast<int>(std::floor(n / std::exp(1.0))));
}

TEST_CASE("secretary rule") {
    SUBCASE("(3, 1, 4, 1, 5) selects the 4") {
        SecretaryStopper sa(seg(1, 5));
        CHECK(sa.window_length() == 1);
        const auto p = drive(sa, {3, 1, 4, 1, 5});
        CHECK(p.index == 3);
        CHECK_FALSE(p.forced);
    }
    SUBCASE("(5, 1, 1) is forced at the end") {
        SecretaryStopper sa(seg(1, 3));
        const auto p = drive(sa, {5, 1, 1});
        CHECK(p.index == 3);
        CHECK(p.forced);
    }
    SUBCASE("length-1 segment") {
        SecretaryStopper sa(seg(7, 7));
        CHECK(sa.window_length() == 0);
        CHECK(sa.running_max() == -std::numeric_limits<double>::infinity());
        const auto p = drive(sa, {0.5});
        CHECK(p.index == 1);
        CHECK(p.forced);
    }
    SUBCASE("length-2 segment: the first score is eligible") {
        SecretaryStopper sa(seg(1, 2));
        const auto p = drive(sa, {0.0, 9.0});
        CHECK(p.index == 1);
        CHECK_FALSE(p.forced);
    }
    SUBCASE("a score equal to the window maximum waits") {
        SecretaryStopper sa(seg(1, 5));
        const auto p = drive(sa, {4, 4, 4, 4, 9});
        CHECK(p.index == 5);
        CHECK_FALSE(p.forced);
    }
}

TEST_CASE("prophet-secretary schedule") {
    const auto s = psa_schedule(10.0, seg(1, 4));
    REQUIRE(s.taus.size() == 4);
    CHECK(s.taus[0] == doctest::Approx(10.0 * (1.0 - std::exp(-0.75))).epsilon(1e-12));
    CHECK(s.taus[0] == doctest::Approx(5.276).epsilon(1e-3));
    CHECK(s.taus[3] == 0.0);
    for (std::size_t k = 1; k < s.taus.size(); ++k)
        CHECK(s.taus[k] <= s.taus[k - 1]);
    for (double tau : s.taus)
        CHECK((tau >= 0.0 && tau <= 10.0));
    const auto zero = psa_schedule(0.0, seg(3, 9));
    for (double tau : zero.taus)
        CHECK(tau == 0.0);
    CHECK_THROWS_AS(psa_schedule(-1.0, seg(1, 4)), ValidationError);
    CHECK_THROWS_AS(psa_schedule(std::nan(""), seg(1, 4)), ValidationError);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int rep = 0; rep < 300; ++rep) {
        const int t0 = 1 + rep % 17;
        const int te = t0 + rep % 41;
        const auto r = psa_schedule(u(rng), seg(t0, te));
        CHECK(r.taus.back() == 0.0);
        for (std::size_t k = 1; k < r.taus.size(); ++k)
            CHECK(r.taus[k] <= r.taus[k - 1]);
    }
}

TEST_CASE("prophet-secretary rule") {
    SUBCASE("first score beats the opening threshold") {
        ProphetSecretaryStopper psa(psa_schedule(10.0, seg(1, 4)), seg(1, 4));
        const auto p = drive(psa, {6, 0, 0, 0});
        CHECK(p.index == 1);
        CHECK_FALSE(p.forced);
    }
    SUBCASE("all-zero scores are forced at the end") {
        ProphetSecretaryStopper psa(psa_schedule(10.0, seg(1, 4)), seg(1, 4));
        const auto p = drive(psa, {0, 0, 0, 0});
        CHECK(p.index == 4);
        CHECK(p.forced);
    }
    SUBCASE("a positive final score fires the zero threshold unforced") {
        ProphetSecretaryStopper psa(psa_schedule(10.0, seg(1, 4)), seg(1, 4));
        const auto p = drive(psa, {0, 0, 0, 0.5});
        CHECK(p.index == 4);
        CHECK_FALSE(p.forced);
    }
    SUBCASE("opt 0 selects any positive score immediately") {
        ProphetSecretaryStopper psa(psa_schedule(0.0, seg(1, 5)), seg(1, 5));
        const auto p = drive(psa, {0.1, 3, 3, 3, 3});
        CHECK(p.index == 1);
    }
    SUBCASE("a score equal to the threshold waits") {
        const auto sched = psa_schedule(10.0, seg(1, 4));
        ProphetSecretaryStopper psa(sched, seg(1, 4));
        const auto p = drive(psa, {sched.taus[0], sched.taus[1], 0, 0});
        CHECK(p.index == 4);
        CHECK(p.forced);
    }
}

TEST_CASE("threshold rule pick and ETS choice") {
    CHECK(threshold_rule_pick(std::vector<double>{1, 5, 2}, 2.0) == 5.0);
    CHECK(threshold_rule_pick(std::vector<double>{1, 5, 2}, 9.0) == 2.0);

    SUBCASE("worked example") {
        const std::vector<std::vector<double>> traces{{1, 5, 2}, {4, 1, 3}};
        const std::vector<double> grid{0, 2, 3.5};
        const auto c = ets_choose(traces, grid);
        REQUIRE(c.estimates.size() == 3);
        CHECK(c.estimates[0] == doctest::Approx(2.5));
        CHECK(c.estimates[1] == doctest::Approx(4.5));
        CHECK(c.estimates[2] == doctest::Approx(4.5));
        CHECK(c.chosen == 2.0);
        CHECK(c.chosen_index == 1);
    }
    SUBCASE("constant trace picks the smallest threshold") {
        const std::vector<std::vector<double>> traces{{7, 7, 7}};
        const std::vector<double> grid{3, 1, 5};
        const auto c = ets_choose(traces, grid);
        for (double e : c.estimates)
            CHECK(e == 7.0);
        CHECK(c.chosen == 1.0);
    }
    SUBCASE("threshold above every value falls back to final values") {
        const std::vector<std::vector<double>> traces{{1, 5, 2}, {4, 1, 3}};
        const std::vector<double> grid{100};
        CHECK(ets_choose(traces, grid).estimates[0] == doctest::Approx(2.5));
    }
    SUBCASE("invalid input") {
        const std::vector<std::vector<double>> none;
        const std::vector<double> grid{1};
        CHECK_THROWS_AS(ets_choose(none, grid), ValidationError);
        const std::vector<std::vector<double>> empty_trace{{}};
        CHECK_THROWS_AS(ets_choose(empty_trace, grid), ValidationError);
        const std::vector<std::vector<double>> traces{{1, 2}};
        CHECK_THROWS_AS(ets_choose(traces, std::vector<double>{}), ValidationError);
    }
}

TEST_CASE("ETS quantile grid") {
    const std::vector<std::vector<double>> traces{{0, 10}, {5}};
    const auto grid = ets_quantile_grid(traces, 4);
    REQUIRE(grid.size() == 4);
    // Pooled sorted values (0, 5, 10); level q sits at position q*(n-1).
    CHECK(grid[0] == doctest::Approx(0.0));
    CHECK(grid[1] == doctest::Approx(2.5));
    CHECK(grid[2] == doctest::Approx(5.0));
    CHECK(grid[3] == doctest::Approx(7.5));
    for (std::size_t k = 1; k < grid.size(); ++k)
        CHECK(grid[k] >= grid[k - 1]);
}

TEST_CASE("fixed threshold rule") {
    {
        ThresholdStopper r(2.0, seg(1, 4));
        CHECK(drive(r, {1, 5, 0, 0}).index == 2);
    }
    {
        ThresholdStopper r(1e9, seg(1, 4));
        const auto p = drive(r, {1, 5, 0, 0});
        CHECK(p.index == 4);
        CHECK(p.forced);
    }
    {
        ThresholdStopper r(-1.0, seg(1, 4));
        CHECK(drive(r, {0, 5, 0, 0}).index == 1);
    }
    {
        ThresholdStopper r(2.0, seg(1, 3));
        const auto p = drive(r, {2, 2, 2});
        CHECK(p.index == 3);
        CHECK(p.forced);
    }
}

TEST_CASE("scheduled rule") {
    {
        ScheduledStopper r(3, seg(1, 5));
        CHECK(r.step(1, 9).action == Action::wait);
        CHECK(r.step(2, 9).action == Action::wait);
        const auto d = r.step(3, 0);
        CHECK(d.selected());
        CHECK_FALSE(d.forced);
    }
    {
        ScheduledStopper r(1, seg(1, 1));
        CHECK(drive(r, {0}).index == 1);
    }
    {
        ScheduledStopper r(5, seg(1, 5));
        const auto p = drive(r, {9, 9, 9, 9, 9});
        CHECK(p.index == 5);
        CHECK_FALSE(p.forced);
    }
    CHECK_THROWS_AS(ScheduledStopper(6, seg(1, 5)), ValidationError);
}

TEST_CASE("uniform query times") {
    CHECK(uniform_query_times(200, 1) == std::vector<int>{100});
    CHECK(uniform_query_times(201, 1) == std::vector<int>{101});
    CHECK(uniform_query_times(10, 4) == std::vector<int>{2, 4, 6, 8});
    for (int T = 1; T <= 60; ++T)
        for (int B = 1; B <= T; ++B) {
            const auto q = uniform_query_times(T, B);
            for (int i = 1; i <= B; ++i)
                CHECK(q[static_cast<std::size_t>(i - 1)] ==
                      static_cast<int>(std::ceil(static_cast<double>(i) * T / (B + 1) - 1e-12)));
        }
}

TEST_CASE("max oracle") {
    CHECK(max_oracle(std::vector<double>{3, 1, 4, 1, 5}) == 4);
    CHECK(max_oracle(std::vector<double>{2, 2}) == 0);
    CHECK(max_oracle(std::vector<double>{8}) == 0);
    CHECK_THROWS_AS(max_oracle(std::vector<double>{}), ValidationError);
}

TEST_CASE("step protocol errors and decline") {
    SecretaryStopper sa(seg(1, 5));
    CHECK_THROWS_AS(sa.step(2, 1.0), ValidationError);
    sa.step(1, 1.0);
    CHECK_THROWS_AS(sa.step(1, 1.0), ValidationError);
    CHECK_THROWS_AS(sa.step(2, std::nan("")), ValidationError);
    CHECK(sa.step(2, 2.0).selected());
    CHECK_THROWS_AS(sa.step(3, 1.0), ValidationError);
    sa.decline();
    CHECK_FALSE(sa.stopped());
    CHECK_THROWS_AS(sa.decline(), ValidationError);
    CHECK(sa.step(3, 3.0).selected());
    sa.decline();
    CHECK(sa.step(4, 0.0).action == Action::wait);
    const auto last = sa.step(5, 0.0);
    CHECK(last.selected());
    CHECK(last.forced);
    CHECK_THROWS_AS(sa.decline(), ValidationError);
    CHECK_THROWS_AS(SegmentContext({3, 2}).validate(), ValidationError);
    CHECK_THROWS_AS(SegmentContext({0, 2}).validate(), ValidationError);
}

TEST_CASE("exactly one selection per segment, never inside the SA window") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len_dist(1, 40);
    for (int rep = 0; rep < 2000; ++rep) {
        const int t0 = 1 + rep % 13;
        const int len = len_dist(rng);
        const SegmentContext ctx = seg(t0, t0 + len - 1);
        std::vector<double> scores(static_cast<std::size_t>(len));
        for (double& s : scores)
            s = (rep % 5 == 0) ? std::floor(u(rng) * 3) : u(rng);

        std::vector<std::unique_ptr<OnlineMax>> rules;
        rules.push_back(std::make_unique<SecretaryStopper>(ctx));
        rules.push_back(std::make_unique<ProphetSecretaryStopper>(psa_schedule(u(rng), ctx), ctx));
        rules.push_back(std::make_unique<ThresholdStopper>(u(rng), ctx));
        rules.push_back(std::make_unique<ScheduledStopper>(t0 + static_cast<int>(u(rng) * len), ctx));
        for (auto& rule : rules) {
            int selections = 0;
            int at = 0;
            for (int k = 0; k < len; ++k) {
                if (rule->stopped())
                    break;
                if (rule->step(t0 + k, scores[static_cast<std::size_t>(k)]).selected()) {
                    ++selections;
                    at = k;
                }
            }
            CHECK(selections == 1);
            CHECK(at < len);
            if (rule->name() == "SA")
                CHECK(at >= secretary_window(len));
        }
    }
}

// Enumerates s*_tau directly from the definition and picks the smallest
// maximizing tau.
TEST_CASE("ETS agrees with brute-force enumeration") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> m_dist(1, 8);
    std::uniform_int_distribution<int> k_dist(1, 4);
    std::uniform_int_distribution<int> len_dist(1, 6);
    std::uniform_int_distribution<int> val(0, 10);
    for (int rep = 0; rep < 500; ++rep) {
        const int K = k_dist(rng);
        const int L = len_dist(rng);
        std::vector<std::vector<double>> traces(static_cast<std::size_t>(K));
        for (auto& tr : traces)
            for (int i = 0; i < L; ++i)
                tr.push_back(val(rng) * 0.5);
        std::vector<double> grid(static_cast<std::size_t>(m_dist(rng)));
        for (double& g : grid)
            g = val(rng) * 0.5 - 0.5;

        std::vector<double> expected(grid.size());
        for (std::size_t m = 0; m < grid.size(); ++m) {
            double total = 0.0;
            for (const auto& tr : traces) {
                double pick = tr.back();
                for (double v : tr)
                    if (v > grid[m]) {
                        pick = v;
                        break;
                    }
                total += pick;
            }
            expected[m] = total / K;
        }
        const double best = *std::max_element(expected.begin(), expected.end());
        double best_tau = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < grid.size(); ++m)
            if (expected[m] == best)
                best_tau = std::min(best_tau, grid[m]);

        const auto c = ets_choose(traces, grid);
        CHECK(c.estimates == expected);
        CHECK(c.chosen == best_tau);
        CHECK(grid[c.chosen_index] == c.chosen);
        CHECK(c.estimates[c.chosen_index] == best);
    }
}

TEST_CASE("secretary finds the maximum about 1/e of the time") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int trials = 10000;
    int hits = 0;
    for (int n = 0; n < trials; ++n) {
        std::vector<double> scores(20);
        for (double& s : scores)
            s = u(rng);
        SecretaryStopper sa(seg(1, 20));
        const auto p = drive(sa, scores);
        if (static_cast<std::size_t>(p.index - 1) == max_oracle(scores))
            ++hits;
    }
    const double rate = static_cast<double>(hits) / trials;
    CHECK(rate >= 0.33);
    CHECK(rate <= 0.43);
}

TEST_CASE("prophet-secretary keeps at least (1 - 1/e) of E[max]") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int trials = 10000;
    std::vector<std::vector<double>> streams(trials, std::vector<double>(20));
    double max_total = 0.0;
    for (auto& s : streams) {
        for (double& v : s)
            v = u(rng);
        max_total += *std::max_element(s.begin(), s.end());
    }
    const double opt = max_total / trials;
    CHECK(opt == doctest::Approx(20.0 / 21.0).epsilon(0.01));
    double picked = 0.0;
    for (const auto& s : streams) {
        ProphetSecretaryStopper psa(psa_schedule(opt, seg(1, 20)), seg(1, 20));
        picked += s[static_cast<std::size_t>(drive(psa, s).index - 1)];
    }
    CHECK(picked / trials >= (1.0 - 1.0 / std::exp(1.0)) * opt - 0.02);
}
