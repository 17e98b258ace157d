#include <doctest.h>

#include <cmath>
#include <sstream>

#include "riskmcts/errors.hpp"
#include "riskmcts/mdp.hpp"

using namespace riskmcts;

TEST_CASE("mdp4 structure") {
    const TabularMdp mdp = make_mdp4();
    CHECK(mdp.num_states() == 4);
    CHECK(mdp.num_actions() == 2);
    CHECK(mdp.gamma() == 0.9);
    CHECK(mdp.horizon() == 100);
    CHECK(mdp.initial_state() == 0);
    CHECK(mdp.cost_bound() == 20.0);
    CHECK(mdp.validate().empty());

    // risky action a0 from s0
    CHECK(mdp.transition(0, 0, 2) == doctest::Approx(0.9));
    CHECK(mdp.transition(0, 0, 3) == doctest::Approx(0.1));
    // safe action a1 from s0
    CHECK(mdp.transition(1, 0, 1) == 1.0);
    // absorbing states return to s0 with the reset probability
    for (int a = 0; a < 2; ++a) {
        CHECK(mdp.transition(a, 1, 0) == doctest::Approx(0.1));
        CHECK(mdp.transition(a, 1, 1) == doctest::Approx(0.9));
    }
    // state-dependent costs
    const double costs[4] = {0.0, 5.0, 1.0, 20.0};
    for (int s = 0; s < 4; ++s) {
        CHECK(mdp.stage_cost(s, 0) == costs[s]);
        CHECK(mdp.stage_cost(s, 1) == costs[s]);
        CHECK(mdp.terminal_cost(s) == costs[s]);
    }
    CHECK(mdp.stage_cost(3, 0) == 20.0);
}

TEST_CASE("validate reports broken rows and cost bounds") {
    TabularMdp mdp(2, 1, 0.9, 3, 0, 20.0);
    mdp.set_transition(0, 0, 1, 0.9);  // row sums to 0.9
    mdp.set_transition(0, 1, 1, 1.0);
    mdp.set_stage_cost(0, 0, 21.0);  // exceeds the bound

    const auto errors = mdp.validate();
    REQUIRE(errors.size() == 2);
    CHECK(errors[0].find("(a=0, s=0)") != std::string::npos);
    CHECK(errors[1].find("c(s=0, a=0)") != std::string::npos);
    CHECK_THROWS_AS(mdp.check_valid(), std::invalid_argument);
}

TEST_CASE("sample_transition") {
    TabularMdp chain(2, 1, 1.0, 1, 0, 5.0);
    chain.set_transition(0, 0, 1, 1.0);
    chain.set_transition(0, 1, 1, 1.0);
    chain.set_stage_cost(0, 0, 2.5);

    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const Transition tr = sample_transition(chain, 0, 0, rng);
        CHECK(tr.next_state == 1);
        CHECK(tr.cost == 2.5);  // exactly the table entry
    }
    CHECK_THROWS_AS(sample_transition(chain, 2, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_transition(chain, 0, 1, rng), std::invalid_argument);
}

TEST_CASE("mdp4 risky branch frequency matches epsilon") {
    const TabularMdp mdp = make_mdp4(0.1, 0.1);
    Rng rng(2024);
    int hits = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        if (sample_transition(mdp, 0, 0, rng).next_state == 3) ++hits;
    }
    CHECK(std::abs(static_cast<double>(hits) / draws - 0.1) < 0.01);
}

TEST_CASE("empirical transition frequencies converge to the rows") {
    const TabularMdp mdp = random_mdp(4, 2, 5, 0.95, 10.0, 77);
    Rng rng(88);
    const int draws = 100000;
    for (int a = 0; a < 2; ++a) {
        std::vector<int> counts(4, 0);
        for (int i = 0; i < draws; ++i) {
            ++counts[sample_transition(mdp, 1, a, rng).next_state];
        }
        for (int next = 0; next < 4; ++next) {
            const double p = mdp.transition(a, 1, next);
            const double freq = static_cast<double>(counts[next]) / draws;
            CHECK(std::abs(freq - p) < 4.0 * std::sqrt(p * (1 - p) / draws) + 1e-3);
        }
    }
}

TEST_CASE("random_mdp is deterministic and valid") {
    const TabularMdp a = random_mdp(3, 2, 4, 0.9, 10.0, 42);
    const TabularMdp b = random_mdp(3, 2, 4, 0.9, 10.0, 42);
    CHECK(a == b);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CHECK(random_mdp(3, 2, 4, 0.9, 10.0, seed).validate().empty());
    }
    const TabularMdp single = random_mdp(1, 2, 3, 1.0, 2.0, 0);
    CHECK(single.transition(0, 0, 0) == doctest::Approx(1.0));
    CHECK(single.transition(1, 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("serialization round trip is lossless") {
    const TabularMdp mdp = random_mdp(3, 2, 7, 0.87, 5.0, 9);
    std::stringstream buffer;
    save_mdp(mdp, buffer);
    const TabularMdp loaded = parse_mdp(buffer);
    CHECK(loaded == mdp);
    CHECK(loaded.validate().empty());

    std::stringstream buffer4;
    save_mdp(make_mdp4(), buffer4);
    CHECK(parse_mdp(buffer4) == make_mdp4());
}

TEST_CASE("parser rejects malformed files") {
    {
        std::stringstream in("riskmdp v1\nstates 2\nactions 1\ngamma 1\nhorizon 1\n"
                             "initial_state 0\ncost_bound 1\n"
                             "transition 0 0 1 -0.5\nend\n");
        CHECK_THROWS_AS(parse_mdp(in), ParseError);
    }
    {
        // truncated: no 'end'
        std::stringstream in("riskmdp v1\nstates 2\nactions 1\ngamma 1\nhorizon 1\n"
                             "initial_state 0\ncost_bound 1\n");
        CHECK_THROWS_AS(parse_mdp(in), ParseError);
    }
    {
        std::stringstream in("not-an-mdp\n");
        CHECK_THROWS_AS(parse_mdp(in), ParseError);
    }
    {
        std::stringstream in("riskmdp v1\ntransition 0 0 0 1\n");
        CHECK_THROWS_AS(parse_mdp(in), ParseError);  // record before header
    }
    {
        std::stringstream in("riskmdp v1\nstates 2\nactions 1\ngamma 1\nhorizon 1\n"
                             "initial_state 0\ncost_bound 1\n"
                             "transition 0 0 1 1\ntransition 0 0 1 0.5\nend\n");
        CHECK_THROWS_AS(parse_mdp(in), ParseError);  // duplicate entry
    }
    {
        // parse error line numbers are reported
        std::stringstream in("riskmdp v1\nstates x\n");
        try {
            parse_mdp(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
        }
    }
}

TEST_CASE("sampled trajectory costs respect the discounted bound") {
    const TabularMdp mdp = random_mdp(4, 3, 30, 0.9, 8.0, 3);
    const double bound = mdp.max_abs_discounted_cost();
    Rng rng(14);
    for (int episode = 0; episode < 50; ++episode) {
        int state = mdp.initial_state();
        double total = 0.0;
        double gp = 1.0;
        for (int h = 0; h < mdp.horizon(); ++h) {
            const int action = static_cast<int>(uniform01(rng) * mdp.num_actions());
            const Transition tr = sample_transition(mdp, state, action, rng);
            total += gp * tr.cost;
            gp *= mdp.gamma();
            state = tr.next_state;
        }
        total += gp * mdp.terminal_cost(state);
        CHECK(std::abs(total) <= bound + 1e-9);
    }
}
