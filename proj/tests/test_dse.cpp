#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "powergear/dse.hpp"
#include "testutil.hpp"

using namespace powergear;

TEST_SUITE_BEGIN("dse");

namespace {

std::vector<DesignPoint> make_points(const std::vector<std::pair<double, double>>& objs) {
    std::vector<DesignPoint> pts;
    for (std::size_t i = 0; i < objs.size(); ++i)
        pts.push_back(DesignPoint{static_cast<int>(i), objs[i].first, objs[i].second, 0, false});
    return pts;
}

// O(n^2) dominance-check oracle with the same duplicate rule.
std::vector<int> pareto_oracle(const std::vector<DesignPoint>& pts) {
    std::vector<int> ids;
    for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) {
            if (q.id == p.id) continue;
            bool d = q.latency <= p.latency && q.true_power <= p.true_power &&
                     (q.latency < p.latency || q.true_power < p.true_power);
            bool dup_earlier =
                q.latency == p.latency && q.true_power == p.true_power && q.id < p.id;
            if (d || dup_earlier) {
                dominated = true;
                break;
            }
        }
        if (!dominated) ids.push_back(p.id);
    }
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const auto& pa = pts[static_cast<std::size_t>(a)];
        const auto& pb = pts[static_cast<std::size_t>(b)];
        return std::tie(pa.latency, pa.true_power, a) < std::tie(pb.latency, pb.true_power, b);
    });
    return ids;
}

std::vector<DesignPoint> random_space(Rng& rng, int n) {
    std::vector<DesignPoint> pts;
    for (int i = 0; i < n; ++i) {
        DesignPoint p;
        p.id = i;
        p.latency = 1 + static_cast<double>(rand_index(rng, 50));
        p.true_power = 0.1 + rand_unit(rng) * 5;
        pts.push_back(p);
    }
    return pts;
}

} // namespace

TEST_CASE("single point is its own frontier") {
    auto pts = make_points({{3, 4}});
    auto front = pareto_front(pts, PowerField::TruePower);
    REQUIRE(front.size() == 1);
    CHECK(front[0].id == 0);
}

TEST_CASE("hand frontier {(1,2),(2,1),(2,2)}") {
    auto pts = make_points({{1, 2}, {2, 1}, {2, 2}});
    auto front = pareto_front(pts, PowerField::TruePower);
    REQUIRE(front.size() == 2);
    CHECK(front[0].latency == 1);
    CHECK(front[1].latency == 2);
    CHECK(front[1].true_power == 1);
}

TEST_CASE("duplicate frontier points are kept once, lowest id") {
    auto pts = make_points({{1, 1}, {1, 1}, {2, 3}});
    auto front = pareto_front(pts, PowerField::TruePower);
    REQUIRE(front.size() == 1);
    CHECK(front[0].id == 0);
}

TEST_CASE("pareto_front matches the O(n^2) oracle on random spaces") {
    Rng rng(55);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rand_index(rng, 500));
        auto pts = random_space(rng, n);
        auto front = pareto_front(pts, PowerField::TruePower);
        std::vector<int> got;
        for (const auto& p : front) got.push_back(p.id);
        CHECK(got == pareto_oracle(pts));
    }
}

TEST_CASE("adrs: identity gives zero, hand example, oracle equality") {
    std::vector<Objective> g = {{1, 1}};
    std::vector<Objective> w = {{1.1, 1.2}};
    CHECK(adrs(g, g) == 0.0);
    CHECK(adrs(g, w) == doctest::Approx(0.2));

    Rng rng(66);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Objective> exact, approx;
        int ng = 1 + static_cast<int>(rand_index(rng, 20));
        int nw = 1 + static_cast<int>(rand_index(rng, 20));
        for (int i = 0; i < ng; ++i)
            exact.push_back({0.5 + rand_unit(rng) * 10, 0.5 + rand_unit(rng) * 10});
        for (int i = 0; i < nw; ++i)
            approx.push_back({0.5 + rand_unit(rng) * 10, 0.5 + rand_unit(rng) * 10});
        // independent double-loop recomputation
        double sum = 0;
        for (const auto& ge : exact) {
            double best = 1e300;
            for (const auto& we : approx) {
                double f0 = std::max(0.0, (we[0] - ge[0]) / ge[0]);
                double f1 = std::max(0.0, (we[1] - ge[1]) / ge[1]);
                best = std::min(best, std::max(f0, f1));
            }
            sum += best;
        }
        CHECK(adrs(exact, approx) == doctest::Approx(sum / ng).epsilon(1e-15));
        CHECK(adrs(exact, approx) >= 0);
        // adding an exact member to the approximation never hurts
        std::vector<Objective> better = approx;
        better.push_back(exact[0]);
        CHECK(adrs(exact, better) <= adrs(exact, approx) + 1e-15);
    }
}

TEST_CASE("explore: full budget reaches ADRS zero; trace is non-increasing with a perfect predictor") {
    Rng rng(77);
    auto space = random_space(rng, 200);
    auto exact = objectives_of(pareto_front(space, PowerField::TruePower), PowerField::TruePower);
    Predictor perfect = [&](const DesignPoint& p) {
        return space[static_cast<std::size_t>(p.id)].true_power;
    };

    ExploreOptions opts;
    opts.init_budget = 0.02;
    opts.total_budget = 1.0;
    opts.batch = 16;
    opts.seed = 1;
    ExploreResult full = explore(space, perfect, opts, &exact);
    CHECK(full.trace.back().adrs_value == 0.0);
    CHECK(static_cast<int>(full.sampled_ids.size()) == 200);
    for (std::size_t i = 1; i < full.trace.size(); ++i)
        CHECK(full.trace[i].adrs_value <= full.trace[i - 1].adrs_value + 1e-12);
}

TEST_CASE("explore: constant predictor still terminates with a valid frontier") {
    Rng rng(78);
    auto space = random_space(rng, 120);
    auto exact = objectives_of(pareto_front(space, PowerField::TruePower), PowerField::TruePower);
    Predictor constant = [](const DesignPoint&) { return 1.0; };
    ExploreOptions opts;
    opts.total_budget = 0.3;
    opts.batch = 8;
    opts.seed = 5;
    ExploreResult res = explore(space, constant, opts, &exact);
    CHECK(static_cast<int>(res.sampled_ids.size()) ==
          static_cast<int>(std::ceil(0.3 * 120)));
    CHECK(!res.sampled_frontier.empty());
    // frontier members must be sampled points
    std::set<int> sampled(res.sampled_ids.begin(), res.sampled_ids.end());
    for (const auto& p : res.sampled_frontier) CHECK(sampled.count(p.id) == 1);
}

TEST_CASE("explore: exact sampled count and no true-power reads of unsampled points") {
    Rng rng(79);
    auto space = random_space(rng, 97);
    Predictor noisy = [&](const DesignPoint& p) {
        return space[static_cast<std::size_t>(p.id)].true_power * 1.1 + 0.01;
    };
    ExploreOptions opts;
    opts.init_budget = 0.02;
    opts.total_budget = 0.4;
    opts.batch = 5;
    opts.seed = 9;
    ExploreResult res = explore(space, noisy, opts, nullptr);
    CHECK(static_cast<int>(res.sampled_ids.size()) ==
          static_cast<int>(std::ceil(0.4 * 97)));
    std::set<int> sampled(res.sampled_ids.begin(), res.sampled_ids.end());
    CHECK(sampled.size() == res.sampled_ids.size()); // no double sampling
    for (const auto& [id, reads] : res.true_power_reads) CHECK(sampled.count(id) == 1);
}

TEST_CASE("explore is deterministic per seed") {
    Rng rng(80);
    auto space = random_space(rng, 64);
    Predictor perfect = [&](const DesignPoint& p) {
        return space[static_cast<std::size_t>(p.id)].true_power;
    };
    ExploreOptions opts;
    opts.total_budget = 0.5;
    opts.batch = 4;
    opts.seed = 3;
    auto a = explore(space, perfect, opts, nullptr);
    auto b = explore(space, perfect, opts, nullptr);
    CHECK(a.sampled_ids == b.sampled_ids);
}

TEST_CASE("budget larger than the space is rejected") {
    Rng rng(81);
    auto space = random_space(rng, 10);
    Predictor p = [](const DesignPoint&) { return 1.0; };
    ExploreOptions opts;
    opts.total_budget = 1.5;
    CHECK_THROWS_AS(explore(space, p, opts, nullptr), ValidationError);
}

TEST_SUITE_END();
