#include <doctest.h>

#include <algorithm>
#include <map>

#include "cellnas/errors.hpp"
#include "cellnas/moo.hpp"
#include "oracles.hpp"

using namespace cellnas;

namespace {

Individual point(std::vector<double> f, double violation = 0.0, Genome g = {}) {
    Individual ind;
    ind.objectives.values = std::move(f);
    ind.violation = violation;
    ind.genome = std::move(g);
    return ind;
}

std::vector<Individual> random_population(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<Individual> pop;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> f(k);
        // Small integer grid so ties and exact duplicates occur.
        for (double& v : f) v = static_cast<double>(rng.uniform_index(6));
        const double viol = rng.uniform01() < 0.2 ? static_cast<double>(1 + rng.uniform_index(3)) : 0.0;
        pop.push_back(point(f, viol, Genome{static_cast<std::uint32_t>(rng.uniform_index(4))}));
    }
    if (n > 2) pop[n - 1] = pop[0];
    return pop;
}

std::vector<std::vector<std::size_t>> sorted_fronts(std::vector<std::vector<std::size_t>> fronts) {
    for (auto& f : fronts) std::sort(f.begin(), f.end());
    return fronts;
}

}  // namespace

TEST_CASE("dominates") {
    CHECK(dominates(ObjectiveVector{{1, 2, 3}}, ObjectiveVector{{2, 2, 3}}));
    CHECK_FALSE(dominates(ObjectiveVector{{1, 2, 3}}, ObjectiveVector{{1, 2, 3}}));
    CHECK_FALSE(dominates(ObjectiveVector{{1, 3}}, ObjectiveVector{{2, 2}}));
    CHECK_THROWS_AS(dominates(ObjectiveVector{{1, 2}}, ObjectiveVector{{1, 2, 3}}), DomainError);

    Rng rng(5);
    std::vector<std::vector<double>> pts(64, std::vector<double>(3));
    for (auto& p : pts)
        for (double& v : p) v = static_cast<double>(rng.uniform_index(4));
    for (const auto& a : pts)
        for (const auto& b : pts) {
            const bool literal = a[0] <= b[0] && a[1] <= b[1] && a[2] <= b[2] && (a[0] < b[0] || a[1] < b[1] || a[2] < b[2]);
            CHECK(dominates(a, b) == literal);
        }
}

TEST_CASE("constrained domination") {
    CHECK(constrained_dominates(point({9, 9}, 0.0), point({0, 0}, 5.0)));
    CHECK_FALSE(constrained_dominates(point({0, 0}, 5.0), point({9, 9}, 0.0)));
    CHECK(constrained_dominates(point({9, 9}, 2.0), point({0, 0}, 7.0)));
    Rng rng(8);
    for (int t = 0; t < 200; ++t) {
        auto a = point({rng.uniform01(), rng.uniform01(), rng.uniform01()});
        auto b = point({rng.uniform01(), rng.uniform01(), rng.uniform01()});
        CHECK(constrained_dominates(a, b) == dominates(a.objectives, b.objectives));
    }
}

TEST_CASE("bound violation normalization") {
    ConstraintBounds b;
    b.psnr_min = 30.0;
    b.params_max = 1000.0;
    b.flops_min = 0.0;
    CHECK(total_violation(b, 30.0, 10.0, 1000.0) == 0.0);
    CHECK(total_violation(b, 27.0, 10.0, 1000.0) == doctest::Approx(0.1));
    CHECK(total_violation(b, 30.0, 10.0, 1500.0) == doctest::Approx(0.5));
    CHECK(total_violation(b, std::nullopt, 10.0, 1000.0) == doctest::Approx(1.0));
    CHECK(bound_violation(-2.0, 0.0, std::nullopt) == doctest::Approx(2.0));
    ConstraintBounds bad;
    bad.psnr_min = 31;
    bad.psnr_max = 30;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("fast_nondominated_sort small example") {
    std::vector<Individual> pop = {point({1, 4}), point({2, 2}), point({4, 1}), point({3, 3})};
    const auto fronts = sorted_fronts(fast_nondominated_sort(pop));
    REQUIRE(fronts.size() == 2);
    CHECK(fronts[0] == std::vector<std::size_t>{0, 1, 2});
    CHECK(fronts[1] == std::vector<std::size_t>{3});
    CHECK(pop[3].rank == 1);
    CHECK(pop[0].rank == 0);

    std::vector<Individual> same(5, point({1, 1, 1}));
    CHECK(fast_nondominated_sort(same).size() == 1);

    std::vector<Individual> empty;
    CHECK_THROWS_AS(fast_nondominated_sort(empty), DomainError);
}

TEST_CASE("fast_nondominated_sort matches brute force and partitions") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        auto pop = random_population(rng, 1 + rng.uniform_index(64), 3);
        const auto expected = sorted_fronts(oracle::brute_force_fronts(pop));
        const auto fronts = sorted_fronts(fast_nondominated_sort(pop));
        REQUIRE(fronts == expected);
        std::vector<int> seen(pop.size(), 0);
        for (std::size_t k = 0; k < fronts.size(); ++k)
            for (std::size_t i : fronts[k]) {
                ++seen[i];
                CHECK(pop[i].rank == static_cast<int>(k));
                for (std::size_t j : fronts[k]) CHECK_FALSE(constrained_dominates(pop[j], pop[i]));
            }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    }
}

TEST_CASE("crowding distance forward differences") {
    SUBCASE("one objective {1,2,4}") {
        const auto d = crowding_distance(std::vector<Individual>{point({1}), point({2}), point({4})});
        CHECK(d[0] == doctest::Approx(1.0 / 3.0));
        CHECK(d[1] == doctest::Approx(2.0 / 3.0));
        CHECK(d[2] == kInf);
    }
    SUBCASE("coincident points get distinct distances") {
        const auto d = crowding_distance(
            std::vector<Individual>{point({1}, 0.0, Genome{5}), point({1}, 0.0, Genome{6}), point({3}, 0.0, Genome{7})});
        CHECK(d[0] == 0.0);
        CHECK(d[1] == doctest::Approx(1.0));
        CHECK(d[2] == kInf);
        CHECK(d[0] != d[1]);
    }
    SUBCASE("single member") {
        const auto d = crowding_distance(std::vector<Individual>{point({1, 2, 3})});
        CHECK(d[0] == kInf);
    }
    SUBCASE("degenerate objective contributes nothing but its end marker") {
        const auto d = crowding_distance(
            std::vector<Individual>{point({1, 7}, 0, Genome{1}), point({2, 7}, 0, Genome{2}), point({5, 7}, 0, Genome{3})});
        CHECK(d[0] == doctest::Approx(0.25));
        CHECK(d[1] == doctest::Approx(0.75));
        CHECK(d[2] == kInf);
    }
}

TEST_CASE("crowding distance is invariant under permutation") {
    Rng rng(23);
    for (int t = 0; t < 50; ++t) {
        std::vector<Individual> front;
        for (std::uint32_t i = 0; i < 12; ++i)
            front.push_back(point({static_cast<double>(rng.uniform_index(5)), rng.uniform01(), rng.uniform01()}, 0.0,
                                  Genome{i}));
        const auto base = crowding_distance(front);
        std::map<Genome, double> by_genome;
        for (std::size_t i = 0; i < front.size(); ++i) by_genome[front[i].genome] = base[i];
        auto shuffled = front;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
        const auto d = crowding_distance(shuffled);
        for (std::size_t i = 0; i < shuffled.size(); ++i) CHECK(d[i] == by_genome[shuffled[i].genome]);
    }
}

TEST_CASE("environmental selection") {
    SUBCASE("single front of size N is kept") {
        std::vector<Individual> pop = {point({1, 4}, 0, Genome{1}), point({2, 2}, 0, Genome{2}), point({4, 1}, 0, Genome{3})};
        const auto out = environmental_selection(pop, 3);
        std::vector<Genome> got;
        for (const auto& i : out) got.push_back(i.genome);
        std::sort(got.begin(), got.end());
        CHECK(got == std::vector<Genome>{Genome{1}, Genome{2}, Genome{3}});
    }
    SUBCASE("copies of a dominating point fill the survivors") {
        std::vector<Individual> pool;
        for (std::uint32_t i = 0; i < 6; ++i) pool.push_back(point({0, 0}, 0, Genome{100}));
        for (std::uint32_t i = 0; i < 6; ++i) pool.push_back(point({1.0 + i, 5.0 - i}, 0, Genome{i}));
        const auto out = environmental_selection(pool, 6);
        REQUIRE(out.size() == 6);
        for (const auto& i : out) {
            CHECK(i.rank == 0);
            CHECK(i.genome == Genome{100});
        }
    }
    SUBCASE("front 0 always survives when it fits") {
        Rng rng(31);
        for (int t = 0; t < 100; ++t) {
            auto pool = random_population(rng, 2 + rng.uniform_index(40), 3);
            for (std::size_t i = 0; i < pool.size(); ++i) pool[i].genome = Genome{static_cast<std::uint32_t>(i)};
            const std::size_t n = 1 + rng.uniform_index(pool.size());
            const auto fronts = oracle::brute_force_fronts(pool);
            const auto out = environmental_selection(pool, n);
            CHECK(out.size() == n);
            if (fronts[0].size() <= n) {
                for (std::size_t i : fronts[0]) {
                    const bool kept = std::any_of(out.begin(), out.end(),
                                                  [&](const Individual& s) { return s.genome == pool[i].genome; });
                    CHECK(kept);
                }
            }
        }
    }
    CHECK_THROWS_AS(environmental_selection({point({1})}, 2), DomainError);
}

TEST_CASE("binary tournament") {
    auto a = point({0}, 0, Genome{1});
    a.rank = 0;
    auto b = point({0}, 0, Genome{2});
    b.rank = 3;
    CHECK(tournament_better(a, b));
    a.rank = b.rank = 1;
    a.crowding = kInf;
    b.crowding = 0.2;
    CHECK(tournament_better(a, b));

    // One rank-0 individual among 8: it wins whenever drawn. Enumerate ordered
    // distinct pairs for the exact probability.
    std::vector<Individual> pop;
    for (std::uint32_t i = 0; i < 8; ++i) {
        auto p = point({0}, 0, Genome{i});
        p.rank = i == 3 ? 0 : 1;
        p.crowding = 1.0;
        pop.push_back(p);
    }
    int pairs = 0, wins = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            if (i != j) {
                ++pairs;
                wins += (i == 3 || j == 3);
            }
    const double p = static_cast<double>(wins) / pairs;
    Rng rng(99);
    int count = 0;
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) count += binary_tournament(pop, rng).genome == Genome{3};
    CHECK(oracle::within_3_sigma(count, draws, p));
    std::vector<Individual> none;
    CHECK_THROWS_AS(binary_tournament(none, rng), DomainError);
}

TEST_CASE("hypervolume") {
    CHECK(hypervolume({{0, 0.5}, {0.5, 0}}, std::vector<double>{1, 1}) == doctest::Approx(0.75));
    CHECK(hypervolume({{1, 1}}, std::vector<double>{1, 1}) == 0.0);
    CHECK(hypervolume({{0.25}}, std::vector<double>{1}) == doctest::Approx(0.75));
    CHECK(hypervolume({}, std::vector<double>{1, 1, 1}) == 0.0);
    CHECK_THROWS_AS(hypervolume({{2, 0}}, std::vector<double>{1, 1}), DomainError);

    Rng rng(41);
    for (int t = 0; t < 5; ++t) {
        std::vector<std::vector<double>> pts(1 + rng.uniform_index(8), std::vector<double>(3));
        for (auto& p : pts)
            for (double& v : p) v = rng.uniform01();
        const std::vector<double> ref{1, 1, 1};
        const double exact = hypervolume(pts, ref);
        const double mc = oracle::monte_carlo_hv(pts, {0, 0, 0}, ref, 1000000, 7 + t);
        CHECK(exact == doctest::Approx(mc).epsilon(0.02));
    }
}
