#include <doctest.h>

#include <cstdlib>
#include <set>

#include <json.hpp>

#include "cellnas/checkpoint.hpp"
#include "cellnas/config.hpp"
#include "cellnas/errors.hpp"
#include "cellnas/pipeline.hpp"

using namespace cellnas;

namespace {

SearchConfig small_config(std::uint32_t n = 8, std::uint32_t gens = 3) {
    SearchConfig c;
    c.seed = 11;
    c.population = n;
    c.generations = gens;
    c.workers = 2;
    c.embed_dim = 8;
    c.hidden_dim = 16;
    return c;
}

// Surrogate that starts failing after a number of calls.
class FailAfter final : public Evaluator {
public:
    explicit FailAfter(int budget) : budget_(budget) {}
    EvalResult evaluate(const Genome& g) override {
        if (budget_.fetch_sub(1) <= 0) throw EvaluationError("backend down", g.cells);
        return inner_.evaluate(g);
    }

private:
    std::atomic<int> budget_;
    SurrogateEvaluator inner_{SpaceConfig{}, SurrogateConfig{}};
};

}  // namespace

TEST_CASE("config json round trip and validation") {
    SearchConfig c = small_config();
    c.bounds.psnr_min = 28.5;
    c.bounds.params_max = 2e5;
    c.rl.baseline = BaselineKind::MovingAverage;
    c.init_mode = InitMode::PerCell;
    c.hv_reference = std::array<double, 3>{-20.0, 1e12, 1e7};
    c.backend.kind = BackendKind::External;
    c.backend.endpoint.command = "trainer --gpu 0";
    CHECK(config_from_json(config_to_json(c)) == c);

    const auto no_workers = config_to_json(c, false);
    CHECK_FALSE(no_workers.contains("workers"));

    CHECK(config_from_json(nlohmann::json::object()) == SearchConfig{});
    CHECK_THROWS_AS(config_from_json({{"populaton", 4}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"population", -4}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"mutation", {{"p_rm", 0.9}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"bounds", {{"psnr_min", 31}, {"psnr_max", 30}}}}), std::exception);
    CHECK_THROWS_AS(config_from_json({{"backend", {{"kind", "external"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"init_mode", "random"}}), ConfigError);
    CHECK(config_from_json({{"bounds", {{"psnr_min", nullptr}}}}).bounds.psnr_min == std::nullopt);
    CHECK_THROWS_AS(load_config_file("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("environment overrides") {
    SearchConfig c;
    ::setenv("CELLNAS_SEED", "1234", 1);
    ::setenv("CELLNAS_WORKERS", "3", 1);
    apply_env_overrides(c);
    CHECK(c.seed == 1234);
    CHECK(c.workers == 3);
    ::setenv("CELLNAS_WORKERS", "zero", 1);
    CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
    ::unsetenv("CELLNAS_SEED");
    ::unsetenv("CELLNAS_WORKERS");
}

TEST_CASE("individuals from results") {
    ConstraintBounds b;
    b.psnr_min = 30.0;
    const Genome g{0, 0, 0, 0, 0, 0, 0};
    const auto cost = cost_of(g, SpaceConfig{});
    const Individual un = make_individual(g, unmeasured_result(cost, EvalSource::External), b, Provenance::Init);
    CHECK_FALSE(un.quality_measured);
    CHECK(un.violation == doctest::Approx(1.0));
    CHECK(un.objectives[0] == 0.0);
    CHECK(un.objectives[2] == static_cast<double>(cost.params));

    EvalResult r;
    r.psnr = 31.0;
    r.mse = mse_from_psnr(31.0);
    r.multi_adds = cost.multi_adds;
    r.params = cost.params;
    const Individual ok = make_individual(g, r, b, Provenance::Crossover);
    CHECK(ok.feasible());
    CHECK(ok.objectives.values == std::vector<double>{-31.0, static_cast<double>(cost.multi_adds),
                                                      static_cast<double>(cost.params)});
}

TEST_CASE("search bookkeeping") {
    const SearchConfig c = small_config();
    const SearchState s = run_search(c);
    CHECK(s.finished());
    CHECK(s.generation == 3);
    CHECK(s.population.size() == 8);
    CHECK(s.history.size() == 4);
    CHECK(s.counters.spawned_total == 16 + 8 * 3);
    CHECK(s.counters.offspring_total == 24);
    CHECK(s.counters.crossover_only + s.counters.mutated == 24);
    CHECK(s.counters.mutated == s.counters.natural + s.counters.reinforced + s.counters.roulette + s.counters.prior);
    CHECK(s.counters.backend_calls + s.counters.cache_hits == 16 + 24);
    std::set<Genome> distinct;
    for (const auto& e : s.archive) {
        CHECK(distinct.insert(e.genome).second);
        CHECK(e.generation <= 3);
    }
    CHECK(distinct.size() == s.counters.backend_calls);
    for (const auto& ind : s.population) {
        CHECK(ind.rank >= 0);
        CHECK(ind.genome.size() == 7);
    }
    if (s.counters.reinforced > 0) CHECK(s.counters.controller_updates > 0);
}

TEST_CASE("no mutation leaves the controller alone") {
    SearchConfig c = small_config();
    c.probs.mutation_ratio = 0.0;
    Search search(c);
    const ControllerParams before = search.state().controller.params;
    search.run();
    CHECK(search.state().controller.params == before);
    CHECK(search.state().controller.updates == 0);
    CHECK(search.state().counters.mutated == 0);
    CHECK(search.state().counters.crossover_only == 24);
}

TEST_CASE("controller is trained when it proposes") {
    SearchConfig c = small_config();
    c.probs = MutationProbabilities{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
    c.rl.batch_size = 4;
    Search search(c);
    const ControllerParams before = search.state().controller.params;
    search.run();
    CHECK(search.state().counters.reinforced == 24);
    CHECK(search.state().controller.updates == 6);
    CHECK_FALSE(search.state().controller.params == before);
}

TEST_CASE("dry run counts offspring without evaluating") {
    SearchConfig c = small_config(56, 5);
    c.dry_run = true;
    const SearchState s = run_search(c);
    CHECK(s.counters.offspring_total == 280);
    CHECK(s.counters.spawned_total == 112 + 280);
    CHECK(s.counters.backend_calls == 0);
    CHECK(s.archive.empty());
}

TEST_CASE("cheap bounds skip evaluation") {
    SearchConfig c = small_config();
    c.bounds.params_max = 1.0;
    const SearchState s = run_search(c);
    CHECK(s.counters.backend_calls == 0);
    CHECK(s.counters.skipped_precheck == 16 + 24);
    for (const auto& ind : s.population) {
        CHECK_FALSE(ind.feasible());
        CHECK_FALSE(ind.quality_measured);
    }
    CHECK(feasible_front(s.population).empty());
}

TEST_CASE("same seed gives the same run for any worker count") {
    SearchConfig c = small_config(10, 4);
    c.workers = 1;
    const auto a = checkpoint_to_json(run_search(c));
    c.workers = 8;
    const auto b = checkpoint_to_json(run_search(c));
    CHECK(a.dump() == b.dump());
    c.seed = 12;
    CHECK(checkpoint_to_json(run_search(c)).dump() != a.dump());
}

TEST_CASE("failed generation leaves the state untouched") {
    SearchConfig c = small_config();
    Search search(c, std::make_unique<FailAfter>(16));
    search.initialize();
    const auto before = checkpoint_to_json(search.state()).dump();
    CHECK_THROWS_AS(search.run_generation(), GenerationError);
    CHECK(checkpoint_to_json(search.state()).dump() == before);
    CHECK_THROWS_AS(Search(small_config()).run_generation(), DomainError);
}

TEST_CASE("feasible front") {
    SearchConfig c = small_config(12, 4);
    c.bounds.psnr_min = 27.0;
    const SearchState s = run_search(c);
    const auto front = feasible_front(s.population);
    REQUIRE_FALSE(front.empty());
    for (std::size_t i = 0; i < front.size(); ++i) {
        CHECK(front[i].feasible());
        for (const auto& other : front) CHECK_FALSE(dominates(other.objectives, front[i].objectives));
        if (i > 0) CHECK(front[i - 1].objectives[1] <= front[i].objectives[1]);
    }
}

TEST_CASE("crossover and elitism alone keep archive hypervolume non-decreasing") {
    SearchConfig c = small_config(8, 20);
    c.probs.mutation_ratio = 0.0;
    c.bounds.psnr_min = 27.0;
    c.bounds.flops_max = 2e11;
    c.bounds.params_max = 8e5;
    const std::vector<double> ref{-27.0, 2e11, 8e5};
    std::vector<double> hv;
    Search search(c);
    search.run([&](const SearchState& s) {
        std::vector<std::vector<double>> pts;
        for (const auto& e : s.archive)
            if (e.violation == 0.0)
                pts.push_back({-e.psnr, static_cast<double>(e.multi_adds), static_cast<double>(e.params)});
        hv.push_back(hypervolume(pts, ref));
    });
    REQUIRE(hv.size() == 21);
    for (std::size_t i = 1; i < hv.size(); ++i) CHECK(hv[i] >= hv[i - 1]);
    CHECK(hv.back() > 0.0);
}

TEST_CASE("desk-scale run yields a front of at least five genomes") {
    SearchConfig c = small_config(16, 30);
    c.bounds.psnr_min = 27.0;
    const SearchState s = run_search(c);
    const auto front = feasible_front(s.population);
    CHECK(front.size() >= 5);
    for (const auto& ind : front) CHECK(-ind.objectives[0] >= 27.0);
}
