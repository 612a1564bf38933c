#include "cellnas/pipeline.hpp"

#include <algorithm>

#include "cellnas/errors.hpp"
#include "cellnas/external_evaluator.hpp"

namespace cellnas {

std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& cfg) {
    if (cfg.backend.kind == BackendKind::External) return ExternalEvaluator::connect(cfg.backend.endpoint, cfg.space);
    return std::make_unique<SurrogateEvaluator>(cfg.space, cfg.surrogate);
}

Individual make_individual(const Genome& g, const EvalResult& r, const ConstraintBounds& bounds, Provenance prov) {
    Individual ind;
    ind.genome = g;
    ind.quality_measured = r.quality_measured;
    const double madds = static_cast<double>(r.multi_adds);
    const double params = static_cast<double>(r.params);
    ind.objectives.values = {r.quality_measured ? -r.psnr : 0.0, madds, params};
    ind.objectives.m_hard = 1;
    ind.violation =
        total_violation(bounds, r.quality_measured ? std::optional<double>(r.psnr) : std::nullopt, madds, params);
    ind.provenance = prov;
    return ind;
}

Search::Search(SearchConfig cfg, std::unique_ptr<Evaluator> evaluator) : evaluator_(std::move(evaluator)) {
    cfg.validate();
    state_.config = std::move(cfg);
    state_.rng = Rng(state_.config.seed);
    state_.controller.params =
        ControllerParams::random(state_.config.controller_shape(), state_.rng, state_.config.controller_init_scale);
    roulette_ = RouletteTables::for_space(state_.config.space, state_.config.roulette_epsilon);
}

Search::Search(SearchState state, std::unique_ptr<Evaluator> evaluator)
    : state_(std::move(state)), evaluator_(std::move(evaluator)) {
    state_.config.validate();
    roulette_ = RouletteTables::for_space(state_.config.space, state_.config.roulette_epsilon);
    for (const ArchiveEntry& e : state_.archive) {
        archived_.insert(e.genome);
        EvalResult r;
        r.psnr = e.psnr;
        r.mse = e.mse;
        r.multi_adds = e.multi_adds;
        r.params = e.params;
        r.source = state_.config.backend.kind == BackendKind::External ? EvalSource::External : EvalSource::Surrogate;
        cache_.insert(e.genome, r);
    }
}

Search::Evaluated Search::evaluate_batch(const std::vector<Genome>& genomes, const std::vector<Provenance>& provenance,
                                         Counters& counters) {
    const SearchConfig& cfg = state_.config;
    Evaluated out;
    out.results.resize(genomes.size());
    std::vector<Genome> to_eval;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        const CostReport cost = cost_of(genomes[i], cfg.space);
        const bool cheap_ok = cheap_violation(cfg.bounds, static_cast<double>(cost.multi_adds),
                                              static_cast<double>(cost.params)) == 0.0;
        if (cfg.dry_run || !cheap_ok) {
            out.results[i] = unmeasured_result(cost, EvalSource::Surrogate);
            if (!cheap_ok) ++counters.skipped_precheck;
            continue;
        }
        to_eval.push_back(genomes[i]);
        slots.push_back(i);
    }
    if (!to_eval.empty()) {
        if (!evaluator_) evaluator_ = make_evaluator(cfg);
        DispatchStats stats;
        auto results = dispatch_generation(to_eval, cfg.workers, *evaluator_, &cache_, &stats);
        counters.backend_calls += stats.backend_calls;
        counters.cache_hits += stats.cache_hits;
        for (std::size_t j = 0; j < slots.size(); ++j) {
            if (!results[j].quality_measured) ++counters.unmeasured;
            out.results[slots[j]] = results[j];
        }
    }
    out.individuals.reserve(genomes.size());
    for (std::size_t i = 0; i < genomes.size(); ++i)
        out.individuals.push_back(make_individual(genomes[i], out.results[i], cfg.bounds, provenance[i]));
    return out;
}

void Search::archive_results(const Evaluated& batch, std::uint32_t generation) {
    for (std::size_t i = 0; i < batch.individuals.size(); ++i) {
        const Individual& ind = batch.individuals[i];
        const EvalResult& r = batch.results[i];
        if (!r.quality_measured || !archived_.insert(ind.genome).second) continue;
        state_.archive.push_back(
            ArchiveEntry{ind.genome, r.psnr, r.mse, r.multi_adds, r.params, ind.violation, generation});
    }
}

void Search::record_stats() {
    GenerationStats s;
    s.generation = state_.generation;
    std::vector<double> psnrs;
    for (const Individual& ind : state_.population) {
        if (ind.quality_measured) psnrs.push_back(-ind.objectives[0]);
        if (ind.feasible()) ++s.feasible;
        if (ind.rank == 0) ++s.front_size;
    }
    if (!psnrs.empty()) {
        std::sort(psnrs.begin(), psnrs.end());
        s.best_psnr = psnrs.back();
        const std::size_t m = psnrs.size();
        s.median_psnr = m % 2 ? psnrs[m / 2] : 0.5 * (psnrs[m / 2 - 1] + psnrs[m / 2]);
    }
    state_.history.push_back(s);
}

void Search::initialize() {
    if (state_.initialized) return;
    const SearchConfig& cfg = state_.config;
    Rng rng = state_.rng;
    Counters counters = state_.counters;
    const std::size_t pool_size = 2 * static_cast<std::size_t>(cfg.population);
    const std::vector<Genome> genomes = uniform_init(pool_size, cfg.space, rng, cfg.init_mode);
    const std::vector<Provenance> prov(genomes.size(), Provenance::Init);
    Evaluated batch = evaluate_batch(genomes, prov, counters);
    counters.spawned_total += pool_size;

    archive_results(batch, 0);
    state_.population = environmental_selection(std::move(batch.individuals), cfg.population);
    state_.rng = rng;
    state_.counters = counters;
    state_.generation = 0;
    state_.initialized = true;
    record_stats();
}

void Search::run_generation() {
    if (!state_.initialized) throw DomainError("run_generation: search not initialized");
    const SearchConfig& cfg = state_.config;
    Rng rng = state_.rng;
    Counters counters = state_.counters;
    const MutationContext ctx{&state_.controller, &roulette_};

    std::vector<Genome> children;
    std::vector<Provenance> provenance;
    std::vector<std::optional<Episode>> episodes;
    children.reserve(cfg.population);
    for (std::uint32_t i = 0; i < cfg.population; ++i) {
        const Individual& a = binary_tournament(state_.population, rng);
        const Individual& b = binary_tournament(state_.population, rng);
        Genome child = k_point_crossover(a.genome, b.genome, cfg.crossover_k, rng);
        Provenance prov = Provenance::Crossover;
        std::optional<Episode> episode;
        if (rng.uniform01() < cfg.probs.mutation_ratio) {
            MutationOutcome m = hierarchical_mutate(child, cfg.probs, ctx, rng);
            child = std::move(m.child);
            prov = m.provenance;
            episode = std::move(m.episode);
            ++counters.mutated;
            switch (prov) {
                case Provenance::NaturalMut: ++counters.natural; break;
                case Provenance::ReinforcedMut: ++counters.reinforced; break;
                case Provenance::RouletteMut: ++counters.roulette; break;
                case Provenance::PriorMut: ++counters.prior; break;
                default: break;
            }
        } else {
            ++counters.crossover_only;
        }
        children.push_back(std::move(child));
        provenance.push_back(prov);
        episodes.push_back(std::move(episode));
    }

    Evaluated batch = evaluate_batch(children, provenance, counters);
    counters.spawned_total += cfg.population;
    counters.offspring_total += cfg.population;

    // Unscored children (pre-check skip, timeout) count as mse = 1, the worst
    // error for unit-peak images.
    Controller controller = state_.controller;
    if (!cfg.dry_run) {
        std::vector<Episode> rewarded;
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            if (!episodes[i]) continue;
            Episode ep = *episodes[i];
            ep.reward = reward_from_mse(batch.results[i].mse, cfg.rl.reward_cap);
            rewarded.push_back(std::move(ep));
        }
        const std::uint64_t before = controller.updates;
        controller.train(rewarded, cfg.rl);
        counters.controller_updates += controller.updates - before;
    }

    const std::uint32_t generation = state_.generation + 1;
    archive_results(batch, generation);
    std::vector<Individual> pool = state_.population;
    pool.insert(pool.end(), std::make_move_iterator(batch.individuals.begin()),
                std::make_move_iterator(batch.individuals.end()));
    state_.population = environmental_selection(std::move(pool), cfg.population);
    state_.controller = std::move(controller);
    state_.rng = rng;
    state_.counters = counters;
    state_.generation = generation;
    record_stats();
}

void Search::run(const std::function<void(const SearchState&)>& on_generation) {
    if (!state_.initialized) {
        initialize();
        if (on_generation) on_generation(state_);
    }
    while (state_.generation < state_.config.generations) {
        run_generation();
        if (on_generation) on_generation(state_);
    }
}

SearchState run_search(const SearchConfig& cfg) {
    Search search(cfg);
    search.run();
    return search.state();
}

std::vector<Individual> feasible_front(const std::vector<Individual>& population) {
    std::vector<Individual> feasible;
    std::set<Genome> seen;
    for (const Individual& ind : population)
        if (ind.feasible() && ind.quality_measured && seen.insert(ind.genome).second) feasible.push_back(ind);
    if (feasible.empty()) return {};
    const Fronts fronts = fast_nondominated_sort(feasible);
    std::vector<Individual> front;
    for (std::size_t i : fronts[0]) front.push_back(feasible[i]);
    std::sort(front.begin(), front.end(),
              [](const Individual& a, const Individual& b) {
                  if (a.objectives[1] != b.objectives[1]) return a.objectives[1] < b.objectives[1];
                  return a.genome < b.genome;
              });
    return front;
}

}  // namespace cellnas
