#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <vector>

#include "cellnas/config.hpp"
#include "cellnas/controller.hpp"
#include "cellnas/evaluation.hpp"
#include "cellnas/genetic_ops.hpp"
#include "cellnas/moo.hpp"
#include "cellnas/rng.hpp"

namespace cellnas {

/// One evaluated genome. Entries are appended once per distinct genome whose
/// quality was measured and never change afterwards.
struct ArchiveEntry {
    Genome genome;
    double psnr = 0.0;
    double mse = 1.0;
    std::uint64_t multi_adds = 0;
    std::uint64_t params = 0;
    double violation = 0.0;
    std::uint32_t generation = 0;

    friend bool operator==(const ArchiveEntry&, const ArchiveEntry&) = default;
};

struct Counters {
    std::uint64_t spawned_total = 0;     ///< 2N initial plus N per generation
    std::uint64_t offspring_total = 0;   ///< N per generation
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t skipped_precheck = 0;  ///< offspring rejected on flops/params before evaluation
    std::uint64_t unmeasured = 0;        ///< evaluator returned no score (timeouts)
    std::uint64_t crossover_only = 0;
    std::uint64_t mutated = 0;
    std::uint64_t natural = 0;
    std::uint64_t reinforced = 0;
    std::uint64_t roulette = 0;
    std::uint64_t prior = 0;
    std::uint64_t controller_updates = 0;

    friend bool operator==(const Counters&, const Counters&) = default;
};

struct GenerationStats {
    std::uint32_t generation = 0;
    double best_psnr = 0.0;    ///< over measured population members; 0 if none
    double median_psnr = 0.0;
    std::uint32_t front_size = 0;
    std::uint32_t feasible = 0;

    friend bool operator==(const GenerationStats&, const GenerationStats&) = default;
};

struct SearchState {
    SearchConfig config;
    std::uint32_t generation = 0;  ///< completed generations; 0 right after initialization
    bool initialized = false;
    std::vector<Individual> population;
    std::vector<ArchiveEntry> archive;
    Controller controller;
    Rng rng;
    Counters counters;
    std::vector<GenerationStats> history;

    bool finished() const { return initialized && generation >= config.generations; }
};

/// Builds the evaluator for a config (surrogate or external).
std::unique_ptr<Evaluator> make_evaluator(const SearchConfig& cfg);

/// Individual from an evaluation result under the given bounds.
Individual make_individual(const Genome& g, const EvalResult& r, const ConstraintBounds& bounds, Provenance prov);

/// Orchestrates the search. Owns the population, rng and controller; only
/// evaluation fans out to worker threads.
class Search {
public:
    /// Fresh search: controller weights drawn from the seeded rng.
    explicit Search(SearchConfig cfg, std::unique_ptr<Evaluator> evaluator = nullptr);
    /// Resumes a saved state; the cache is rebuilt from the archive.
    explicit Search(SearchState state, std::unique_ptr<Evaluator> evaluator = nullptr);

    /// Draws 2N uniform individuals, evaluates them and keeps N.
    void initialize();
    /// One generation: tournament, crossover, hierarchical mutation, cheap-bound
    /// pre-check, evaluation, controller update, elitist selection. On failure
    /// the state is left at the previous generation.
    void run_generation();
    /// initialize() if needed, then generations until config.generations.
    void run(const std::function<void(const SearchState&)>& on_generation = {});

    const SearchState& state() const noexcept { return state_; }
    SearchState& mutable_state() noexcept { return state_; }
    void set_workers(std::uint32_t workers) { state_.config.workers = workers; }
    const EvalCache& cache() const noexcept { return cache_; }

private:
    struct Evaluated {
        std::vector<Individual> individuals;
        std::vector<EvalResult> results;
    };

    Evaluated evaluate_batch(const std::vector<Genome>& genomes, const std::vector<Provenance>& provenance,
                             Counters& counters);
    void archive_results(const Evaluated& batch, std::uint32_t generation);
    void record_stats();

    SearchState state_;
    std::unique_ptr<Evaluator> evaluator_;
    EvalCache cache_;
    RouletteTables roulette_;
    std::set<Genome> archived_;
};

/// Runs a whole search from scratch and returns the final state.
SearchState run_search(const SearchConfig& cfg);

/// Population members with rank 0 that are feasible.
std::vector<Individual> feasible_front(const std::vector<Individual>& population);

}  // namespace cellnas
