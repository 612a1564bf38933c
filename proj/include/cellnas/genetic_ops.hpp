#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cellnas/controller.hpp"
#include "cellnas/moo.hpp"
#include "cellnas/rng.hpp"
#include "cellnas/search_space.hpp"

namespace cellnas {

/// Branch probabilities of the hierarchical mutation.
struct MutationProbabilities {
    double p_rm = 0.50;  ///< natural
    double p_re = 0.45;  ///< reinforced-dominant
    double p_pr = 0.05;  ///< prior-regularized
    double p_m = 0.75;   ///< within reinforced: controller
    double p_km = 0.25;  ///< within reinforced: roulette
    double mutation_ratio = 0.8;

    void validate() const;
    friend bool operator==(const MutationProbabilities&, const MutationProbabilities&) = default;
};

enum class InitMode : std::uint8_t {
    RepeatedCell,  ///< one operator repeated across all cells
    PerCell,       ///< each cell drawn independently
};

std::vector<Genome> uniform_init(std::size_t count, const SpaceConfig& cfg, Rng& rng,
                                 InitMode mode = InitMode::RepeatedCell);

/// Child = x with cell i replaced by y's cell i, i uniform over positions.
Genome single_point_crossover(const Genome& x, const Genome& y, Rng& rng);

/// Child = x with k distinct uniformly chosen cells taken from y.
Genome k_point_crossover(const Genome& x, const Genome& y, std::size_t k, Rng& rng);

inline constexpr double kNaturalCellRate = 0.2;

/// Each cell resampled uniformly with probability `rate`; if nothing changed,
/// one uniformly chosen cell is forced to a different index.
Genome natural_mutation(const Genome& parent, Rng& rng, double rate = kNaturalCellRate);

/// All cells set to the parent's cell at one uniformly chosen position.
Genome prior_mutation(const Genome& parent, Rng& rng);

/// Log-scale roulette weights for one cheap objective.
struct RouletteWeights {
    std::vector<double> weights;  ///< normalized, one per operator
    double epsilon = 0.1;
};

/// w_i proportional to log10(c_max) - log10(c_i) + epsilon.
RouletteWeights roulette_weights(std::span<const double> costs, double epsilon = 0.1);

/// One weight table per cheap objective (multi-adds, params), built from the
/// cost of each operator as a single cell fed with head_filters channels.
struct RouletteTables {
    std::array<RouletteWeights, 2> tables;

    static RouletteTables for_space(const SpaceConfig& cfg, double epsilon = 0.1);
};

/// n cells sampled i.i.d. from the given table.
Genome roulette_genome(const RouletteWeights& weights, std::size_t n, Rng& rng);

/// Chooses one of the tables uniformly, then samples n cells from it.
Genome roulette_genome(const RouletteTables& tables, std::size_t n, Rng& rng);

struct MutationContext {
    const Controller* controller = nullptr;
    const RouletteTables* roulette = nullptr;
};

struct MutationOutcome {
    Genome child;
    Provenance provenance = Provenance::NaturalMut;
    std::optional<Episode> episode;  ///< set when the controller produced the child
};

/// Categorical over (natural, reinforced, prior) from one draw, then within the
/// reinforced branch controller vs roulette from a second draw. The controller
/// branch generates a full genome from the zero state and ignores the parent.
MutationOutcome hierarchical_mutate(const Genome& parent, const MutationProbabilities& probs,
                                    const MutationContext& ctx, Rng& rng);

}  // namespace cellnas
