#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cellnas/rng.hpp"
#include "cellnas/search_space.hpp"

namespace cellnas {

/// K objectives in minimization form. The first m_hard entries come from an
/// evaluator (-psnr by default); the rest are analytic (multi-adds, params).
struct ObjectiveVector {
    std::vector<double> values;
    std::uint32_t m_hard = 1;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

/// Bounds on psnr (dB), multi-adds and params. Absent bounds are unbounded.
struct ConstraintBounds {
    std::optional<double> psnr_min, psnr_max;
    std::optional<double> flops_min, flops_max;
    std::optional<double> params_min, params_max;

    void validate() const;
    bool has_cheap_bounds() const { return flops_min || flops_max || params_min || params_max; }
    friend bool operator==(const ConstraintBounds&, const ConstraintBounds&) = default;
};

/// Normalized shortfall of value below a lower bound / above an upper bound:
/// the raw excess divided by |bound|, or the raw excess when the bound is 0.
double bound_violation(double value, std::optional<double> lo, std::optional<double> hi);

/// Violation of the flops/params bounds only.
double cheap_violation(const ConstraintBounds& b, double multi_adds, double params);

/// Total violation. When psnr was not measured it counts as 0 dB, i.e. a
/// psnr_min bound is unmet by its full magnitude.
double total_violation(const ConstraintBounds& b, std::optional<double> psnr, double multi_adds, double params);

enum class Provenance : std::uint8_t { Init, Crossover, NaturalMut, ReinforcedMut, RouletteMut, PriorMut };

std::string_view provenance_label(Provenance p);
Provenance parse_provenance(std::string_view s);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Individual {
    Genome genome;
    ObjectiveVector objectives;
    /// False when the hard objectives were never measured (cheap-bound skip or
    /// evaluator timeout). The hard slots then hold the placeholder -0 dB.
    bool quality_measured = true;
    double violation = 0.0;
    int rank = -1;
    double crowding = 0.0;
    Provenance provenance = Provenance::Init;

    bool feasible() const noexcept { return violation == 0.0; }
    friend bool operator==(const Individual&, const Individual&) = default;
};

/// Pareto domination under minimization.
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);
bool dominates(std::span<const double> a, std::span<const double> b);

/// Feasibility first, then smaller violation, then Pareto domination.
bool constrained_dominates(const Individual& a, const Individual& b);

using Fronts = std::vector<std::vector<std::size_t>>;

/// Deb's fast non-dominated sort under constrained domination. Sets rank.
Fronts fast_nondominated_sort(std::vector<Individual>& pop);

/// Forward-difference crowding distance over the given members of pop.
/// Per objective the members are ordered ascending (ties by genome, then by
/// position in `members`); each receives (f_next - f)/(f_max - f_min) and the
/// last receives +inf. Degenerate objectives contribute 0 except at the end.
std::vector<double> crowding_distance(const std::vector<Individual>& pop, std::span<const std::size_t> members);

/// Convenience for a standalone front.
std::vector<double> crowding_distance(const std::vector<Individual>& front);

/// Elitist NSGA-II survival: sorts pool, assigns rank and crowding to every
/// member, fills whole fronts and truncates the straddling one by descending
/// crowding. Output order: by rank, then descending crowding, then genome.
std::vector<Individual> environmental_selection(std::vector<Individual> pool, std::size_t n);

/// Better-of-two under (rank asc, crowding desc, genome asc).
bool tournament_better(const Individual& a, const Individual& b);

/// Draws two distinct members uniformly (one if the population has size 1).
const Individual& binary_tournament(std::span<const Individual> pop, Rng& rng);

/// Exact dominated hypervolume for K <= 3. Every point must be <= ref componentwise.
double hypervolume(std::span<const ObjectiveVector> front, const ObjectiveVector& ref);
double hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> ref);

}  // namespace cellnas
