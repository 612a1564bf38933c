#include "cellnas/genetic_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cellnas/errors.hpp"

namespace cellnas {

void MutationProbabilities::validate() const {
    for (double p : {p_rm, p_re, p_pr, p_m, p_km, mutation_ratio})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mutation probabilities must lie in [0, 1]");
    if (std::abs(p_rm + p_re + p_pr - 1.0) > 1e-9) throw ConfigError("p_rm + p_re + p_pr must equal 1");
    if (std::abs(p_m + p_km - 1.0) > 1e-9) throw ConfigError("p_m + p_km must equal 1");
}

std::vector<Genome> uniform_init(std::size_t count, const SpaceConfig& cfg, Rng& rng, InitMode mode) {
    constexpr int kMaxRedraws = 10;
    auto draw = [&] {
        Genome g;
        g.cells.resize(cfg.n);
        if (mode == InitMode::RepeatedCell) {
            std::fill(g.cells.begin(), g.cells.end(), static_cast<std::uint32_t>(rng.uniform_index(kNumOperators)));
        } else {
            for (auto& c : g.cells) c = static_cast<std::uint32_t>(rng.uniform_index(kNumOperators));
        }
        return g;
    };
    std::vector<Genome> out;
    std::set<Genome> seen;
    out.reserve(count);
    while (out.size() < count) {
        Genome g = draw();
        for (int attempt = 0; attempt < kMaxRedraws && seen.count(g); ++attempt) g = draw();
        seen.insert(g);
        out.push_back(std::move(g));
    }
    return out;
}

Genome single_point_crossover(const Genome& x, const Genome& y, Rng& rng) {
    return k_point_crossover(x, y, 1, rng);
}

Genome k_point_crossover(const Genome& x, const Genome& y, std::size_t k, Rng& rng) {
    if (x.size() != y.size()) throw DomainError("crossover: parents differ in length");
    if (k < 1 || k > x.size()) throw DomainError("crossover: k must be in [1, n]");
    std::vector<std::size_t> positions(x.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    Genome child = x;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t r = j + rng.uniform_index(positions.size() - j);
        std::swap(positions[j], positions[r]);
        child[positions[j]] = y[positions[j]];
    }
    return child;
}

Genome natural_mutation(const Genome& parent, Rng& rng, double rate) {
    if (parent.size() == 0) throw DomainError("natural_mutation: empty genome");
    Genome child = parent;
    for (auto& c : child.cells)
        if (rng.uniform01() < rate) c = static_cast<std::uint32_t>(rng.uniform_index(kNumOperators));
    if (child == parent) {
        const std::size_t pos = rng.uniform_index(child.size());
        auto idx = static_cast<std::uint32_t>(rng.uniform_index(kNumOperators - 1));
        if (idx >= parent[pos]) ++idx;
        child[pos] = idx;
    }
    return child;
}

Genome prior_mutation(const Genome& parent, Rng& rng) {
    if (parent.size() == 0) throw DomainError("prior_mutation: empty genome");
    const std::uint32_t cell = parent[rng.uniform_index(parent.size())];
    Genome child = parent;
    std::fill(child.cells.begin(), child.cells.end(), cell);
    return child;
}

RouletteWeights roulette_weights(std::span<const double> costs, double epsilon) {
    if (costs.empty()) throw DomainError("roulette_weights: empty cost table");
    if (!(epsilon > 0.0)) throw DomainError("roulette_weights: epsilon must be positive");
    double cmax = 0.0;
    for (double c : costs) {
        if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("roulette_weights: costs must be positive");
        cmax = std::max(cmax, c);
    }
    const double log_max = std::log10(cmax);
    RouletteWeights w;
    w.epsilon = epsilon;
    w.weights.reserve(costs.size());
    double total = 0.0;
    for (double c : costs) {
        w.weights.push_back(log_max - std::log10(c) + epsilon);
        total += w.weights.back();
    }
    for (double& v : w.weights) v /= total;
    return w;
}

RouletteTables RouletteTables::for_space(const SpaceConfig& cfg, double epsilon) {
    std::vector<double> madds(kNumOperators), params(kNumOperators);
    for (std::uint32_t i = 0; i < kNumOperators; ++i) {
        const ConvCost c = cell_cost(i, cfg);
        madds[i] = static_cast<double>(c.multi_adds);
        params[i] = static_cast<double>(c.params);
    }
    return RouletteTables{{roulette_weights(madds, epsilon), roulette_weights(params, epsilon)}};
}

Genome roulette_genome(const RouletteWeights& weights, std::size_t n, Rng& rng) {
    Genome g;
    g.cells.reserve(n);
    for (std::size_t i = 0; i < n; ++i) g.cells.push_back(static_cast<std::uint32_t>(rng.categorical(weights.weights)));
    return g;
}

Genome roulette_genome(const RouletteTables& tables, std::size_t n, Rng& rng) {
    const std::size_t which = rng.uniform_index(tables.tables.size());
    return roulette_genome(tables.tables[which], n, rng);
}

MutationOutcome hierarchical_mutate(const Genome& parent, const MutationProbabilities& probs,
                                    const MutationContext& ctx, Rng& rng) {
    const double u = rng.uniform01();
    if (u < probs.p_rm) return {natural_mutation(parent, rng), Provenance::NaturalMut, std::nullopt};
    if (u < probs.p_rm + probs.p_re) {
        if (rng.uniform01() < probs.p_m) {
            if (!ctx.controller) throw DomainError("hierarchical_mutate: controller branch without a controller");
            Episode ep = ctx.controller->sample(rng);
            if (ep.actions.size() != parent.size())
                throw DomainError("hierarchical_mutate: controller steps differ from genome length");
            Genome child = ep.genome();
            return {std::move(child), Provenance::ReinforcedMut, std::move(ep)};
        }
        if (!ctx.roulette) throw DomainError("hierarchical_mutate: roulette branch without weight tables");
        return {roulette_genome(*ctx.roulette, parent.size(), rng), Provenance::RouletteMut, std::nullopt};
    }
    return {prior_mutation(parent, rng), Provenance::PriorMut, std::nullopt};
}

}  // namespace cellnas
