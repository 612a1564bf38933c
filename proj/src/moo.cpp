#include "cellnas/moo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellnas/errors.hpp"

namespace cellnas {

void ConstraintBounds::validate() const {
    auto check = [](const std::optional<double>& lo, const std::optional<double>& hi, const char* name) {
        if ((lo && !std::isfinite(*lo)) || (hi && !std::isfinite(*hi)))
            throw ConfigError(std::string("bounds.") + name + " must be finite when present");
        if (lo && hi && *lo > *hi) throw ConfigError(std::string("bounds.") + name + ": min > max");
    };
    check(psnr_min, psnr_max, "psnr");
    check(flops_min, flops_max, "flops");
    check(params_min, params_max, "params");
}

double bound_violation(double value, std::optional<double> lo, std::optional<double> hi) {
    auto normalized = [](double excess, double bound) {
        const double mag = std::abs(bound);
        return mag > 0.0 ? excess / mag : excess;
    };
    double v = 0.0;
    if (lo && value < *lo) v += normalized(*lo - value, *lo);
    if (hi && value > *hi) v += normalized(value - *hi, *hi);
    return v;
}

double cheap_violation(const ConstraintBounds& b, double multi_adds, double params) {
    return bound_violation(multi_adds, b.flops_min, b.flops_max) + bound_violation(params, b.params_min, b.params_max);
}

double total_violation(const ConstraintBounds& b, std::optional<double> psnr, double multi_adds, double params) {
    return bound_violation(psnr.value_or(0.0), b.psnr_min, b.psnr_max) + cheap_violation(b, multi_adds, params);
}

std::string_view provenance_label(Provenance p) {
    switch (p) {
        case Provenance::Init: return "init";
        case Provenance::Crossover: return "crossover";
        case Provenance::NaturalMut: return "natural";
        case Provenance::ReinforcedMut: return "reinforced";
        case Provenance::RouletteMut: return "roulette";
        case Provenance::PriorMut: return "prior";
    }
    return "?";
}

Provenance parse_provenance(std::string_view s) {
    for (auto p : {Provenance::Init, Provenance::Crossover, Provenance::NaturalMut, Provenance::ReinforcedMut,
                   Provenance::RouletteMut, Provenance::PriorMut})
        if (provenance_label(p) == s) return p;
    throw DomainError("unknown provenance '" + std::string(s) + "'");
}

bool dominates(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("dominates: objective vectors differ in length");
    bool strictly = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] > b[k]) return false;
        if (a[k] < b[k]) strictly = true;
    }
    return strictly;
}

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) { return dominates(a.values, b.values); }

bool constrained_dominates(const Individual& a, const Individual& b) {
    const bool fa = a.feasible(), fb = b.feasible();
    if (fa && !fb) return true;
    if (!fa && fb) return false;
    if (!fa && !fb) return a.violation < b.violation;
    return dominates(a.objectives, b.objectives);
}

Fronts fast_nondominated_sort(std::vector<Individual>& pop) {
    if (pop.empty()) throw DomainError("fast_nondominated_sort: empty population");
    const std::size_t n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> dom_count(n, 0);
    Fronts fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (constrained_dominates(pop[p], pop[q])) {
                dominated[p].push_back(q);
                ++dom_count[q];
            } else if (constrained_dominates(pop[q], pop[p])) {
                dominated[q].push_back(p);
                ++dom_count[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p)
        if (dom_count[p] == 0) fronts[0].push_back(p);
    for (std::size_t k = 0; !fronts[k].empty(); ++k) {
        std::vector<std::size_t> next;
        for (std::size_t p : fronts[k]) {
            pop[p].rank = static_cast<int>(k);
            for (std::size_t q : dominated[p])
                if (--dom_count[q] == 0) next.push_back(q);
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<Individual>& pop, std::span<const std::size_t> members) {
    const std::size_t m = members.size();
    std::vector<double> dist(m, 0.0);
    if (m == 0) return dist;
    const std::size_t k_count = pop[members[0]].objectives.size();
    std::vector<std::size_t> order(m);
    for (std::size_t k = 0; k < k_count; ++k) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const Individual& ia = pop[members[a]];
            const Individual& ib = pop[members[b]];
            if (ia.objectives[k] != ib.objectives[k]) return ia.objectives[k] < ib.objectives[k];
            if (ia.genome != ib.genome) return ia.genome < ib.genome;
            return a < b;
        });
        const double lo = pop[members[order.front()]].objectives[k];
        const double hi = pop[members[order.back()]].objectives[k];
        const double span = hi - lo;
        for (std::size_t j = 0; j + 1 < m; ++j) {
            if (span > 0.0) {
                const double gap = pop[members[order[j + 1]]].objectives[k] - pop[members[order[j]]].objectives[k];
                dist[order[j]] += gap / span;
            }
        }
        dist[order.back()] = kInf;
    }
    return dist;
}

std::vector<double> crowding_distance(const std::vector<Individual>& front) {
    std::vector<std::size_t> members(front.size());
    std::iota(members.begin(), members.end(), std::size_t{0});
    return crowding_distance(front, members);
}

std::vector<Individual> environmental_selection(std::vector<Individual> pool, std::size_t n) {
    if (pool.size() < n) throw DomainError("environmental_selection: pool smaller than target size");
    if (n == 0) return {};
    const Fronts fronts = fast_nondominated_sort(pool);
    for (const auto& front : fronts) {
        const auto dist = crowding_distance(pool, front);
        for (std::size_t j = 0; j < front.size(); ++j) pool[front[j]].crowding = dist[j];
    }
    std::vector<Individual> survivors;
    survivors.reserve(n);
    for (const auto& front : fronts) {
        std::vector<std::size_t> members = front;
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            if (pool[a].crowding != pool[b].crowding) return pool[a].crowding > pool[b].crowding;
            return pool[a].genome < pool[b].genome;
        });
        for (std::size_t idx : members) {
            if (survivors.size() == n) break;
            survivors.push_back(pool[idx]);
        }
        if (survivors.size() == n) break;
    }
    return survivors;
}

bool tournament_better(const Individual& a, const Individual& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.crowding != b.crowding) return a.crowding > b.crowding;
    return a.genome < b.genome;
}

const Individual& binary_tournament(std::span<const Individual> pop, Rng& rng) {
    if (pop.empty()) throw DomainError("binary_tournament: empty population");
    if (pop.size() == 1) return pop[0];
    const std::size_t i = rng.uniform_index(pop.size());
    std::size_t j = rng.uniform_index(pop.size() - 1);
    if (j >= i) ++j;
    // Prefer i on full ties so the outcome is a function of the draw.
    return tournament_better(pop[j], pop[i]) ? pop[j] : pop[i];
}

namespace {

double area_2d(std::vector<std::pair<double, double>> pts, double ref_x, double ref_y) {
    std::sort(pts.begin(), pts.end());
    double area = 0.0;
    double prev_y = ref_y;
    for (const auto& [x, y] : pts) {
        if (y < prev_y) {
            area += (ref_x - x) * (prev_y - y);
            prev_y = y;
        }
    }
    return area;
}

double hypervolume_nd(const std::vector<std::vector<double>>& points, std::span<const double> ref) {
    const std::size_t k = ref.size();
    if (k == 1) {
        double best = ref[0];
        for (const auto& p : points) best = std::min(best, p[0]);
        return ref[0] - best;
    }
    if (k == 2) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : points) pts.emplace_back(p[0], p[1]);
        return area_2d(std::move(pts), ref[0], ref[1]);
    }
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a][2] < points[b][2]; });
    double volume = 0.0;
    std::vector<std::pair<double, double>> slab;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& p = points[order[i]];
        slab.emplace_back(p[0], p[1]);
        const double z_next = (i + 1 < order.size()) ? points[order[i + 1]][2] : ref[2];
        const double depth = z_next - p[2];
        if (depth > 0.0) volume += area_2d(slab, ref[0], ref[1]) * depth;
    }
    return volume;
}

}  // namespace

double hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> ref) {
    const std::size_t k = ref.size();
    if (k == 0 || k > 3) throw DomainError("hypervolume: supports 1 to 3 objectives");
    for (const auto& p : points) {
        if (p.size() != k) throw DomainError("hypervolume: point dimension mismatch");
        for (std::size_t d = 0; d < k; ++d)
            if (p[d] > ref[d]) throw DomainError("hypervolume: point worse than reference");
    }
    if (points.empty()) return 0.0;
    // Keep one copy of each non-dominated point. Dominated points add nothing,
    // and leaving them in would only perturb the rounding of the sum.
    std::vector<std::vector<double>> kept(points.begin(), points.end());
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    std::vector<std::vector<double>> nd;
    for (const auto& p : kept) {
        bool dominated = false;
        for (const auto& q : kept)
            if (dominates(std::span<const double>(q), std::span<const double>(p))) {
                dominated = true;
                break;
            }
        if (!dominated) nd.push_back(p);
    }
    return hypervolume_nd(nd, ref);
}


double hypervolume(std::span<const ObjectiveVector> front, const ObjectiveVector& ref) {
    std::vector<std::vector<double>> pts;
    pts.reserve(front.size());
    for (const auto& f : front) pts.push_back(f.values);
    return hypervolume(pts, ref.values);
}

}  // namespace cellnas
