#include "cellnas/rng.hpp"

#include <limits>
#include <sstream>

#include "cellnas/errors.hpp"

namespace cellnas {

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    const std::uint64_t range = n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % range);
}

std::size_t Rng::categorical(std::span<const double> weights) {
    if (weights.empty()) throw DomainError("categorical: no weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("categorical: negative or NaN weight");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("categorical: weights sum to zero");
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    // Rounding can leave u == total; pick the last non-zero weight.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return weights.size() - 1;
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    std::mt19937_64 e;
    is >> e;
    if (is.fail()) throw CheckpointError("rng state is malformed");
    engine_ = e;
}

}  // namespace cellnas
