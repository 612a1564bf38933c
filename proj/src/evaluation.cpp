#include "cellnas/evaluation.hpp"

#include <cmath>
#include <map>
#include <thread>

#include "cellnas/errors.hpp"

namespace cellnas {

double mse_from_psnr(double psnr) { return std::pow(10.0, -psnr / 10.0); }

double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) throw DomainError("psnr_from_mse: mse must be positive");
    return -10.0 * std::log10(mse);
}

EvalResult unmeasured_result(const CostReport& cost, EvalSource source) {
    EvalResult r;
    r.psnr = 0.0;
    r.mse = 1.0;
    r.multi_adds = cost.multi_adds;
    r.params = cost.params;
    r.source = source;
    r.quality_measured = false;
    return r;
}

void SurrogateConfig::validate() const {
    if (param_gain < 0 || madds_gain < 0 || skip_bonus < 0 || k3_bonus < 0 || noise_amp < 0)
        throw ConfigError("surrogate gains must be >= 0");
    if (!(param_scale > 0) || !(madds_scale > 0)) throw ConfigError("surrogate scales must be > 0");
}

double surrogate_psnr(const Genome& genome, const SpaceConfig& space, const SurrogateConfig& s) {
    const CostReport cost = cost_of(genome, space);
    const double p = static_cast<double>(cost.params);
    const double f = static_cast<double>(cost.multi_adds);
    double skip = 0.0, k3 = 0.0;
    for (std::uint32_t idx : genome.cells) {
        const OperatorDescriptor op = decode_operator(idx);
        if (op.skip) skip += 1.0;
        if (op.kernel == 3) k3 += 1.0;
    }
    const double n = static_cast<double>(genome.size());
    const double noise = static_cast<double>(fnv1a(genome) % 1000) / 1000.0 - 0.5;
    return s.base + s.param_gain * (1.0 - std::exp(-p / s.param_scale)) +
           s.madds_gain * (1.0 - std::exp(-f / s.madds_scale)) + s.skip_bonus * (skip / n) + s.k3_bonus * (k3 / n) +
           s.noise_amp * noise;
}

EvalResult SurrogateEvaluator::evaluate(const Genome& genome) {
    const CostReport cost = cost_of(genome, space_);
    EvalResult r;
    r.psnr = surrogate_psnr(genome, space_, scfg_);
    r.mse = mse_from_psnr(r.psnr);
    r.multi_adds = cost.multi_adds;
    r.params = cost.params;
    r.source = EvalSource::Surrogate;
    return r;
}

std::optional<EvalResult> EvalCache::find(const Genome& g) const {
    std::lock_guard lock(mu_);
    auto it = done_.find(g);
    if (it == done_.end()) return std::nullopt;
    return it->second;
}

void EvalCache::insert(const Genome& g, const EvalResult& r) {
    if (!r.quality_measured) return;
    std::lock_guard lock(mu_);
    done_.insert_or_assign(g, r);
}

EvalResult EvalCache::get_or_compute(const Genome& g, const std::function<EvalResult()>& compute) {
    std::promise<EvalResult> promise;
    std::shared_future<EvalResult> waiting;
    {
        std::lock_guard lock(mu_);
        if (auto it = done_.find(g); it != done_.end()) {
            ++hits_;
            EvalResult r = it->second;
            r.source = EvalSource::Cache;
            return r;
        }
        if (auto it = inflight_.find(g); it != inflight_.end()) {
            waiting = it->second;
        } else {
            inflight_.emplace(g, promise.get_future().share());
        }
    }
    if (waiting.valid()) {
        EvalResult r = waiting.get();  // rethrows the computing caller's failure
        ++hits_;
        r.source = EvalSource::Cache;
        return r;
    }
    ++misses_;
    try {
        EvalResult r = compute();
        std::lock_guard lock(mu_);
        if (r.quality_measured) done_.insert_or_assign(g, r);
        inflight_.erase(g);
        promise.set_value(r);
        return r;
    } catch (...) {
        {
            std::lock_guard lock(mu_);
            inflight_.erase(g);
        }
        promise.set_exception(std::current_exception());
        throw;
    }
}

std::size_t EvalCache::size() const {
    std::lock_guard lock(mu_);
    return done_.size();
}

void EvalCache::clear() {
    std::lock_guard lock(mu_);
    done_.clear();
    hits_ = 0;
    misses_ = 0;
}

EvalResult cached_evaluate(const Genome& genome, EvalCache& cache, Evaluator& backend) {
    return cache.get_or_compute(genome, [&] { return backend.evaluate(genome); });
}

std::vector<EvalResult> dispatch_generation(std::span<const Genome> genomes, std::size_t workers,
                                            Evaluator& backend, EvalCache* cache, DispatchStats* stats) {
    if (workers < 1) throw DomainError("dispatch_generation: workers must be >= 1");
    std::vector<EvalResult> results(genomes.size());
    // Slot i is either computed (jobs) or copied from an earlier slot / the cache.
    std::vector<std::size_t> jobs;
    std::vector<std::optional<std::size_t>> copy_from(genomes.size());
    std::map<Genome, std::size_t> first_seen;
    DispatchStats local;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        if (cache) {
            if (auto hit = cache->find(genomes[i])) {
                results[i] = *hit;
                results[i].source = EvalSource::Cache;
                ++local.cache_hits;
                continue;
            }
        }
        auto [it, inserted] = first_seen.emplace(genomes[i], i);
        if (inserted) {
            jobs.push_back(i);
        } else {
            copy_from[i] = it->second;
        }
    }

    std::vector<std::exception_ptr> errors(genomes.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const std::size_t i = jobs[j];
            for (int attempt = 0; attempt < 2; ++attempt) {
                try {
                    results[i] = backend.evaluate(genomes[i]);
                    errors[i] = nullptr;
                    break;
                } catch (const EvaluationError&) {
                    errors[i] = std::current_exception();
                }
            }
        }
    };
    const std::size_t threads = std::min(workers, jobs.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    local.backend_calls = jobs.size();

    std::vector<std::vector<std::uint32_t>> failed;
    std::string first_message;
    for (std::size_t i : jobs) {
        if (!errors[i]) continue;
        failed.push_back(genomes[i].cells);
        if (first_message.empty()) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                first_message = e.what();
            }
        }
    }
    if (!failed.empty())
        throw GenerationError(std::to_string(failed.size()) + " genome(s) failed evaluation: " + first_message,
                              std::move(failed));

    for (std::size_t i : jobs)
        if (cache) cache->insert(genomes[i], results[i]);
    for (std::size_t i = 0; i < genomes.size(); ++i) {
        if (!copy_from[i]) continue;
        results[i] = results[*copy_from[i]];
        // An unmeasured result is not a cache entry; the duplicate shares it as-is.
        if (results[i].quality_measured) {
            results[i].source = EvalSource::Cache;
            ++local.cache_hits;
        }
    }
    if (stats) {
        stats->backend_calls += local.backend_calls;
        stats->cache_hits += local.cache_hits;
    }
    return results;
}

}  // namespace cellnas
