#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cellnas/search_space.hpp"

namespace cellnas {

enum class EvalSource : std::uint8_t { Surrogate, External, Cache };

/// Objective triple for one genome. psnr and mse are tied by mse = 10^(-psnr/10)
/// (unit peak). When quality_measured is false the evaluator produced no score
/// (timeout) and psnr/mse hold 0 dB / 1.0.
struct EvalResult {
    double psnr = 0.0;
    double mse = 1.0;
    std::uint64_t multi_adds = 0;
    std::uint64_t params = 0;
    EvalSource source = EvalSource::Surrogate;
    bool quality_measured = true;

    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

double mse_from_psnr(double psnr);
double psnr_from_mse(double mse);

/// Result for a genome whose quality was never measured.
EvalResult unmeasured_result(const CostReport& cost, EvalSource source);

class Evaluator {
public:
    virtual ~Evaluator() = default;
    /// Throws EvaluationError on a retryable backend failure.
    virtual EvalResult evaluate(const Genome& genome) = 0;
};

struct SurrogateConfig {
    double base = 27.0;
    double param_gain = 5.0;
    double param_scale = 5e5;
    double madds_gain = 2.0;
    double madds_scale = 3e11;
    double skip_bonus = 0.3;
    double k3_bonus = 0.1;
    double noise_amp = 0.2;

    void validate() const;
    friend bool operator==(const SurrogateConfig&, const SurrogateConfig&) = default;
};

/// Deterministic pseudo-PSNR: saturating gains in params and multi-adds, small
/// bonuses for skip and 3x3 cells, and bounded noise from the genome's FNV-1a hash.
double surrogate_psnr(const Genome& genome, const SpaceConfig& space, const SurrogateConfig& scfg);

class SurrogateEvaluator final : public Evaluator {
public:
    SurrogateEvaluator(SpaceConfig space, SurrogateConfig scfg) : space_(space), scfg_(scfg) {}
    EvalResult evaluate(const Genome& genome) override;

private:
    SpaceConfig space_;
    SurrogateConfig scfg_;
};

/// Genome-keyed store of measured results, safe for concurrent use.
class EvalCache {
public:
    std::optional<EvalResult> find(const Genome& g) const;
    void insert(const Genome& g, const EvalResult& r);

    /// Returns the stored result (source = Cache) or runs `compute` exactly once
    /// per genome even under concurrent callers. Failures and unmeasured results
    /// are not stored.
    EvalResult get_or_compute(const Genome& g, const std::function<EvalResult()>& compute);

    std::size_t size() const;
    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t misses() const noexcept { return misses_.load(); }
    void clear();

private:
    mutable std::mutex mu_;
    std::unordered_map<Genome, EvalResult, GenomeHash> done_;
    std::unordered_map<Genome, std::shared_future<EvalResult>, GenomeHash> inflight_;
    std::atomic<std::uint64_t> hits_{0}, misses_{0};
};

EvalResult cached_evaluate(const Genome& genome, EvalCache& cache, Evaluator& backend);

struct DispatchStats {
    std::uint64_t backend_calls = 0;
    std::uint64_t cache_hits = 0;
};

/// Evaluates genomes with at most `workers` concurrent backend calls. Results
/// follow input order. Genomes already cached, or repeated earlier in the list,
/// are served from the cache; which copy is computed depends only on list order.
/// Each failing genome is retried once; remaining failures raise GenerationError.
std::vector<EvalResult> dispatch_generation(std::span<const Genome> genomes, std::size_t workers,
                                            Evaluator& backend, EvalCache* cache = nullptr,
                                            DispatchStats* stats = nullptr);

}  // namespace cellnas
