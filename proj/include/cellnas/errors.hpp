#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellnas {

/// Argument outside the domain of an operation (bad index, shape, length).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A backend failed to score a genome. Retryable by the dispatcher.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, std::vector<std::uint32_t> genome)
        : std::runtime_error(what), genome_(std::move(genome)) {}

    const std::vector<std::uint32_t>& genome() const noexcept { return genome_; }

private:
    std::vector<std::uint32_t> genome_;
};

/// Malformed or inconsistent evaluator response.
class ProtocolError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

/// One or more genomes of a generation failed after retries.
class GenerationError : public std::runtime_error {
public:
    GenerationError(const std::string& what, std::vector<std::vector<std::uint32_t>> failed)
        : std::runtime_error(what), failed_(std::move(failed)) {}

    const std::vector<std::vector<std::uint32_t>>& failed() const noexcept { return failed_; }

private:
    std::vector<std::vector<std::uint32_t>> failed_;
};

}  // namespace cellnas
