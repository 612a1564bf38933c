#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "cellnas/controller.hpp"
#include "cellnas/evaluation.hpp"
#include "cellnas/external_evaluator.hpp"
#include "cellnas/genetic_ops.hpp"
#include "cellnas/moo.hpp"
#include "cellnas/search_space.hpp"

namespace cellnas {

enum class BackendKind : std::uint8_t { Surrogate, External };

struct BackendConfig {
    BackendKind kind = BackendKind::Surrogate;
    ExternalEndpoint endpoint;
    friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

struct SearchConfig {
    std::uint64_t seed = 0;
    std::uint32_t population = 56;
    std::uint32_t generations = 200;
    SpaceConfig space;
    ConstraintBounds bounds;
    MutationProbabilities probs;
    double roulette_epsilon = 0.1;
    ReinforceConfig rl;
    std::uint32_t embed_dim = 16;
    std::uint32_t hidden_dim = 64;
    double controller_init_scale = 0.1;
    SurrogateConfig surrogate;
    BackendConfig backend;
    std::uint32_t workers = 8;
    std::uint32_t crossover_k = 1;
    InitMode init_mode = InitMode::RepeatedCell;
    /// Generate and select without calling any evaluator (counter checks).
    bool dry_run = false;
    std::optional<std::array<double, 3>> hv_reference;

    void validate() const;
    ControllerShape controller_shape() const { return {kNumOperators, embed_dim, hidden_dim, space.n}; }
    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// JSON form. `include_workers` is false for the checkpoint echo, since the
/// worker count never affects the trajectory.
nlohmann::json config_to_json(const SearchConfig& cfg, bool include_workers = true);
/// Missing keys keep their defaults; unknown keys and invalid values raise ConfigError.
SearchConfig config_from_json(const nlohmann::json& j);
SearchConfig load_config_file(const std::string& path);

/// CELLNAS_SEED and CELLNAS_WORKERS, when set, replace the corresponding fields.
void apply_env_overrides(SearchConfig& cfg);

}  // namespace cellnas
