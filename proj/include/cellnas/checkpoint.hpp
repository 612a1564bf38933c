#pragma once

#include <string>

#include <json.hpp>

#include "cellnas/pipeline.hpp"

namespace cellnas {

inline constexpr int kCheckpointVersion = 1;

/// Doubles are written as 16-digit hex bit patterns so a load/save cycle is
/// bit-exact. The rng state and the config echo carry FNV-1a checksums.
nlohmann::json checkpoint_to_json(const SearchState& state);
SearchState checkpoint_from_json(const nlohmann::json& j);

std::string encode_double(double v);
double decode_double(const std::string& hex);

/// Writes atomically (temp file + rename).
void save_checkpoint(const SearchState& state, const std::string& path);
SearchState load_checkpoint(const std::string& path);

}  // namespace cellnas
