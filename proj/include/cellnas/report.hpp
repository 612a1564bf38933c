#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellnas/pipeline.hpp"

namespace cellnas {

struct FrontRow {
    Genome genome;
    std::string arch;
    double psnr = 0.0;
    std::uint64_t multi_adds = 0;
    std::uint64_t params = 0;
    double violation = 0.0;
    /// True when no feasible individual existed and the row is a least-violating fallback.
    bool flagged = false;

    friend bool operator==(const FrontRow&, const FrontRow&) = default;
};

/// Feasible non-dominated members of the final population, or the
/// least-violating individuals (flagged) when none is feasible.
std::vector<FrontRow> front_rows(const SearchState& state);

std::string front_csv(const std::vector<FrontRow>& rows);
std::vector<FrontRow> parse_front_csv(const std::string& text);
nlohmann::json front_json(const std::vector<FrontRow>& rows);

std::string history_csv(const SearchState& state);

/// Configured reference, else (-psnr_min, flops_max, params_max) from the
/// bounds, with any absent coordinate taken as the archive-wide worst value
/// pushed out by 10% of its magnitude.
std::array<double, 3> hv_reference(const SearchState& state);

struct HypervolumePoint {
    std::uint32_t generation;
    double hypervolume;
    std::size_t points;
};

/// Hypervolume of the feasible archive entries evaluated up to each generation.
std::vector<HypervolumePoint> hypervolume_series(const SearchState& state, const std::array<double, 3>& ref);
std::string hypervolume_csv(const std::vector<HypervolumePoint>& series, const std::array<double, 3>& ref);

/// Scatter of psnr against multi-adds with marker area proportional to params.
std::string front_svg(const std::vector<FrontRow>& rows);

enum class ReportKind { Front, History, Hypervolume };

/// Writes the report files into out_dir and returns their paths.
std::vector<std::string> write_report(const SearchState& state, ReportKind what, const std::string& out_dir,
                                      bool svg = false);

}  // namespace cellnas
