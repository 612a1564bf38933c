#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cellnas/pipeline.hpp"
#include "cellnas/report.hpp"

using namespace cellnas;
namespace fs = std::filesystem;

namespace {

SearchState finished_run(std::optional<double> psnr_min) {
    SearchConfig c;
    c.seed = 3;
    c.population = 10;
    c.generations = 4;
    c.workers = 2;
    c.embed_dim = 6;
    c.hidden_dim = 8;
    c.bounds.psnr_min = psnr_min;
    return run_search(c);
}

}  // namespace

TEST_CASE("front csv round trip") {
    const SearchState s = finished_run(27.0);
    const auto rows = front_rows(s);
    REQUIRE_FALSE(rows.empty());
    for (const auto& r : rows) {
        CHECK_FALSE(r.flagged);
        CHECK(r.violation == 0.0);
        CHECK(r.arch == describe(r.genome));
    }
    CHECK(parse_front_csv(front_csv(rows)) == rows);
    const auto j = front_json(rows);
    CHECK(j.size() == rows.size());
    CHECK(j[0]["cells"].get<std::vector<std::uint32_t>>() == rows[0].genome.cells);
    CHECK_THROWS(parse_front_csv("nope\n"));
}

TEST_CASE("infeasible runs report flagged least-violating rows") {
    const SearchState s = finished_run(60.0);
    const auto rows = front_rows(s);
    REQUIRE_FALSE(rows.empty());
    double least = 1e300;
    for (const auto& ind : s.population) least = std::min(least, ind.violation);
    for (const auto& r : rows) {
        CHECK(r.flagged);
        CHECK(r.violation == least);
    }
}

TEST_CASE("hypervolume reference and series") {
    SearchState s = finished_run(27.0);
    auto ref = hv_reference(s);
    CHECK(ref[0] == -27.0);
    double worst_madds = 0, worst_params = 0;
    for (const auto& e : s.archive) {
        worst_madds = std::max(worst_madds, static_cast<double>(e.multi_adds));
        worst_params = std::max(worst_params, static_cast<double>(e.params));
    }
    CHECK(ref[1] == doctest::Approx(1.1 * worst_madds));
    CHECK(ref[2] == doctest::Approx(1.1 * worst_params));

    const auto series = hypervolume_series(s, ref);
    REQUIRE(series.size() == 5);
    for (std::size_t i = 1; i < series.size(); ++i) {
        CHECK(series[i].hypervolume >= series[i - 1].hypervolume);
        CHECK(series[i].points >= series[i - 1].points);
    }
    CHECK(series.back().hypervolume > 0.0);

    s.config.hv_reference = std::array<double, 3>{-1.0, 2.0, 3.0};
    CHECK(hv_reference(s) == std::array<double, 3>{-1.0, 2.0, 3.0});

    // Without a psnr bound the worst measured psnr is pushed out by 10%.
    const SearchState open = finished_run(std::nullopt);
    double worst = -1e300;
    for (const auto& e : open.archive) worst = std::max(worst, -e.psnr);
    CHECK(hv_reference(open)[0] == doctest::Approx(worst + 0.1 * std::abs(worst)));
}

TEST_CASE("report files") {
    const SearchState s = finished_run(27.0);
    const fs::path dir = fs::temp_directory_path() / "cellnas_test_report";
    fs::remove_all(dir);
    const auto front = write_report(s, ReportKind::Front, dir.string(), true);
    CHECK(front.size() == 3);
    for (const auto& f : front) CHECK(fs::file_size(f) > 0);
    std::ifstream svg(dir / "front.svg");
    std::string first;
    std::getline(svg, first);
    CHECK(first.rfind("<svg", 0) == 0);

    write_report(s, ReportKind::History, dir.string());
    std::ifstream hist(dir / "history.csv");
    int lines = 0;
    for (std::string l; std::getline(hist, l);) ++lines;
    CHECK(lines == 1 + 5);

    write_report(s, ReportKind::Hypervolume, dir.string());
    CHECK(fs::exists(dir / "hypervolume.csv"));
}
