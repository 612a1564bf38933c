#include "cellnas/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cellnas/errors.hpp"

namespace cellnas {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

FrontRow row_of(const Individual& ind, bool flagged) {
    FrontRow r;
    r.genome = ind.genome;
    r.arch = describe(ind.genome);
    r.psnr = ind.quality_measured ? -ind.objectives[0] : 0.0;
    r.multi_adds = static_cast<std::uint64_t>(ind.objectives[1]);
    r.params = static_cast<std::uint64_t>(ind.objectives[2]);
    r.violation = ind.violation;
    r.flagged = flagged;
    return r;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

}  // namespace

std::vector<FrontRow> front_rows(const SearchState& state) {
    std::vector<FrontRow> rows;
    for (const Individual& ind : feasible_front(state.population)) rows.push_back(row_of(ind, false));
    if (!rows.empty() || state.population.empty()) return rows;

    double least = kInf;
    for (const Individual& ind : state.population) least = std::min(least, ind.violation);
    std::set<Genome> seen;
    for (const Individual& ind : state.population)
        if (ind.violation == least && seen.insert(ind.genome).second) rows.push_back(row_of(ind, true));
    std::sort(rows.begin(), rows.end(), [](const FrontRow& a, const FrontRow& b) {
        if (a.multi_adds != b.multi_adds) return a.multi_adds < b.multi_adds;
        return a.genome < b.genome;
    });
    return rows;
}

std::string front_csv(const std::vector<FrontRow>& rows) {
    std::string s = "genome,arch,psnr,multi_adds,params,violation,flagged\n";
    for (const FrontRow& r : rows) {
        s += '"' + to_text(r.genome) + "\",";
        s += r.arch + ',';
        s += num(r.psnr) + ',';
        s += std::to_string(r.multi_adds) + ',';
        s += std::to_string(r.params) + ',';
        s += num(r.violation) + ',';
        s += r.flagged ? "1\n" : "0\n";
    }
    return s;
}

std::vector<FrontRow> parse_front_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("genome,", 0) != 0) throw DomainError("front csv: missing header");
    std::vector<FrontRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 7) throw DomainError("front csv: expected 7 fields");
        FrontRow r;
        r.genome = parse_genome(f[0]);
        r.arch = f[1];
        r.psnr = std::stod(f[2]);
        r.multi_adds = std::stoull(f[3]);
        r.params = std::stoull(f[4]);
        r.violation = std::stod(f[5]);
        r.flagged = f[6] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

nlohmann::json front_json(const std::vector<FrontRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FrontRow& r : rows)
        arr.push_back({{"genome", to_text(r.genome)},
                       {"cells", r.genome.cells},
                       {"arch", r.arch},
                       {"psnr", r.psnr},
                       {"multi_adds", r.multi_adds},
                       {"params", r.params},
                       {"violation", r.violation},
                       {"flagged", r.flagged}});
    return arr;
}

std::string history_csv(const SearchState& state) {
    std::string s = "generation,best_psnr,median_psnr,front_size,feasible\n";
    for (const GenerationStats& h : state.history)
        s += std::to_string(h.generation) + ',' + num(h.best_psnr) + ',' + num(h.median_psnr) + ',' +
             std::to_string(h.front_size) + ',' + std::to_string(h.feasible) + '\n';
    return s;
}

std::array<double, 3> hv_reference(const SearchState& state) {
    if (state.config.hv_reference) return *state.config.hv_reference;
    const ConstraintBounds& b = state.config.bounds;
    std::array<std::optional<double>, 3> ref = {
        b.psnr_min ? std::optional<double>(-*b.psnr_min) : std::nullopt, b.flops_max, b.params_max};
    std::array<double, 3> worst = {-kInf, -kInf, -kInf};
    for (const ArchiveEntry& e : state.archive) {
        worst[0] = std::max(worst[0], -e.psnr);
        worst[1] = std::max(worst[1], static_cast<double>(e.multi_adds));
        worst[2] = std::max(worst[2], static_cast<double>(e.params));
    }
    std::array<double, 3> out{};
    for (std::size_t k = 0; k < 3; ++k) {
        if (ref[k]) {
            out[k] = *ref[k];
        } else if (std::isfinite(worst[k])) {
            const double pad = 0.1 * std::abs(worst[k]);
            out[k] = worst[k] + (pad > 0.0 ? pad : 1.0);
        } else {
            out[k] = 0.0;
        }
    }
    return out;
}

std::vector<HypervolumePoint> hypervolume_series(const SearchState& state, const std::array<double, 3>& ref) {
    std::uint32_t last = state.generation;
    for (const ArchiveEntry& e : state.archive) last = std::max(last, e.generation);
    std::vector<HypervolumePoint> series;
    std::vector<std::vector<double>> pts;
    for (std::uint32_t g = 0; g <= last; ++g) {
        for (const ArchiveEntry& e : state.archive) {
            if (e.generation != g || e.violation != 0.0) continue;
            std::vector<double> p = {-e.psnr, static_cast<double>(e.multi_adds), static_cast<double>(e.params)};
            if (p[0] <= ref[0] && p[1] <= ref[1] && p[2] <= ref[2]) pts.push_back(std::move(p));
        }
        series.push_back({g, hypervolume(pts, ref), pts.size()});
    }
    return series;
}

std::string hypervolume_csv(const std::vector<HypervolumePoint>& series, const std::array<double, 3>& ref) {
    std::string s = "# reference " + num(ref[0]) + " " + num(ref[1]) + " " + num(ref[2]) + "\n";
    s += "generation,hypervolume,points\n";
    for (const auto& p : series)
        s += std::to_string(p.generation) + ',' + num(p.hypervolume) + ',' + std::to_string(p.points) + '\n';
    return s;
}

std::string front_svg(const std::vector<FrontRow>& rows) {
    constexpr double W = 640, H = 480, M = 60;
    double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf, pmax = 1.0;
    for (const FrontRow& r : rows) {
        const double x = static_cast<double>(r.multi_adds) / 1e9;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, r.psnr);
        ymax = std::max(ymax, r.psnr);
        pmax = std::max(pmax, static_cast<double>(r.params));
    }
    if (rows.empty()) xmin = ymin = 0, xmax = ymax = 1;
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto sx = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
    auto sy = [&](double y) { return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">multi-adds (G)</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
       << ")\" text-anchor=\"middle\">PSNR (dB)</text>\n";
    os << "<text x=\"" << M << "\" y=\"" << H - M + 15 << "\" font-size=\"10\">" << num(xmin).substr(0, 8)
       << "</text>\n";
    os << "<text x=\"" << W - M << "\" y=\"" << H - M + 15 << "\" font-size=\"10\" text-anchor=\"end\">"
       << num(xmax).substr(0, 8) << "</text>\n";
    os << "<text x=\"" << M - 5 << "\" y=\"" << H - M << "\" font-size=\"10\" text-anchor=\"end\">"
       << num(ymin).substr(0, 6) << "</text>\n";
    os << "<text x=\"" << M - 5 << "\" y=\"" << M << "\" font-size=\"10\" text-anchor=\"end\">"
       << num(ymax).substr(0, 6) << "</text>\n";
    for (const FrontRow& r : rows) {
        const double radius = 3.0 + 12.0 * std::sqrt(static_cast<double>(r.params) / pmax);
        os << "<circle cx=\"" << sx(static_cast<double>(r.multi_adds) / 1e9) << "\" cy=\"" << sy(r.psnr)
           << "\" r=\"" << radius << "\" fill=\"" << (r.flagged ? "gray" : "steelblue")
           << "\" fill-opacity=\"0.6\"><title>" << to_text(r.genome) << "</title></circle>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::string> write_report(const SearchState& state, ReportKind what, const std::string& out_dir,
                                      bool svg) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    auto emit = [&](const std::string& name, const std::string& text) {
        const fs::path p = fs::path(out_dir) / name;
        write_file(p, text);
        files.push_back(p.string());
    };
    switch (what) {
        case ReportKind::Front: {
            const auto rows = front_rows(state);
            emit("front.csv", front_csv(rows));
            emit("front.json", front_json(rows).dump(2) + "\n");
            if (svg) emit("front.svg", front_svg(rows));
            break;
        }
        case ReportKind::History: emit("history.csv", history_csv(state)); break;
        case ReportKind::Hypervolume: {
            const auto ref = hv_reference(state);
            emit("hypervolume.csv", hypervolume_csv(hypervolume_series(state, ref), ref));
            break;
        }
    }
    return files;
}

}  // namespace cellnas
