#include "cellnas/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cellnas/errors.hpp"

namespace cellnas {

namespace {

using nlohmann::json;

std::string fnv_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw CheckpointError(std::string("checkpoint is missing '") + key + "'");
    return j[key];
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint field '") + key + "': " + e.what());
    }
}

double get_double(const json& j, const char* key) { return decode_double(get<std::string>(j, key)); }

json encode_genome(const Genome& g) { return g.cells; }

Genome decode_genome(const json& j, const SpaceConfig& space) {
    Genome g;
    try {
        g.cells = j.get<std::vector<std::uint32_t>>();
        validate_genome(g, space);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("checkpoint genome invalid: ") + e.what());
    }
    return g;
}

json encode_individual(const Individual& ind) {
    json objectives = json::array();
    for (double v : ind.objectives.values) objectives.push_back(encode_double(v));
    return {{"genome", encode_genome(ind.genome)},
            {"objectives", objectives},
            {"m_hard", ind.objectives.m_hard},
            {"measured", ind.quality_measured},
            {"violation", encode_double(ind.violation)},
            {"rank", ind.rank},
            {"crowding", encode_double(ind.crowding)},
            {"provenance", provenance_label(ind.provenance)}};
}

Individual decode_individual(const json& j, const SpaceConfig& space) {
    Individual ind;
    ind.genome = decode_genome(field(j, "genome"), space);
    for (const auto& v : field(j, "objectives")) ind.objectives.values.push_back(decode_double(v.get<std::string>()));
    ind.objectives.m_hard = get<std::uint32_t>(j, "m_hard");
    ind.quality_measured = get<bool>(j, "measured");
    ind.violation = get_double(j, "violation");
    ind.rank = get<int>(j, "rank");
    ind.crowding = get_double(j, "crowding");
    try {
        ind.provenance = parse_provenance(get<std::string>(j, "provenance"));
    } catch (const DomainError& e) {
        throw CheckpointError(e.what());
    }
    return ind;
}

json encode_counters(const Counters& c) {
    return {{"spawned_total", c.spawned_total},
            {"offspring_total", c.offspring_total},
            {"backend_calls", c.backend_calls},
            {"cache_hits", c.cache_hits},
            {"skipped_precheck", c.skipped_precheck},
            {"unmeasured", c.unmeasured},
            {"crossover_only", c.crossover_only},
            {"mutated", c.mutated},
            {"natural", c.natural},
            {"reinforced", c.reinforced},
            {"roulette", c.roulette},
            {"prior", c.prior},
            {"controller_updates", c.controller_updates}};
}

Counters decode_counters(const json& j) {
    Counters c;
    c.spawned_total = get<std::uint64_t>(j, "spawned_total");
    c.offspring_total = get<std::uint64_t>(j, "offspring_total");
    c.backend_calls = get<std::uint64_t>(j, "backend_calls");
    c.cache_hits = get<std::uint64_t>(j, "cache_hits");
    c.skipped_precheck = get<std::uint64_t>(j, "skipped_precheck");
    c.unmeasured = get<std::uint64_t>(j, "unmeasured");
    c.crossover_only = get<std::uint64_t>(j, "crossover_only");
    c.mutated = get<std::uint64_t>(j, "mutated");
    c.natural = get<std::uint64_t>(j, "natural");
    c.reinforced = get<std::uint64_t>(j, "reinforced");
    c.roulette = get<std::uint64_t>(j, "roulette");
    c.prior = get<std::uint64_t>(j, "prior");
    c.controller_updates = get<std::uint64_t>(j, "controller_updates");
    return c;
}

}  // namespace

std::string encode_double(double v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
    return buf;
}

double decode_double(const std::string& hex) {
    std::uint64_t bits = 0;
    auto [p, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), bits, 16);
    if (hex.size() != 16 || ec != std::errc() || p != hex.data() + hex.size())
        throw CheckpointError("bad hex double '" + hex + "'");
    return std::bit_cast<double>(bits);
}

json checkpoint_to_json(const SearchState& s) {
    json j;
    j["format"] = "cellnas-checkpoint";
    j["version"] = kCheckpointVersion;
    const json cfg = config_to_json(s.config, false);
    j["config"] = cfg;
    j["config_hash"] = fnv_hex(cfg.dump());
    j["generation"] = s.generation;
    j["initialized"] = s.initialized;

    json pop = json::array();
    for (const Individual& ind : s.population) pop.push_back(encode_individual(ind));
    j["population"] = std::move(pop);

    json archive = json::array();
    for (const ArchiveEntry& e : s.archive)
        archive.push_back({{"genome", encode_genome(e.genome)},
                           {"psnr", encode_double(e.psnr)},
                           {"mse", encode_double(e.mse)},
                           {"multi_adds", e.multi_adds},
                           {"params", e.params},
                           {"violation", encode_double(e.violation)},
                           {"generation", e.generation}});
    j["archive"] = std::move(archive);

    const ControllerParams& p = s.controller.params;
    json flat = json::array();
    for (double v : p.flat()) flat.push_back(encode_double(v));
    j["controller"] = {{"shape",
                        {{"num_actions", p.shape().num_actions},
                         {"embed_dim", p.shape().embed_dim},
                         {"hidden_dim", p.shape().hidden_dim},
                         {"steps", p.shape().steps}}},
                       {"params", std::move(flat)},
                       {"baseline",
                        {{"value", encode_double(s.controller.baseline.value)},
                         {"initialized", s.controller.baseline.initialized}}},
                       {"updates", s.controller.updates}};

    const std::string rng_state = s.rng.state();
    j["rng"] = {{"state", rng_state}, {"checksum", fnv_hex(rng_state)}};
    j["counters"] = encode_counters(s.counters);

    json history = json::array();
    for (const GenerationStats& h : s.history)
        history.push_back({{"generation", h.generation},
                           {"best_psnr", encode_double(h.best_psnr)},
                           {"median_psnr", encode_double(h.median_psnr)},
                           {"front_size", h.front_size},
                           {"feasible", h.feasible}});
    j["history"] = std::move(history);
    return j;
}

namespace {

SearchState decode_state(const json& j) {
    if (!j.is_object() || get<std::string>(j, "format") != "cellnas-checkpoint")
        throw CheckpointError("not a checkpoint file");
    const int version = get<int>(j, "version");
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    const json& cfg_json = field(j, "config");
    if (fnv_hex(cfg_json.dump()) != get<std::string>(j, "config_hash"))
        throw CheckpointError("checkpoint config echo does not match its hash");

    SearchState s;
    try {
        s.config = config_from_json(cfg_json);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    const SpaceConfig& space = s.config.space;
    s.generation = get<std::uint32_t>(j, "generation");
    s.initialized = get<bool>(j, "initialized");
    for (const auto& ind : field(j, "population")) s.population.push_back(decode_individual(ind, space));
    for (const auto& e : field(j, "archive")) {
        ArchiveEntry a;
        a.genome = decode_genome(field(e, "genome"), space);
        a.psnr = get_double(e, "psnr");
        a.mse = get_double(e, "mse");
        a.multi_adds = get<std::uint64_t>(e, "multi_adds");
        a.params = get<std::uint64_t>(e, "params");
        a.violation = get_double(e, "violation");
        a.generation = get<std::uint32_t>(e, "generation");
        s.archive.push_back(std::move(a));
    }

    const json& c = field(j, "controller");
    const json& shape_j = field(c, "shape");
    ControllerShape shape{get<std::uint32_t>(shape_j, "num_actions"), get<std::uint32_t>(shape_j, "embed_dim"),
                          get<std::uint32_t>(shape_j, "hidden_dim"), get<std::uint32_t>(shape_j, "steps")};
    if (!(shape == s.config.controller_shape())) throw CheckpointError("controller shape does not match config");
    std::vector<double> flat;
    for (const auto& v : field(c, "params")) flat.push_back(decode_double(v.get<std::string>()));
    try {
        s.controller.params = ControllerParams(shape, std::move(flat));
    } catch (const DomainError& e) {
        throw CheckpointError(e.what());
    }
    const json& baseline = field(c, "baseline");
    s.controller.baseline.value = get_double(baseline, "value");
    s.controller.baseline.initialized = get<bool>(baseline, "initialized");
    s.controller.updates = get<std::uint64_t>(c, "updates");

    const json& rng = field(j, "rng");
    const std::string rng_state = get<std::string>(rng, "state");
    if (fnv_hex(rng_state) != get<std::string>(rng, "checksum"))
        throw CheckpointError("checkpoint rng state does not match its checksum");
    s.rng.restore(rng_state);

    s.counters = decode_counters(field(j, "counters"));
    for (const auto& h : field(j, "history")) {
        GenerationStats g;
        g.generation = get<std::uint32_t>(h, "generation");
        g.best_psnr = get_double(h, "best_psnr");
        g.median_psnr = get_double(h, "median_psnr");
        g.front_size = get<std::uint32_t>(h, "front_size");
        g.feasible = get<std::uint32_t>(h, "feasible");
        s.history.push_back(g);
    }
    if (s.initialized && s.population.size() != s.config.population)
        throw CheckpointError("checkpoint population size does not match config");
    return s;
}

}  // namespace

SearchState checkpoint_from_json(const json& j) {
    try {
        return decode_state(j);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint is malformed: ") + e.what());
    }
}

void save_checkpoint(const SearchState& state, const std::string& path) {
    const std::string text = checkpoint_to_json(state).dump(1) + "\n";
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint '" + tmp + "'");
        out << text;
        if (!out) throw CheckpointError("failed writing checkpoint '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw CheckpointError("cannot move checkpoint into place at '" + path + "'");
}

SearchState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw CheckpointError("checkpoint '" + path + "' is malformed: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace cellnas
