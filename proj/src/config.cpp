#include "cellnas/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>

#include "cellnas/errors.hpp"

namespace cellnas {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return;
    try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!j[key].is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
        }
        out = j[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_opt(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return;
    if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number or null");
    out = j[key].get<double>();
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void SearchConfig::validate() const {
    if (population < 2) throw ConfigError("population must be >= 2");
    if (generations < 1) throw ConfigError("generations must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    space.validate();
    if (crossover_k < 1 || crossover_k > space.n) throw ConfigError("crossover_k must be in [1, n]");
    bounds.validate();
    probs.validate();
    if (!(roulette_epsilon > 0.0)) throw ConfigError("roulette_epsilon must be > 0");
    rl.validate();
    if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("controller widths must be >= 1");
    if (!(controller_init_scale >= 0.0)) throw ConfigError("controller init scale must be >= 0");
    surrogate.validate();
    if (backend.kind == BackendKind::External) {
        if (backend.endpoint.command.empty() == backend.endpoint.tcp_address.empty())
            throw ConfigError("external backend needs exactly one of 'command' or 'tcp'");
        if (!(backend.endpoint.timeout_seconds > 0.0)) throw ConfigError("backend.timeout_seconds must be > 0");
    }
}

json config_to_json(const SearchConfig& c, bool include_workers) {
    json j;
    j["seed"] = c.seed;
    j["population"] = c.population;
    j["generations"] = c.generations;
    if (include_workers) j["workers"] = c.workers;
    j["crossover_k"] = c.crossover_k;
    j["init_mode"] = c.init_mode == InitMode::RepeatedCell ? "repeated" : "per_cell";
    j["dry_run"] = c.dry_run;
    j["space"] = {{"n", c.space.n},
                  {"head_filters", c.space.head_filters},
                  {"scale", c.space.scale},
                  {"eval_width", c.space.eval_width},
                  {"eval_height", c.space.eval_height},
                  {"input_channels", c.space.input_channels}};
    j["bounds"] = {{"psnr_min", opt(c.bounds.psnr_min)},     {"psnr_max", opt(c.bounds.psnr_max)},
                   {"flops_min", opt(c.bounds.flops_min)},   {"flops_max", opt(c.bounds.flops_max)},
                   {"params_min", opt(c.bounds.params_min)}, {"params_max", opt(c.bounds.params_max)}};
    j["mutation"] = {{"p_rm", c.probs.p_rm}, {"p_re", c.probs.p_re}, {"p_pr", c.probs.p_pr},
                     {"p_m", c.probs.p_m},   {"p_km", c.probs.p_km}, {"mutation_ratio", c.probs.mutation_ratio}};
    j["roulette_epsilon"] = c.roulette_epsilon;
    j["rl"] = {{"batch_size", c.rl.batch_size},
               {"gamma", c.rl.gamma},
               {"learning_rate", c.rl.learning_rate},
               {"reward_cap", c.rl.reward_cap},
               {"baseline", c.rl.baseline == BaselineKind::None ? "none" : "moving_average"},
               {"baseline_decay", c.rl.baseline_decay},
               {"embed_dim", c.embed_dim},
               {"hidden_dim", c.hidden_dim},
               {"init_scale", c.controller_init_scale}};
    j["surrogate"] = {{"base", c.surrogate.base},
                      {"param_gain", c.surrogate.param_gain},
                      {"param_scale", c.surrogate.param_scale},
                      {"madds_gain", c.surrogate.madds_gain},
                      {"madds_scale", c.surrogate.madds_scale},
                      {"skip_bonus", c.surrogate.skip_bonus},
                      {"k3_bonus", c.surrogate.k3_bonus},
                      {"noise_amp", c.surrogate.noise_amp}};
    if (c.backend.kind == BackendKind::Surrogate) {
        j["backend"] = {{"kind", "surrogate"}};
    } else {
        j["backend"] = {{"kind", "external"}, {"timeout_seconds", c.backend.endpoint.timeout_seconds}};
        if (!c.backend.endpoint.command.empty()) j["backend"]["command"] = c.backend.endpoint.command;
        if (!c.backend.endpoint.tcp_address.empty()) j["backend"]["tcp"] = c.backend.endpoint.tcp_address;
    }
    j["report"] = json::object();
    if (c.hv_reference) j["report"]["hv_reference"] = *c.hv_reference;
    return j;
}

SearchConfig config_from_json(const json& j) {
    SearchConfig c;
    reject_unknown(j,
                   {"seed", "population", "generations", "workers", "crossover_k", "init_mode", "dry_run", "space",
                    "bounds", "mutation", "roulette_epsilon", "rl", "surrogate", "backend", "report"},
                   "config");
    read(j, "seed", c.seed, "config");
    read(j, "population", c.population, "config");
    read(j, "generations", c.generations, "config");
    read(j, "workers", c.workers, "config");
    read(j, "crossover_k", c.crossover_k, "config");
    read(j, "dry_run", c.dry_run, "config");
    read(j, "roulette_epsilon", c.roulette_epsilon, "config");
    if (j.contains("init_mode")) {
        const std::string mode = j["init_mode"].is_string() ? j["init_mode"].get<std::string>() : "";
        if (mode == "repeated") c.init_mode = InitMode::RepeatedCell;
        else if (mode == "per_cell") c.init_mode = InitMode::PerCell;
        else throw ConfigError("init_mode must be 'repeated' or 'per_cell'");
    }
    if (j.contains("space")) {
        const json& s = j["space"];
        reject_unknown(s, {"n", "head_filters", "scale", "eval_width", "eval_height", "input_channels"}, "space");
        read(s, "n", c.space.n, "space");
        read(s, "head_filters", c.space.head_filters, "space");
        read(s, "scale", c.space.scale, "space");
        read(s, "eval_width", c.space.eval_width, "space");
        read(s, "eval_height", c.space.eval_height, "space");
        read(s, "input_channels", c.space.input_channels, "space");
    }
    if (j.contains("bounds")) {
        const json& b = j["bounds"];
        reject_unknown(b, {"psnr_min", "psnr_max", "flops_min", "flops_max", "params_min", "params_max"}, "bounds");
        read_opt(b, "psnr_min", c.bounds.psnr_min, "bounds");
        read_opt(b, "psnr_max", c.bounds.psnr_max, "bounds");
        read_opt(b, "flops_min", c.bounds.flops_min, "bounds");
        read_opt(b, "flops_max", c.bounds.flops_max, "bounds");
        read_opt(b, "params_min", c.bounds.params_min, "bounds");
        read_opt(b, "params_max", c.bounds.params_max, "bounds");
    }
    if (j.contains("mutation")) {
        const json& m = j["mutation"];
        reject_unknown(m, {"p_rm", "p_re", "p_pr", "p_m", "p_km", "mutation_ratio"}, "mutation");
        read(m, "p_rm", c.probs.p_rm, "mutation");
        read(m, "p_re", c.probs.p_re, "mutation");
        read(m, "p_pr", c.probs.p_pr, "mutation");
        read(m, "p_m", c.probs.p_m, "mutation");
        read(m, "p_km", c.probs.p_km, "mutation");
        read(m, "mutation_ratio", c.probs.mutation_ratio, "mutation");
    }
    if (j.contains("rl")) {
        const json& r = j["rl"];
        reject_unknown(r,
                       {"batch_size", "gamma", "learning_rate", "reward_cap", "baseline", "baseline_decay", "embed_dim",
                        "hidden_dim", "init_scale"},
                       "rl");
        read(r, "batch_size", c.rl.batch_size, "rl");
        read(r, "gamma", c.rl.gamma, "rl");
        read(r, "learning_rate", c.rl.learning_rate, "rl");
        read(r, "reward_cap", c.rl.reward_cap, "rl");
        read(r, "baseline_decay", c.rl.baseline_decay, "rl");
        read(r, "embed_dim", c.embed_dim, "rl");
        read(r, "hidden_dim", c.hidden_dim, "rl");
        read(r, "init_scale", c.controller_init_scale, "rl");
        if (r.contains("baseline")) {
            const std::string b = r["baseline"].is_string() ? r["baseline"].get<std::string>() : "";
            if (b == "none") c.rl.baseline = BaselineKind::None;
            else if (b == "moving_average") c.rl.baseline = BaselineKind::MovingAverage;
            else throw ConfigError("rl.baseline must be 'none' or 'moving_average'");
        }
    }
    if (j.contains("surrogate")) {
        const json& s = j["surrogate"];
        reject_unknown(s,
                       {"base", "param_gain", "param_scale", "madds_gain", "madds_scale", "skip_bonus", "k3_bonus",
                        "noise_amp"},
                       "surrogate");
        read(s, "base", c.surrogate.base, "surrogate");
        read(s, "param_gain", c.surrogate.param_gain, "surrogate");
        read(s, "param_scale", c.surrogate.param_scale, "surrogate");
        read(s, "madds_gain", c.surrogate.madds_gain, "surrogate");
        read(s, "madds_scale", c.surrogate.madds_scale, "surrogate");
        read(s, "skip_bonus", c.surrogate.skip_bonus, "surrogate");
        read(s, "k3_bonus", c.surrogate.k3_bonus, "surrogate");
        read(s, "noise_amp", c.surrogate.noise_amp, "surrogate");
    }
    if (j.contains("backend")) {
        const json& b = j["backend"];
        reject_unknown(b, {"kind", "command", "tcp", "timeout_seconds"}, "backend");
        const std::string kind = b.contains("kind") && b["kind"].is_string() ? b["kind"].get<std::string>() : "";
        if (kind == "surrogate") c.backend.kind = BackendKind::Surrogate;
        else if (kind == "external") c.backend.kind = BackendKind::External;
        else throw ConfigError("backend.kind must be 'surrogate' or 'external'");
        read(b, "command", c.backend.endpoint.command, "backend");
        read(b, "tcp", c.backend.endpoint.tcp_address, "backend");
        read(b, "timeout_seconds", c.backend.endpoint.timeout_seconds, "backend");
    }
    if (j.contains("report")) {
        const json& r = j["report"];
        reject_unknown(r, {"hv_reference"}, "report");
        if (r.contains("hv_reference") && !r["hv_reference"].is_null()) {
            const json& ref = r["hv_reference"];
            if (!ref.is_array() || ref.size() != 3) throw ConfigError("report.hv_reference must be [f1, f2, f3]");
            std::array<double, 3> v{};
            for (std::size_t i = 0; i < 3; ++i) {
                if (!ref[i].is_number()) throw ConfigError("report.hv_reference entries must be numbers");
                v[i] = ref[i].get<double>();
            }
            c.hv_reference = v;
        }
    }
    c.validate();
    return c;
}

SearchConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void apply_env_overrides(SearchConfig& cfg) {
    auto parse = [](const char* name, const char* text) {
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(text, &end, 10);
        if (errno != 0 || end == text || *end != '\0') throw ConfigError(std::string(name) + " must be an integer");
        return v;
    };
    if (const char* s = std::getenv("CELLNAS_SEED")) cfg.seed = parse("CELLNAS_SEED", s);
    if (const char* w = std::getenv("CELLNAS_WORKERS")) {
        const auto v = parse("CELLNAS_WORKERS", w);
        if (v < 1 || v > 4096) throw ConfigError("CELLNAS_WORKERS must be in [1, 4096]");
        cfg.workers = static_cast<std::uint32_t>(v);
    }
}

}  // namespace cellnas
