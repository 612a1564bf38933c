// Command-line front end: search, resume, report, eval-one, space.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cellnas/checkpoint.hpp"
#include "cellnas/config.hpp"
#include "cellnas/errors.hpp"
#include "cellnas/pipeline.hpp"
#include "cellnas/report.hpp"

namespace {

using namespace cellnas;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kConfig = 2, kEvaluation = 3, kCheckpoint = 4 };

void print_progress(const SearchState& s) {
    const GenerationStats& h = s.history.back();
    std::fprintf(stderr, "gen %4u  best %.3f dB  median %.3f dB  front %u  feasible %u  evals %llu\n", h.generation,
                 h.best_psnr, h.median_psnr, h.front_size, h.feasible,
                 static_cast<unsigned long long>(s.counters.backend_calls));
}

void print_summary(const SearchState& s) {
    const Counters& c = s.counters;
    nlohmann::json j = {{"generation", s.generation},
                        {"spawned_total", c.spawned_total},
                        {"offspring_total", c.offspring_total},
                        {"backend_calls", c.backend_calls},
                        {"cache_hits", c.cache_hits},
                        {"skipped_precheck", c.skipped_precheck},
                        {"mutated", c.mutated},
                        {"natural", c.natural},
                        {"reinforced", c.reinforced},
                        {"roulette", c.roulette},
                        {"prior", c.prior},
                        {"controller_updates", c.controller_updates},
                        {"front_size", front_rows(s).size()}};
    std::cout << j.dump(2) << "\n";
}

/// Runs to completion, checkpointing after every generation. On an evaluation
/// failure the last completed generation is already on disk.
int drive(Search& search, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const std::string ckpt = (out_dir / "checkpoint.json").string();
    try {
        search.run([&](const SearchState& s) {
            save_checkpoint(s, ckpt);
            print_progress(s);
        });
    } catch (const GenerationError& e) {
        save_checkpoint(search.state(), ckpt);
        std::cerr << "evaluation failed: " << e.what() << "\ncheckpoint written to " << ckpt << "\n";
        for (const auto& g : e.failed()) std::cerr << "  failed genome: " << to_text(Genome(g)) << "\n";
        return kEvaluation;
    } catch (const EvaluationError& e) {
        save_checkpoint(search.state(), ckpt);
        std::cerr << "evaluation failed: " << e.what() << "\ncheckpoint written to " << ckpt << "\n";
        return kEvaluation;
    }
    print_summary(search.state());
    std::cerr << "checkpoint: " << ckpt << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained multi-objective cell-based architecture search"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run", checkpoint_path, what, genome_text;
    bool svg = false, list = false;
    int describe_index = -1;
    std::uint32_t workers = 0;
    std::uint32_t extra_generations = 0;

    auto* search_cmd = app.add_subcommand("search", "Run a search from a config file");
    search_cmd->add_option("--config", config_path, "JSON config")->required();
    search_cmd->add_option("--out", out_dir, "Output directory");
    search_cmd->add_option("--workers", workers, "Concurrent evaluations (overrides config)");

    auto* resume_cmd = app.add_subcommand("resume", "Continue a search from a checkpoint");
    resume_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    resume_cmd->add_option("--out", out_dir, "Output directory (default: the checkpoint's directory)");
    resume_cmd->add_option("--workers", workers, "Concurrent evaluations");
    resume_cmd->add_option("--extend", extra_generations, "Run this many generations past the configured total");

    auto* report_cmd = app.add_subcommand("report", "Write front / history / hypervolume reports");
    report_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    report_cmd->add_option("--what", what, "front | history | hv")
        ->required()
        ->check(CLI::IsMember({"front", "history", "hv"}));
    report_cmd->add_flag("--svg", svg, "Also render front.svg");
    report_cmd->add_option("--out", out_dir, "Output directory (default: the checkpoint's directory)");

    auto* eval_cmd = app.add_subcommand("eval-one", "Cost and evaluate a single genome");
    eval_cmd->add_option("--genome", genome_text, "Comma-separated cell indices")->required();
    eval_cmd->add_option("--config", config_path, "JSON config (space, surrogate, backend)");

    auto* space_cmd = app.add_subcommand("space", "Inspect the operator space");
    auto* describe_opt = space_cmd->add_option("--describe", describe_index, "Decode one operator index");
    auto* list_opt = space_cmd->add_flag("--list", list, "List all operators");
    space_cmd->add_option("--genome", genome_text, "Print the per-layer cost report of a genome");
    space_cmd->add_option("--config", config_path, "JSON config (space settings)");
    describe_opt->excludes(list_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (search_cmd->parsed()) {
            SearchConfig cfg = load_config_file(config_path);
            apply_env_overrides(cfg);
            if (workers) cfg.workers = workers;
            cfg.validate();
            Search search(cfg);
            return drive(search, out_dir);
        }
        if (resume_cmd->parsed()) {
            SearchState state = load_checkpoint(checkpoint_path);
            SearchConfig env = state.config;
            apply_env_overrides(env);
            state.config.workers = workers ? workers : env.workers;
            state.config.generations += extra_generations;
            if (!resume_cmd->count("--out")) out_dir = fs::path(checkpoint_path).parent_path().string();
            if (out_dir.empty()) out_dir = ".";
            Search search(std::move(state));
            return drive(search, out_dir);
        }
        if (report_cmd->parsed()) {
            const SearchState state = load_checkpoint(checkpoint_path);
            if (!report_cmd->count("--out")) out_dir = fs::path(checkpoint_path).parent_path().string();
            if (out_dir.empty()) out_dir = ".";
            const ReportKind kind = what == "front"     ? ReportKind::Front
                                    : what == "history" ? ReportKind::History
                                                        : ReportKind::Hypervolume;
            for (const auto& f : write_report(state, kind, out_dir, svg)) std::cout << f << "\n";
            return kOk;
        }
        if (eval_cmd->parsed()) {
            SearchConfig cfg = config_path.empty() ? SearchConfig{} : load_config_file(config_path);
            const Genome g = parse_genome(genome_text);
            validate_genome(g, cfg.space);
            auto evaluator = make_evaluator(cfg);
            const EvalResult r = evaluator->evaluate(g);
            const Individual ind = make_individual(g, r, cfg.bounds, Provenance::Init);
            nlohmann::json j = {{"genome", to_text(g)},
                                {"arch", describe(g)},
                                {"psnr", r.psnr},
                                {"mse", r.mse},
                                {"measured", r.quality_measured},
                                {"multi_adds", r.multi_adds},
                                {"params", r.params},
                                {"violation", ind.violation}};
            std::cout << j.dump(2) << "\n";
            return kOk;
        }
        if (space_cmd->parsed()) {
            SearchConfig cfg = config_path.empty() ? SearchConfig{} : load_config_file(config_path);
            if (describe_index >= 0) {
                const auto op = decode_operator(static_cast<std::uint32_t>(describe_index));
                const ConvCost c = cell_cost(static_cast<std::uint32_t>(describe_index), cfg.space);
                std::cout << describe_index << " " << describe(op) << " params=" << c.params
                          << " multi_adds=" << c.multi_adds << "\n";
            } else if (list) {
                for (std::uint32_t i = 0; i < kNumOperators; ++i) std::cout << i << " " << describe(decode_operator(i)) << "\n";
            } else if (!genome_text.empty()) {
                const Genome g = parse_genome(genome_text);
                const CostReport rep = cost_of(g, cfg.space);
                for (const LayerCost& l : rep.per_layer)
                    std::cout << layer_kind_label(l.kind) << " " << l.in_channels << "->" << l.out_channels << " k"
                              << l.kernel << " params=" << l.params << " multi_adds=" << l.multi_adds << "\n";
                std::cout << "total params=" << rep.params << " multi_adds=" << rep.multi_adds << "\n";
            } else {
                std::cout << "operators per cell: " << kNumOperators << "\nspace size (n=" << cfg.space.n
                          << "): " << space_size(cfg.space) << "\n";
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kCheckpoint;
    } catch (const EvaluationError& e) {
        std::cerr << "evaluation failed: " << e.what() << "\n";
        return kEvaluation;
    } catch (const GenerationError& e) {
        std::cerr << "evaluation failed: " << e.what() << "\n";
        return kEvaluation;
    }
    return kOk;
}
