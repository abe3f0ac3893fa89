// Command-line front end: validates experiment configs and runs the pipeline
// stages (cell problems, effective tensor, homogenized solve, fine-scale
// simulation, convergence harness), writing artifacts atomically under the
// configured output directory.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homog/config.hpp"
#include "homog/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::vector<std::string> tol_overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
    cmd->add_option("--threads", args.threads, "worker threads (default: hardware)");
    cmd->add_option("--tol-override", args.tol_overrides,
                    "tolerance override KEY=VAL (repeatable)");
}

homog::ExperimentConfig load(const CommonArgs& args) {
    std::map<std::string, std::string> overrides;
    for (const std::string& kv : args.tol_overrides) {
        const auto pos = kv.find('=');
        if (pos == std::string::npos || pos == 0)
            throw homog::ConfigError("--tol-override expects KEY=VAL, got '" + kv + "'");
        overrides[kv.substr(0, pos)] = kv.substr(pos + 1);
    }
    homog::ExperimentConfig cfg = homog::load_config(args.config_path, overrides);
    if (!args.out_dir.empty()) cfg.output = args.out_dir;
    if (args.threads > 0) homog::set_thread_count(args.threads);
    return cfg;
}

std::string eps_tag(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return buf;
}

void write_fine_artifacts(const homog::ExperimentConfig& cfg, homog::ArtifactStore& store,
                          std::size_t idx, const homog::FineScaleResult& fine) {
    store.put("fine_" + eps_tag(idx) + ".bin", homog::serialize_field(fine.u));
    nlohmann::json j = homog::energy_json(fine.energy);
    j["epsilon"] = cfg.epsilons[idx].value();
    j["steps"] = fine.layout.steps;
    j["max_residual"] = fine.max_residual;
    store.put("energy_" + eps_tag(idx) + ".json", j.dump(2) + "\n");
}

int run_subcommand(const std::string& stage, const CommonArgs& args,
                   const std::optional<std::string>& eps_arg) {
    homog::ExperimentConfig cfg = load(args);

    if (stage == "validate") {
        cfg.coefficient->verify_coercivity(cfg.tol.n_check);
        std::cout << homog::validate_report(cfg);
        return 0;
    }

    homog::ArtifactStore store(cfg);

    if (stage == "cell") {
        homog::run_cell_stage(cfg, store);
        std::cout << "wrote correctors.bin and cell.json under " << store.dir().string() << "\n";
        return 0;
    }
    if (stage == "effective") {
        const auto st = homog::run_effective_stage(cfg, store);
        std::cout << homog::effective_csv(cfg, st.b, st.bounds);
        return 0;
    }
    if (stage == "homogenize") {
        const auto st = homog::run_effective_stage(cfg, store);
        homog::run_homogenize_stage(cfg, store, st.b);
        std::cout << "wrote u_hom.bin under " << store.dir().string() << "\n";
        return 0;
    }
    if (stage == "finescale") {
        if (cfg.epsilons.empty()) throw homog::ConfigError("config has no epsilons");
        std::size_t idx = cfg.epsilons.size() - 1;  // default: smallest
        if (eps_arg) {
            const homog::Rational want =
                homog::detail::parse_epsilon_entry(nlohmann::json(*eps_arg));
            bool found = false;
            for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
                if (cfg.epsilons[i] == want) {
                    idx = i;
                    found = true;
                }
            if (!found) throw homog::ConfigError("--eps value is not in the config's epsilon list");
        }
        const homog::EpsRun run = homog::run_one_eps(cfg, cfg.epsilons[idx]);
        write_fine_artifacts(cfg, store, idx, run.fine);
        std::cout << "wrote fine_" << eps_tag(idx) << ".bin under " << store.dir().string()
                  << "\n";
        return 0;
    }
    if (stage == "sweep") {
        const auto runs = homog::run_sweep(cfg);
        for (std::size_t i = 0; i < runs.size(); ++i)
            write_fine_artifacts(cfg, store, i, runs[i].fine);
        std::cout << "wrote " << runs.size() << " fine-scale runs under " << store.dir().string()
                  << "\n";
        return 0;
    }
    if (stage == "harness" || stage == "all") {
        const homog::HarnessData hd = homog::run_harness(cfg);
        if (stage == "all") {
            store.put("correctors.bin", homog::serialize_corrector(hd.chi));
            for (std::size_t i = 0; i < hd.runs.size(); ++i)
                write_fine_artifacts(cfg, store, i, hd.runs[i].fine);
        }
        homog::write_harness(cfg, hd, store);
        std::cout << "wrote harness.csv and summary.json under " << store.dir().string() << "\n";
        return 0;
    }
    throw std::logic_error("unknown stage " + stage);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic homogenization toolkit"};
    app.require_subcommand(1);

    const std::vector<std::string> stages = {"validate",  "cell",  "effective", "homogenize",
                                             "finescale", "sweep", "harness",   "all"};
    const std::map<std::string, std::string> descriptions = {
        {"validate", "parse and validate a config, print the run plan"},
        {"cell", "solve the local (cell) problems and store the correctors"},
        {"effective", "assemble the effective tensor (reuses stored correctors)"},
        {"homogenize", "solve the homogenized problem"},
        {"finescale", "run the fine-scale simulation for one epsilon"},
        {"sweep", "run the fine-scale simulation for every epsilon"},
        {"harness", "full in-memory pipeline plus convergence reports"},
        {"all", "harness plus all stage artifacts"},
    };

    std::map<std::string, CommonArgs> args;
    std::string eps_arg;
    CLI::App* fine_cmd = nullptr;
    for (const auto& stage : stages) {
        CLI::App* cmd = app.add_subcommand(stage, descriptions.at(stage));
        add_common(cmd, args[stage]);
        if (stage == "finescale") {
            fine_cmd = cmd;
            cmd->add_option("--eps", eps_arg,
                            "epsilon to run, e.g. 1/32 or 0.03125 (default: smallest in the list)");
        }
    }

    CLI11_PARSE(app, argc, argv);

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        std::optional<std::string> eps;
        if (fine_cmd && fine_cmd->count("--eps") > 0) eps = eps_arg;
        return run_subcommand(stage, args.at(stage), eps);
    } catch (const std::exception& e) {
        std::cerr << "[error] " << stage << ": " << e.what() << "\n";
        return 1;
    }
}
