// Command-line front end: generate, validate, collect, solve, sweep, diagnose.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "fogas/fogas.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string mdp_id_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

void append_record(const std::string& path, const fogas::ExperimentRecord& rec) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw fogas::Error("cannot open " + path + " for appending");
    if (fresh) fogas::write_records_header(out);
    fogas::write_record_row(out, rec);
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    long states = 5, actions = 3, dim = 4;
    double gamma = 0.9;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    if (a.dim < 1) throw UsageError("dim must be ≥ 1");
    if (a.states < 1) throw UsageError("states must be ≥ 1");
    if (a.actions < 1) throw UsageError("actions must be ≥ 1");
    if (a.dim > a.states * a.actions) throw UsageError("dim must be ≤ states·actions");
    if (!(a.gamma > 0.0 && a.gamma < 1.0)) throw UsageError("gamma must lie in (0,1)");
    const fogas::LinearMdp mdp = fogas::generate_linear_mdp(a.states, a.actions, a.dim, a.gamma, a.seed);
    fogas::save_mdp(a.out, mdp);
    std::cout << "R = " << std::setprecision(17) << mdp.feature_bound() << "\nd = " << mdp.dim() << '\n';
    return kOk;
}

int cmd_validate(const std::string& path) {
    const fogas::LinearMdp mdp = fogas::load_mdp(path);
    const auto report = fogas::validate_linear_mdp(mdp);
    if (report.empty()) {
        std::cout << "valid: X=" << mdp.num_states() << " A=" << mdp.num_actions() << " d=" << mdp.dim()
                  << " R=" << mdp.feature_bound() << '\n';
        return kOk;
    }
    for (const auto& v : report) std::cout << v.kind << ": " << v.message << '\n';
    return kFailure;
}

struct CollectArgs {
    std::string mdp, behavior = "uniform", mode = "occupancy", out;
    long n = 0;
    std::uint64_t seed = 0;
};

int cmd_collect(const CollectArgs& a) {
    fogas::BehaviorSpec spec;
    fogas::SamplingMode mode;
    try {
        spec = fogas::parse_behavior(a.behavior);
        mode = fogas::parse_sampling_mode(a.mode);
    } catch (const fogas::ArgumentError& e) {
        throw UsageError(e.what());
    }
    if (a.n < 1) throw UsageError("n must be ≥ 1");
    const fogas::LinearMdp mdp = fogas::load_mdp(a.mdp);
    const fogas::OptimalSolution opt = fogas::solve_optimal(mdp);
    const fogas::TabularPolicy behavior = fogas::build_behavior(mdp, spec, opt.policy);
    const fogas::OfflineDataset data = fogas::collect_dataset(mdp, behavior, a.n, mode, a.seed);
    fogas::save_dataset(a.out, data);
    std::cout << "wrote " << data.size() << " transitions to " << a.out << '\n';
    return kOk;
}

struct SolveArgs {
    std::string mdp, data, rates, out, results;
    bool auto_tune = false, record_trajectory = false;
    long T = 0, T_cap = 20000;
    double delta = 0.05, D_theta = 0.0;
    std::uint64_t seed = 0;
};

int cmd_solve(const SolveArgs& a) {
    if (a.auto_tune == !a.rates.empty()) throw UsageError("give exactly one of --auto-tune or --rates");
    const fogas::LinearMdp mdp = fogas::load_mdp(a.mdp);
    const fogas::OfflineDataset data = fogas::load_dataset(a.data);

    fogas::SolverSettings s;
    s.auto_tune = a.auto_tune;
    s.delta = a.delta;
    s.T_cap = a.T_cap;
    if (a.T > 0) s.T = a.T;
    if (a.D_theta > 0.0) s.D_theta = a.D_theta;
    if (!a.auto_tune) {
        std::vector<double> r;
        std::stringstream ss(a.rates);
        for (std::string item; std::getline(ss, item, ',');) {
            try {
                r.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw UsageError("--rates expects alpha,rho,eta,beta");
            }
        }
        if (r.size() != 4) throw UsageError("--rates expects alpha,rho,eta,beta");
        if (!s.T) throw UsageError("--rates needs --T");
        s.alpha = r[0];
        s.rho = r[1];
        s.eta = r[2];
        s.beta = r[3];
    }
    fogas::FogasConfig config;
    try {
        config = fogas::resolve_solver_config(s, mdp, data.size(), a.seed);
        config.record_trajectory = a.record_trajectory;
        config.validate();
    } catch (const fogas::ArgumentError& e) {
        throw UsageError(e.what());
    }
    if (auto w = fogas::iteration_warning(config, mdp.feature_bound(), data.size(), mdp.num_actions()))
        std::cerr << "warning: " << *w << '\n';

    const fogas::OptimalSolution opt = fogas::solve_optimal(mdp);
    fogas::CellOutcome cell = fogas::solve_and_score(mdp, opt, data, config, mdp_id_of(a.mdp), a.seed);
    if (!a.out.empty()) fogas::save_run(a.out, *cell.run);
    if (!a.results.empty()) append_record(a.results, cell.record);
    fogas::write_records_header(std::cout);
    fogas::write_record_row(std::cout, cell.record);
    return kOk;
}

struct SweepArgs {
    std::string config, output_dir;
    long threads = -1;
};

int cmd_sweep(const SweepArgs& a) {
    fogas::ExperimentConfig config;
    try {
        config = fogas::load_experiment_config(a.config);
    } catch (const fogas::ArgumentError& e) {
        throw UsageError(e.what());
    }
    if (!a.output_dir.empty()) config.output_dir = a.output_dir;
    if (a.threads >= 0) config.threads = static_cast<unsigned>(a.threads);
    const fogas::SweepResult result = fogas::run_sweep(config);

    std::filesystem::create_directories(config.output_dir);
    const auto dir = std::filesystem::path(config.output_dir);
    {
        std::ofstream out(dir / "results.csv", std::ios::binary);
        if (!out) throw fogas::Error("cannot write results.csv in " + config.output_dir);
        fogas::write_records_header(out);
        for (const auto& r : result.records) fogas::write_record_row(out, r);
    }
    {
        std::ofstream out(dir / "summary.csv", std::ios::binary);
        fogas::write_summary(out, result.summary);
    }
    fogas::write_summary(std::cout, result.summary);
    return result.any_failed ? kFailure : kOk;
}

struct DiagnoseArgs {
    std::string mdp, data, run, out;
};

int cmd_diagnose(const DiagnoseArgs& a) {
    const fogas::LinearMdp mdp = fogas::load_mdp(a.mdp);
    const fogas::OfflineDataset data = fogas::load_dataset(a.data);
    const fogas::FogasRun run = fogas::load_run(a.run);
    if (!run.trajectory) {
        std::cerr << "error: run file has no trajectory; rerun solve with --record-trajectory\n";
        return kFailure;
    }
    const fogas::OptimalSolution opt = fogas::solve_optimal(mdp);
    const fogas::GapReport rep = fogas::duality_gap_report(run, mdp, data, opt.policy);

    std::ostringstream row;
    fogas::write_gap_report_header(row);
    fogas::write_gap_report_row(row, rep);
    if (!a.out.empty()) {
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw fogas::Error("cannot open " + a.out + " for writing");
        out << row.str();
    }
    std::cout << row.str();

    int status = kOk;
    if (rep.decomposition_residual > 1e-8) {
        std::cerr << "error: duality-gap decomposition residual " << rep.decomposition_residual << " > 1e-8\n";
        status = kFailure;
    }
    if (!rep.identity_applicable) {
        std::cerr << "note: D_theta != sqrt(d)/(1-gamma); suboptimality identity not asserted\n";
    } else if (rep.identity_residual > 1e-8) {
        std::cerr << "error: suboptimality identity residual " << rep.identity_residual << " > 1e-8\n";
        status = kFailure;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-occupancy gradient ascent for offline RL in linear MDPs"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a random linear MDP");
    generate->add_option("--states", gen.states, "Number of states")->required();
    generate->add_option("--actions", gen.actions, "Number of actions")->required();
    generate->add_option("--dim", gen.dim, "Feature dimension")->required();
    generate->add_option("--gamma", gen.gamma, "Discount factor")->required();
    generate->add_option("--seed", gen.seed, "Random seed");
    generate->add_option("--out", gen.out, "Output MDP file")->required();

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check the linear-MDP invariants of a file");
    validate->add_option("--mdp", validate_path, "MDP file")->required();

    CollectArgs col;
    auto* collect = app.add_subcommand("collect", "Collect an offline dataset");
    collect->add_option("--mdp", col.mdp, "MDP file")->required();
    collect->add_option("--behavior", col.behavior, "uniform | eps:<v> | action:<k>");
    collect->add_option("--mode", col.mode, "occupancy | uniform");
    collect->add_option("--n", col.n, "Number of transitions")->required();
    collect->add_option("--seed", col.seed, "Random seed");
    collect->add_option("--out", col.out, "Output CSV")->required();

    SolveArgs sol;
    auto* solve = app.add_subcommand("solve", "Run the solver on a dataset and score the output policy");
    solve->add_option("--mdp", sol.mdp, "MDP file")->required();
    solve->add_option("--data", sol.data, "Dataset CSV")->required();
    solve->add_flag("--auto-tune", sol.auto_tune, "Use the rates of the main guarantee");
    solve->add_option("--rates", sol.rates, "Manual rates alpha,rho,eta,beta");
    solve->add_option("--T", sol.T, "Iterations (auto-tune default: guarantee count, capped)");
    solve->add_option("--T-cap", sol.T_cap, "Cap on the automatic iteration count");
    solve->add_option("--delta", sol.delta, "Confidence parameter for auto-tune");
    solve->add_option("--D-theta", sol.D_theta, "Radius of the theta ball (default sqrt(d)/(1-gamma))");
    solve->add_option("--seed", sol.seed, "Seed for the output index");
    solve->add_flag("--record-trajectory", sol.record_trajectory, "Store every iterate in the run file");
    solve->add_option("--out", sol.out, "Run file (JSON)");
    solve->add_option("--results", sol.results, "Results CSV to append the record to");

    SweepArgs swp;
    auto* sweep = app.add_subcommand("sweep", "Run an n x seeds grid from a config file");
    sweep->add_option("--config", swp.config, "Experiment config (JSON)")->required();
    sweep->add_option("--output-dir", swp.output_dir, "Override output_dir");
    sweep->add_option("--threads", swp.threads, "Worker threads (0: all cores)");

    DiagnoseArgs dia;
    auto* diagnose = app.add_subcommand("diagnose", "Duality-gap diagnostics of a recorded run");
    diagnose->add_option("--mdp", dia.mdp, "MDP file")->required();
    diagnose->add_option("--data", dia.data, "Dataset CSV")->required();
    diagnose->add_option("--run", dia.run, "Run file with trajectory")->required();
    diagnose->add_option("--out", dia.out, "Gap report CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*generate) return cmd_generate(gen);
        if (*validate) return cmd_validate(validate_path);
        if (*collect) return cmd_collect(col);
        if (*solve) return cmd_solve(sol);
        if (*sweep) return cmd_sweep(swp);
        if (*diagnose) return cmd_diagnose(dia);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fogas::SolverAbort& e) {
        std::cerr << "error: solver aborted at iteration " << e.iteration() << ": " << e.what() << '\n';
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
