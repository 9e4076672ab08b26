#pragma once

#include "fogas/common.hpp"
#include "fogas/diagnostics.hpp"
#include "fogas/linear_mdp.hpp"
#include "fogas/offline_data.hpp"
#include "fogas/oracle.hpp"
#include "fogas/policy.hpp"
#include "fogas/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fogas {

/// Behavior policy used to collect data.
///   uniform      every action equally likely
///   eps:<e>      (1-e) * optimal + e * uniform
///   action:<k>   always action k (poor coverage)
struct BehaviorSpec {
    enum class Kind { uniform, eps_greedy, fixed_action } kind = Kind::uniform;
    double epsilon = 1.0;
    Index action = 0;
};

inline BehaviorSpec parse_behavior(const std::string& text) {
    BehaviorSpec b;
    if (text == "uniform") return b;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        std::size_t used = 0;
        if (head == "eps" && !tail.empty()) {
            b.kind = BehaviorSpec::Kind::eps_greedy;
            b.epsilon = std::stod(tail, &used);
            if (used != tail.size() || !(b.epsilon >= 0.0 && b.epsilon <= 1.0))
                throw ArgumentError("epsilon must lie in [0,1]");
            return b;
        }
        if (head == "action" && !tail.empty()) {
            b.kind = BehaviorSpec::Kind::fixed_action;
            b.action = std::stol(tail, &used);
            if (used != tail.size() || b.action < 0) throw ArgumentError("action index must be >= 0");
            return b;
        }
    } catch (const std::logic_error&) {
        throw ArgumentError("malformed behavior spec '" + text + "'");
    }
    throw ArgumentError("unknown behavior spec '" + text + "' (expected uniform, eps:<v> or action:<k>)");
}

inline std::string to_string(const BehaviorSpec& b) {
    switch (b.kind) {
        case BehaviorSpec::Kind::uniform: return "uniform";
        case BehaviorSpec::Kind::eps_greedy: {
            std::ostringstream s;
            s << "eps:" << b.epsilon;
            return s.str();
        }
        case BehaviorSpec::Kind::fixed_action: return "action:" + std::to_string(b.action);
    }
    return "uniform";
}

inline TabularPolicy build_behavior(const LinearMdp& mdp, const BehaviorSpec& spec,
                                    const TabularPolicy& optimal) {
    const TabularPolicy uniform = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    switch (spec.kind) {
        case BehaviorSpec::Kind::uniform: return uniform;
        case BehaviorSpec::Kind::eps_greedy: return optimal.mix(uniform, spec.epsilon);
        case BehaviorSpec::Kind::fixed_action: {
            if (spec.action >= mdp.num_actions()) throw ArgumentError("behavior action out of range");
            return TabularPolicy::deterministic(
                std::vector<Index>(static_cast<std::size_t>(mdp.num_states()), spec.action), mdp.num_actions());
        }
    }
    return uniform;
}

struct GeneratorParams {
    Index num_states = 5;
    Index num_actions = 3;
    Index dim = 4;
    double gamma = 0.9;
    std::uint64_t seed = 0;
};

/// Solver settings of an experiment. With auto_tune the rates follow the main
/// guarantee; T defaults to the guarantee's iteration count capped at T_cap.
struct SolverSettings {
    bool auto_tune = true;
    std::optional<long> T;
    long T_cap = 20000;
    double delta = 0.05;
    double alpha = 0.0;
    double rho = 0.0;
    double eta = 0.0;
    double beta = 0.0;
    std::optional<double> D_theta;
};

struct ExperimentConfig {
    std::optional<std::string> mdp_path;
    GeneratorParams mdp_generator;
    BehaviorSpec behavior;
    SamplingMode sampling_mode = SamplingMode::uniform;
    std::vector<Index> n_values{256, 1024, 4096, 16384};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    SolverSettings fogas;
    std::string output_dir = "results";
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const {
        if (n_values.empty()) throw ArgumentError("n_values must be nonempty");
        for (Index n : n_values)
            if (n < 1) throw ArgumentError("n values must be >= 1");
        if (seeds.empty()) throw ArgumentError("seeds must be nonempty");
        if (fogas.T && *fogas.T < 1) throw ArgumentError("T must be >= 1");
        if (fogas.T_cap < 1) throw ArgumentError("T_cap must be >= 1");
        if (!fogas.auto_tune && !fogas.T) throw ArgumentError("manual rates need an explicit T");
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ArgumentError(where + " must be an object");
    for (const auto& item : j.items())
        if (!known.count(item.key())) throw ArgumentError("unknown key '" + item.key() + "' in " + where);
}

}  // namespace detail

/// Parses the experiment config document; every key is optional and defaults as above,
/// unknown keys are rejected.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    detail::reject_unknown(j,
                           {"mdp_path", "mdp_generator", "behavior", "sampling_mode", "n_values", "seeds", "fogas",
                            "output_dir", "threads"},
                           "experiment config");
    ExperimentConfig c;
    try {
        if (j.contains("mdp_path")) c.mdp_path = j.at("mdp_path").get<std::string>();
        if (j.contains("mdp_generator")) {
            const auto& g = j.at("mdp_generator");
            detail::reject_unknown(g, {"num_states", "num_actions", "dim", "gamma", "seed"}, "mdp_generator");
            c.mdp_generator.num_states = g.value("num_states", c.mdp_generator.num_states);
            c.mdp_generator.num_actions = g.value("num_actions", c.mdp_generator.num_actions);
            c.mdp_generator.dim = g.value("dim", c.mdp_generator.dim);
            c.mdp_generator.gamma = g.value("gamma", c.mdp_generator.gamma);
            c.mdp_generator.seed = g.value("seed", c.mdp_generator.seed);
        }
        if (j.contains("behavior")) c.behavior = parse_behavior(j.at("behavior").get<std::string>());
        if (j.contains("sampling_mode")) c.sampling_mode = parse_sampling_mode(j.at("sampling_mode").get<std::string>());
        if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<Index>>();
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("fogas")) {
            const auto& f = j.at("fogas");
            detail::reject_unknown(f, {"auto_tune", "T", "T_cap", "delta", "alpha", "rho", "eta", "beta", "D_theta"},
                                   "fogas");
            SolverSettings& s = c.fogas;
            s.auto_tune = f.value("auto_tune", s.auto_tune);
            if (f.contains("T") && !f.at("T").is_null()) s.T = f.at("T").get<long>();
            s.T_cap = f.value("T_cap", s.T_cap);
            s.delta = f.value("delta", s.delta);
            s.alpha = f.value("alpha", s.alpha);
            s.rho = f.value("rho", s.rho);
            s.eta = f.value("eta", s.eta);
            s.beta = f.value("beta", s.beta);
            if (f.contains("D_theta") && !f.at("D_theta").is_null()) s.D_theta = f.at("D_theta").get<double>();
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed config document: ") + e.what());
    }
    return parse_experiment_config(j);
}

/// Solver configuration for one cell of the grid.
inline FogasConfig resolve_solver_config(const SolverSettings& s, const LinearMdp& mdp, Index n,
                                         std::uint64_t seed) {
    FogasConfig c;
    if (s.auto_tune) {
        const long T = s.T ? *s.T
                           : std::min(s.T_cap, theorem_min_iterations(mdp.feature_bound(), n, mdp.num_actions(),
                                                                      s.delta));
        c = theorem_config(mdp.dim(), mdp.num_actions(), mdp.feature_bound(), mdp.gamma(), n, T, s.delta, seed);
    } else {
        if (!s.T) throw ArgumentError("manual rates need an explicit T");
        c.T = *s.T;
        c.alpha = s.alpha;
        c.rho = s.rho;
        c.eta = s.eta;
        c.beta = s.beta;
        c.delta = s.delta;
        c.D_theta = std::sqrt(static_cast<double>(mdp.dim())) / (1.0 - mdp.gamma());
        c.seed = seed;
    }
    if (s.D_theta) c.D_theta = *s.D_theta;
    return c;
}

struct ExperimentRecord {
    std::string mdp_id;
    Index n = 0;
    std::uint64_t seed = 0;
    long T = 0;
    double coverage_ratio = 0.0;
    double suboptimality = 0.0;
    double mean_suboptimality = 0.0;
    double wall_time_ms = 0.0;
    std::string status = "ok";
};

struct CellOutcome {
    ExperimentRecord record;
    std::optional<FogasRun> run;
};

/// Runs the solver on (mdp, data) and scores the output policy and the iterate
/// average against the oracle optimum.
inline CellOutcome solve_and_score(const LinearMdp& mdp, const OptimalSolution& optimum, const OfflineDataset& data,
                                   const FogasConfig& config, const std::string& mdp_id, std::uint64_t seed) {
    CellOutcome out;
    ExperimentRecord& rec = out.record;
    rec.mdp_id = mdp_id;
    rec.n = data.size();
    rec.seed = seed;
    rec.T = config.T;

    const FeatureModel model = features_of(mdp);
    const double rho_star = optimum.evaluation.return_value;
    double gap_sum = 0.0;
    const auto start = std::chrono::steady_clock::now();
    FogasRun run = run_fogas(model, data, config, [&](long, const SoftmaxPolicy& pi_t) {
        gap_sum += rho_star - evaluate_policy(mdp, pi_t.materialize(mdp)).return_value;
    });
    const auto stop = std::chrono::steady_clock::now();

    const Covariance cov = build_covariance(model, data, config.beta);
    rec.coverage_ratio = coverage_ratio(optimum.evaluation.lambda_pi, cov);
    rec.suboptimality = rho_star - evaluate_policy(mdp, run.output_policy.materialize(mdp)).return_value;
    rec.mean_suboptimality = gap_sum / static_cast<double>(config.T);
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    out.run = std::move(run);
    return out;
}

inline std::string generator_id(const GeneratorParams& g) {
    std::ostringstream s;
    s << "gen-" << g.num_states << '-' << g.num_actions << '-' << g.dim << '-' << g.gamma << '-' << g.seed;
    return s.str();
}

inline void write_records_header(std::ostream& out) {
    out << "mdp_id,n,seed,T,coverage_ratio,suboptimality,mean_suboptimality,wall_time_ms,status\n";
}

inline void write_record_row(std::ostream& out, const ExperimentRecord& r) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(17);
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    s << r.mdp_id << ',' << r.n << ',' << r.seed << ',' << r.T << ',' << r.coverage_ratio << ',' << r.suboptimality
      << ',' << r.mean_suboptimality << ',' << std::setprecision(6) << r.wall_time_ms << ',' << status << '\n';
    out << s.str();
}

inline double median(std::vector<double> values) {
    if (values.empty()) return NAN;
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

struct SweepSummaryRow {
    Index n;
    double median_suboptimality;
    double median_mean_suboptimality;
    std::size_t ok_rows;
};

struct SweepResult {
    std::vector<ExperimentRecord> records;  // grid order: n major, seed minor
    std::vector<SweepSummaryRow> summary;
    bool any_failed = false;
};

/// Runs every (n, seed) cell. Cells may run concurrently; records are collected in grid order.
inline SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const LinearMdp mdp = config.mdp_path ? load_mdp(*config.mdp_path)
                                          : generate_linear_mdp(config.mdp_generator.num_states,
                                                                config.mdp_generator.num_actions,
                                                                config.mdp_generator.dim, config.mdp_generator.gamma,
                                                                config.mdp_generator.seed);
    const std::string mdp_id = config.mdp_path ? std::filesystem::path(*config.mdp_path).stem().string()
                                               : generator_id(config.mdp_generator);
    const OptimalSolution optimum = solve_optimal(mdp);
    const TabularPolicy behavior = build_behavior(mdp, config.behavior, optimum.policy);

    struct Cell {
        Index n;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (Index n : config.n_values)
        for (std::uint64_t s : config.seeds) cells.push_back({n, s});

    std::vector<ExperimentRecord> records(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& cell = cells[i];
            try {
                const OfflineDataset data = collect_dataset(mdp, behavior, cell.n, config.sampling_mode, cell.seed);
                const FogasConfig fc = resolve_solver_config(config.fogas, mdp, cell.n, cell.seed);
                records[i] = solve_and_score(mdp, optimum, data, fc, mdp_id, cell.seed).record;
            } catch (const std::exception& e) {
                records[i] = ExperimentRecord{mdp_id, cell.n, cell.seed, 0, NAN, NAN, NAN, 0.0,
                                              std::string("error: ") + e.what()};
            }
        }
    };
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    SweepResult result;
    result.records = std::move(records);
    for (Index n : config.n_values) {
        std::vector<double> sub, mean_sub;
        for (const ExperimentRecord& r : result.records)
            if (r.n == n && r.status == "ok") {
                sub.push_back(r.suboptimality);
                mean_sub.push_back(r.mean_suboptimality);
            }
        result.summary.push_back({n, median(sub), median(mean_sub), sub.size()});
    }
    for (const ExperimentRecord& r : result.records)
        if (r.status != "ok") result.any_failed = true;
    return result;
}

inline void write_summary(std::ostream& out, const std::vector<SweepSummaryRow>& rows) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(17);
    s << "n,median_suboptimality,median_mean_suboptimality,ok_rows\n";
    for (const auto& r : rows)
        s << r.n << ',' << r.median_suboptimality << ',' << r.median_mean_suboptimality << ',' << r.ok_rows << '\n';
    out << s.str();
}

}  // namespace fogas
