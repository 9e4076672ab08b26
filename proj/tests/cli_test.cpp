// Drives the built command-line binary through its subcommands.

#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string output;  // stdout and stderr
};

Result run(const std::string& args) {
    const std::string cmd = std::string(FOGAS_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream s(text);
    for (std::string line; std::getline(s, line);) out.push_back(line);
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("fogas_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return (dir / name).string(); }

    void make_mdp(const std::string& name = "m.json", int seed = 1) {
        ASSERT_EQ(run("generate --states 5 --actions 3 --dim 4 --gamma 0.9 --seed " + std::to_string(seed) +
                      " --out " + p(name))
                      .code,
                  0);
    }
    void make_data(fogas::Index n, const std::string& extra = "") {
        ASSERT_EQ(run("collect --mdp " + p("m.json") + " --n " + std::to_string(n) + " --seed 3 --out " +
                      p("d.csv") + " " + extra)
                      .code,
                  0);
    }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, GenerateWritesValidFile) {
    const Result r = run("generate --states 5 --actions 3 --dim 4 --gamma 0.9 --seed 1 --out " + p("m.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("R = "), std::string::npos);
    EXPECT_NE(r.output.find("d = 4"), std::string::npos);
    EXPECT_EQ(run("validate --mdp " + p("m.json")).code, 0);
    EXPECT_TRUE(fogas::load_mdp(p("m.json")) == fogas::generate_linear_mdp(5, 3, 4, 0.9, 1));
}

TEST_F(Cli, GenerateIsByteIdentical) {
    make_mdp("a.json");
    make_mdp("b.json");
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
}

TEST_F(Cli, GenerateRejectsZeroDim) {
    const Result r = run("generate --states 5 --actions 3 --dim 0 --gamma 0.9 --seed 1 --out " + p("m.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("dim must be ≥ 1"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("generate --states 5").code, 2);
    EXPECT_EQ(run("generate --states x --actions 3 --dim 4 --gamma 0.9 --out " + p("m.json")).code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, ValidateReportsViolations) {
    const fogas::LinearMdp base = fogas::generate_linear_mdp(3, 2, 2, 0.9, 0);
    fogas::Matrix phi = base.phi();
    phi.row(1) *= 1.5;
    fogas::save_mdp(p("bad.json"), fogas::LinearMdp(3, 2, phi, base.psi(), base.omega(), 0.9, 0));
    const Result r = run("validate --mdp " + p("bad.json"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("row-sum"), std::string::npos) << r.output;
    EXPECT_EQ(run("validate --mdp " + p("missing.json")).code, 1);
}

TEST_F(Cli, CollectWritesRequestedRows) {
    make_mdp();
    make_data(10);
    const auto rows = lines(slurp(dir / "d.csv"));
    ASSERT_EQ(rows.size(), 11u);
    EXPECT_EQ(rows[0], "x,a,r,x_next");
    EXPECT_EQ(run("collect --mdp " + p("nope.json") + " --n 10 --out " + p("e.csv")).code, 1);
    EXPECT_EQ(run("collect --mdp " + p("m.json") + " --n 10 --behavior eps:3 --out " + p("e.csv")).code, 2);
    EXPECT_EQ(run("collect --mdp " + p("m.json") + " --n 10 --mode sideways --out " + p("e.csv")).code, 2);
}

TEST_F(Cli, CollectEpsZeroFollowsOptimalPolicy) {
    make_mdp();
    make_data(400, "--behavior eps:0 --mode occupancy");
    const fogas::LinearMdp mdp = fogas::load_mdp(p("m.json"));
    const fogas::TabularPolicy opt = fogas::solve_optimal(mdp).policy;
    for (const auto& t : fogas::load_dataset(p("d.csv")).transitions) EXPECT_EQ(opt(t.x, t.a), 1.0);
}

TEST_F(Cli, SolveSingleIterationAndDeterminism) {
    make_mdp();
    make_data(200);
    const std::string base = "solve --mdp " + p("m.json") + " --data " + p("d.csv") + " --auto-tune --T 1 --seed 4 ";
    ASSERT_EQ(run(base + "--results " + p("r.csv")).code, 0);
    ASSERT_EQ(run(base + "--results " + p("r.csv")).code, 0);
    const auto rows = lines(slurp(dir / "r.csv"));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], "mdp_id,n,seed,T,coverage_ratio,suboptimality,mean_suboptimality,wall_time_ms,status");

    auto drop_time = [](const std::string& row) {
        std::vector<std::string> f;
        std::stringstream s(row);
        for (std::string c; std::getline(s, c, ',');) f.push_back(c);
        f[7].clear();
        return f;
    };
    EXPECT_EQ(drop_time(rows[1]), drop_time(rows[2]));
    const auto fields = drop_time(rows[1]);
    EXPECT_EQ(fields[0], "m");
    EXPECT_EQ(fields[1], "200");
    EXPECT_EQ(fields[3], "1");
    EXPECT_EQ(fields[8], "ok");

    const fogas::LinearMdp mdp = fogas::load_mdp(p("m.json"));
    const auto opt = fogas::solve_optimal(mdp);
    const double expected = opt.evaluation.return_value -
                            fogas::evaluate_policy(mdp, fogas::TabularPolicy::uniform(5, 3)).return_value;
    EXPECT_NEAR(std::stod(fields[5]), expected, 1e-12);
}

TEST_F(Cli, SolveArgumentErrors) {
    make_mdp();
    make_data(50);
    const std::string base = "solve --mdp " + p("m.json") + " --data " + p("d.csv") + " ";
    EXPECT_EQ(run(base).code, 2);
    EXPECT_EQ(run(base + "--auto-tune --rates 1,0,1,1 --T 3").code, 2);
    EXPECT_EQ(run(base + "--rates 1,0,1 --T 3").code, 2);
    EXPECT_EQ(run(base + "--rates 1,0,1,1").code, 2);
    EXPECT_EQ(run(base + "--rates 0.1,0,0.1,-1 --T 3").code, 2);
    EXPECT_EQ(run(base + "--rates 0.1,0,0.1,0.1 --T 3").code, 0);
}

TEST_F(Cli, SolveAbortReportsIteration) {
    make_mdp();
    make_data(50);
    const Result r = run("solve --mdp " + p("m.json") + " --data " + p("d.csv") + " --rates 0.1,0,1e308,1 --T 20");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("aborted at iteration"), std::string::npos) << r.output;
}

TEST_F(Cli, DiagnoseRecordedRun) {
    make_mdp();
    make_data(512);
    ASSERT_EQ(run("solve --mdp " + p("m.json") + " --data " + p("d.csv") +
                  " --auto-tune --T 50 --record-trajectory --out " + p("run.json"))
                  .code,
              0);
    const Result r =
        run("diagnose --mdp " + p("m.json") + " --data " + p("d.csv") + " --run " + p("run.json") + " --out " + p("g.csv"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rows = lines(slurp(dir / "g.csv"));
    ASSERT_EQ(rows.size(), 2u);
    std::vector<double> v;
    std::stringstream s(rows[1]);
    for (std::string c; std::getline(s, c, ',');) v.push_back(std::stod(c));
    ASSERT_EQ(v.size(), 8u);
    EXPECT_LE(v[5], 1e-8);
    EXPECT_LE(v[6], 1e-8);
}

TEST_F(Cli, DiagnoseWithoutTrajectory) {
    make_mdp();
    make_data(64);
    ASSERT_EQ(run("solve --mdp " + p("m.json") + " --data " + p("d.csv") + " --auto-tune --T 5 --out " + p("run.json")).code, 0);
    const Result r = run("diagnose --mdp " + p("m.json") + " --data " + p("d.csv") + " --run " + p("run.json"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--record-trajectory"), std::string::npos);
}

TEST_F(Cli, DiagnoseZeroRewardAndManualRadius) {
    const fogas::LinearMdp base = fogas::generate_linear_mdp(5, 3, 4, 0.9, 2);
    fogas::save_mdp(p("m.json"), fogas::LinearMdp(5, 3, base.phi(), base.psi(), fogas::Vector::Zero(4), 0.9, 0));
    make_data(256);
    ASSERT_EQ(run("solve --mdp " + p("m.json") + " --data " + p("d.csv") +
                  " --auto-tune --T 20 --record-trajectory --out " + p("run.json"))
                  .code,
              0);
    Result r = run("diagnose --mdp " + p("m.json") + " --data " + p("d.csv") + " --run " + p("run.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rows = lines(r.output);
    EXPECT_NEAR(std::stod(rows.at(1).substr(0, rows[1].find(','))), 0.0, 1e-10);

    make_mdp();
    ASSERT_EQ(run("solve --mdp " + p("m.json") + " --data " + p("d.csv") +
                  " --auto-tune --T 20 --D-theta 4 --record-trajectory --out " + p("run2.json"))
                  .code,
              0);
    r = run("diagnose --mdp " + p("m.json") + " --data " + p("d.csv") + " --run " + p("run2.json"));
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("not asserted"), std::string::npos);
    EXPECT_NE(r.output.find("identity_residual"), std::string::npos);
}

TEST_F(Cli, SweepWritesTablesAndIsReproducible) {
    std::ofstream(dir / "c.json") << R"({"n_values": [64, 128], "seeds": [0, 1], "fogas": {"T_cap": 100}, "output_dir": ")"
                                  << p("out") << R"("})";
    ASSERT_EQ(run("sweep --config " + p("c.json")).code, 0);
    const std::string first = slurp(dir / "out" / "results.csv");
    ASSERT_EQ(run("sweep --config " + p("c.json") + " --output-dir " + p("out2")).code, 0);
    const std::string second = slurp(dir / "out2" / "results.csv");
    auto drop_time = [](const std::string& text) {
        std::string out;
        for (const auto& row : lines(text)) {
            std::vector<std::string> f;
            std::stringstream s(row);
            for (std::string c; std::getline(s, c, ',');) f.push_back(c);
            f[7].clear();
            for (const auto& c : f) out += c + ",";
            out += "\n";
        }
        return out;
    };
    EXPECT_EQ(lines(first).size(), 5u);
    EXPECT_EQ(drop_time(first), drop_time(second));
    EXPECT_EQ(lines(slurp(dir / "out" / "summary.csv")).size(), 3u);
}

TEST_F(Cli, SweepUsageAndFailures) {
    std::ofstream(dir / "empty.json") << R"({"seeds": []})";
    EXPECT_EQ(run("sweep --config " + p("empty.json")).code, 2);
    std::ofstream(dir / "unknown.json") << R"({"seed": [1]})";
    EXPECT_EQ(run("sweep --config " + p("unknown.json")).code, 2);
    std::ofstream(dir / "bad.json") << R"({"n_values": [16], "seeds": [0], "output_dir": ")" << p("o")
                                    << R"(", "fogas": {"auto_tune": false, "T": 3, "eta": 0.1, "beta": -1}})";
    const Result r = run("sweep --config " + p("bad.json"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(slurp(dir / "o" / "results.csv").find("error:"), std::string::npos);
}
