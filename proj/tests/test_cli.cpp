#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "wavewalk/cli.hpp"

using namespace wavewalk;
namespace fs = std::filesystem;

namespace {

struct CliRun
{
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args)
{
    args.insert(args.begin(), "wavewalk");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir
{
  public:
    TempDir()
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("wavewalk-test-" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    fs::path path_;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

//! Data lines of a CSV output (everything after the header)
std::vector<std::string> data_lines(const std::string& csv)
{
    std::vector<std::string> lines;
    std::istringstream in(csv);
    std::string line;
    bool header = false;
    while (std::getline(in, line))
    {
        if (line.starts_with("#!"))
            continue;
        if (!header)
        {
            header = true;
            continue;
        }
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

//---------------------------------------------------------------------------//
// eval
//---------------------------------------------------------------------------//

TEST(Eval, CsvRowsAndHeader)
{
    CliRun r = run({"eval", "-s", "t=0.5,1", "-s", "x=0;0.5", "-n", "2000", "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("#! seed = 3\n"), std::string::npos);
    EXPECT_NE(r.out.find("t,x_1,mean,stderr,n,method,error\n"), std::string::npos);
    auto rows = data_lines(r.out);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_TRUE(rows[0].starts_with("0.5,0,"));
    EXPECT_TRUE(rows[1].starts_with("1,0,"));
    EXPECT_TRUE(rows[2].starts_with("0.5,0.5,"));
    EXPECT_NE(rows[0].find(",2000,mixed,"), std::string::npos);
}

TEST(Eval, JsonOutput)
{
    CliRun r = run({"eval", "-s", "domain=ball", "-s", "domain.center=0,0", "-s", "f=exp_cos", "-s",
                 "f.a=0.6,0.8", "-s", "x=0.1,0.2", "-n", "500", "-f", "json", "-m", "quadrature",
                 "-s", "quadrature.nodes=64"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["schema"], "wavewalk/1");
    EXPECT_EQ(j["config"]["method"], "quadrature");
    ASSERT_EQ(j["rows"].size(), 1u);
    EXPECT_EQ(j["rows"][0]["x"], (std::vector<double>{0.1, 0.2}));
    EXPECT_TRUE(j["rows"][0].contains("tail_bound"));
    EXPECT_EQ(j["rows"][0]["n"], 500);
}

TEST(Eval, SampleCountBelowTwoIsRejected)
{
    TempDir dir;
    std::string out = dir.file("u.csv");
    CliRun r = run({"eval", "-n", "1", "-o", out});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find("n must be ≥ 2"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(out));
    EXPECT_FALSE(fs::exists(out + ".partial"));
}

TEST(Eval, ValidationMessagesNameTheSource)
{
    TempDir dir;
    std::string cfg = dir.file("run.cfg");
    write(cfg, "# comment\nf = paper\nt = 0.5\nx = 2\n");
    CliRun r = run({"eval", "-c", cfg});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find(cfg + ":4: x:"), std::string::npos) << r.err;

    write(cfg, "frobnicate = 3\n");
    r = run({"eval", "-c", cfg});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find(cfg + ":1: unknown key 'frobnicate'"), std::string::npos) << r.err;

    r = run({"eval", "-s", "t=0"});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find("t > 0"), std::string::npos);

    r = run({"eval", "-s", "method=montecarlo"});
    EXPECT_EQ(r.code, exit_validation);

    r = run({"eval", "-s", "domain=ball", "-s", "domain.center=0,0", "-s", "x=0.5"});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find("dimension"), std::string::npos) << r.err;

    r = run({"eval", "-s", "broken"});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find("--set"), std::string::npos);

    EXPECT_EQ(run({"eval", "-c", dir.file("missing.cfg")}).code, exit_validation);
    EXPECT_EQ(run({"frobnicate"}).code, exit_validation);
}

TEST(Eval, RuntimeFailureExitsTwo)
{
    CliRun r = run({"eval", "-s", "wos.max_jumps=1", "-n", "100"});
    EXPECT_EQ(r.code, exit_runtime);
    EXPECT_NE(r.out.find("walk on spheres"), std::string::npos);
}

TEST(Eval, BitwiseReproducibleAcrossThreadCounts)
{
    std::vector<std::string> base{"eval", "-s", "t=0.25,1", "-s", "x=-0.5;0.3", "-n", "3000",
                                  "--seed", "11", "-p", "8"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    };
    CliRun a = with({"-j", "1"});
    CliRun b = with({"-j", "4"});
    CliRun c = with({"-j", "1"});
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.out, c.out);
    EXPECT_NE(a.out, with({"--seed", "12"}).out);
}

TEST(Eval, OutputReproducesFromItsOwnEcho)
{
    TempDir dir;
    for (std::string format : {"csv", "json"})
    {
        std::string first = dir.file("first." + format);
        CliRun a = run({"eval", "-s", "t=0.5", "-s", "x=0.25", "-n", "2500", "--seed", "5", "-f",
                     format, "-m", "direct", "-s", "em.base_step=0.01", "-o", first});
        ASSERT_EQ(a.code, 0) << a.err;
        ASSERT_TRUE(fs::exists(first));
        EXPECT_FALSE(fs::exists(first + ".partial"));

        std::string second = dir.file("second." + format);
        CliRun b = run({"eval", "-c", first, "-o", second});
        ASSERT_EQ(b.code, 0) << b.err;
        std::string s1 = slurp(first), s2 = slurp(second);
        // Only the echoed output path differs.
        auto strip = [](std::string s, const std::string& path) {
            for (auto pos = s.find(path); pos != std::string::npos; pos = s.find(path))
                s.erase(pos, path.size());
            return s;
        };
        EXPECT_EQ(strip(s1, first), strip(s2, second)) << format;
    }
}

//---------------------------------------------------------------------------//
// verify
//---------------------------------------------------------------------------//

TEST(Verify, ResidualOfConstantPasses)
{
    CliRun r = run({"verify", "--suite", "residual", "-s", "f=constant", "-s", "t=1", "-n", "100"});
    EXPECT_EQ(r.code, exit_ok) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_NE(r.out.find("verification passed"), std::string::npos);
}

TEST(Verify, OracleWritesJsonReport)
{
    TempDir dir;
    std::string report = dir.file("report.json");
    CliRun r = run({"verify", "--suite", "oracle", "-s", "t=0.5,1", "-n", "20000", "--seed", "2",
                 "-o", report});
    EXPECT_EQ(r.code, exit_ok) << r.out;
    auto j = nlohmann::json::parse(slurp(report));
    EXPECT_EQ(j["command"], "verify");
    EXPECT_EQ(j["passed"], true);
    ASSERT_EQ(j["checks"].size(), 2u);
    EXPECT_EQ(j["checks"][0]["check"], "oracle");
    EXPECT_EQ(j["retry_seed"]["base_seed"], 3);
}

TEST(Verify, FailingCheckExitsThree)
{
    // Euler-Maruyama with huge steps is far too biased to pass
    CliRun r = run({"verify", "--suite", "oracle", "-s", "f=exp_cos", "-s", "f.a=1", "-s",
                 "x=0", "-s", "t=0.5", "-n", "20000", "-s", "em.base_step=0.5", "-m", "direct",
                 "-s", "em.boundary_slowdown=10"});
    EXPECT_EQ(r.code, exit_verification) << r.out;
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
    EXPECT_NE(r.out.find("(retried)"), std::string::npos);
}

TEST(Verify, PreconditionsAreCheckedUpFront)
{
    CliRun r = run({"verify", "--suite", "residual", "-s", "t=0.01", "-n", "100"});
    EXPECT_EQ(r.code, exit_validation);
    EXPECT_NE(r.err.find("fd_step"), std::string::npos);

    r = run({"verify", "--suite", "harmonicity", "-s", "x=0.99", "-n", "100"});
    EXPECT_EQ(r.code, exit_validation);

    r = run({"verify", "--suite", "oracle", "-s", "f=indicator", "-n", "100"});
    EXPECT_EQ(r.code, exit_validation);

    r = run({"verify", "--suite", "decay", "-s", "verify.decay_t=0.5,2", "-n", "100"});
    EXPECT_EQ(r.code, exit_validation);

    r = run({"verify", "--suite", "everything"});
    EXPECT_EQ(r.code, exit_validation);
}

//---------------------------------------------------------------------------//
// reproduce-paper
//---------------------------------------------------------------------------//

TEST(ReproducePaper, SmallRun)
{
    TempDir dir;
    std::string csv = dir.file("paper.csv");
    CliRun r = run({"reproduce-paper", "-n", "20000", "-o", csv});
    EXPECT_EQ(r.code, exit_ok) << r.out;
    EXPECT_NE(r.out.find("all |z| < 3"), std::string::npos);
    auto rows = data_lines(slurp(csv));
    EXPECT_EQ(rows.size(), 12u);
    EXPECT_EQ(run({"reproduce-paper", "-n", "1"}).code, exit_validation);
}

//---------------------------------------------------------------------------//
// The installed binary
//---------------------------------------------------------------------------//

TEST(Binary, ExitCodes)
{
    auto status = [](const std::string& args) {
        std::string cmd = std::string(WAVEWALK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status("eval -n 200"), 0);
    EXPECT_EQ(status("eval -n 1"), 1);
    EXPECT_EQ(status("eval -n 100 -s wos.max_jumps=1"), 2);
    EXPECT_EQ(status("--help"), 0);
}
