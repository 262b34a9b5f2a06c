// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//
// Statistical checks use 3-stderr bands and may be rerun once with the
// retry seed (base seed + 1); the line says when that happened.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "wavewalk/cli.hpp"

using namespace wavewalk;

namespace {

// Tolerances and sizes fixed by the acceptance criteria
constexpr double kZ = 3;
constexpr std::uint64_t kMillion = 1'000'000;
constexpr double kPaperStderrMax = 2e-3;
constexpr double kPaperRuntimeMax = 300;  // seconds
constexpr double kFdStep = 0.05;
constexpr double kDecayTolerance = 0.01;
constexpr double kBiasSlopeMin = 1.8;

// Fixed partitioning so results do not depend on the machine
const Execution kExec{16, 0};
const SeedSpec kSeed{20261018, 0, 0};

struct Outcome
{
    bool passed = false;
    std::string detail;
};

struct Attempted
{
    Outcome outcome;
    bool retried = false;
};

Attempted with_single_retry(const std::function<Outcome(const SeedSpec&)>& check)
{
    Outcome first = check(kSeed);
    if (first.passed)
        return {first, false};
    return {check(retry_seed(kSeed)), true};
}

std::string fmt(const char* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

bool within(const Estimate& e, double exact, double slack = 0)
{
    return std::max(0.0, std::abs(e.mean - exact) - slack) < kZ * e.std_error
           || (e.std_error == 0 && e.mean == exact);
}

double z_of(const Estimate& e, double exact)
{
    return z_score(e.mean - exact, e.std_error);
}

double pair_z(const Estimate& a, const Estimate& b, double slack = 0)
{
    double diff = std::max(0.0, std::abs(a.mean - b.mean) - slack);
    return z_score(diff, combined_std_error(a.std_error, b.std_error));
}

//---------------------------------------------------------------------------//
// 1. Paper example grid
//---------------------------------------------------------------------------//

Outcome paper_example_grid(const SeedSpec& seed)
{
    auto start = std::chrono::steady_clock::now();
    auto rows = reproduce_paper_rows(kMillion, seed, kExec);
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    double worst_z = 0, worst_se = 0;
    for (const auto& r : rows)
    {
        worst_z = std::max(worst_z, std::abs(r.z_score));
        worst_se = std::max(worst_se, r.estimate.std_error);
    }
    bool ok = rows.size() == 12 && worst_z < kZ && worst_se <= kPaperStderrMax
              && seconds <= kPaperRuntimeMax;
    return {ok, "12 points, max |z| " + fmt("%.2f", worst_z) + ", max stderr "
                    + fmt("%.2e", worst_se) + ", " + fmt("%.0f", seconds) + " s"};
}

//---------------------------------------------------------------------------//
// 2. Exponential martingale with Euler-Maruyama at h0 = 1e-4
//---------------------------------------------------------------------------//

Outcome martingale(const SeedSpec& seed)
{
    Domain d(Interval(-1, 1));
    EmConfig em;
    em.base_step = 1e-4;
    bool ok = true;
    std::string detail;
    std::uint64_t stream = seed.stream_id;
    for (double x : {-0.5, 0.0, 0.5})
    {
        auto stats = exit_statistics(d, Point{x}, kMillion, em, {seed.base_seed, stream++, 0},
                                     kExec, 1, [](const ExitSample& e, std::span<double> out) {
                                         out[0] = std::exp(e.exit_point[0] - e.tau / 2);
                                     });
        Estimate e = stats[0].to_estimate(seed);
        // e^x, and the same number from the closed-form exit law
        double exact = std::exp(x);
        ok = ok && within(e, exact)
             && std::abs(oracle::exponential_martingale_1d(1, x) - exact) < 1e-12;
        detail += "x=" + fmt("%g", x) + " z=" + fmt("%.2f", z_of(e, exact)) + " ";
    }
    return {ok, detail};
}

//---------------------------------------------------------------------------//
// 3. Cauchy characteristic function
//---------------------------------------------------------------------------//

Outcome cauchy_cf(const SeedSpec& seed)
{
    const double ts[] = {0.5, 1.0, 2.0};
    auto stats = accumulate(kMillion, 3, kExec, [&](std::uint64_t i, std::span<double> out) {
        auto s = replicate_stream({seed.base_seed, seed.stream_id, i}, Lane::mixing);
        double x = sample_standard_cauchy(s);
        for (int k = 0; k < 3; ++k)
            out[k] = std::cos(ts[k] * x);
    });
    bool ok = true;
    std::string detail;
    for (int k = 0; k < 3; ++k)
    {
        Estimate e = stats[k].to_estimate(seed);
        // The imaginary part vanishes by symmetry; the real part carries the check.
        double exact = std::exp(-ts[k]);
        ok = ok && within(e, exact);
        detail += "t=" + fmt("%g", ts[k]) + " z=" + fmt("%.2f", z_of(e, exact)) + " ";
    }
    return {ok, detail};
}

//---------------------------------------------------------------------------//
// 4. Wave residual
//---------------------------------------------------------------------------//

BoundaryData disk_table()
{
    BoundaryTable table;
    for (int k = 0; k <= 240; ++k)
        table.s.push_back(-30 + 0.25 * k);
    const int sites = 24;
    for (int p = 0; p < sites; ++p)
    {
        double a = 2 * std::numbers::pi * p / sites;
        table.sites.push_back(Point{std::cos(a), std::sin(a)});
        std::vector<double> row;
        for (double s : table.s)
            row.push_back(std::sin(s + a) * std::cos(a));
        table.values.push_back(row);
    }
    table.bound = 1;
    return tabulated(table, 2);
}

struct ResidualCase
{
    std::string name;
    Domain domain;
    BoundaryData f;
    std::vector<QueryPoint> points;
};

std::vector<ResidualCase> residual_cases()
{
    std::vector<ResidualCase> cases;
    Domain interval(Interval(-1, 1));
    cases.push_back({"paper d=1",
                     interval,
                     paper_example(interval),
                     {{0.5, Point{0.0}},
                      {1.0, Point{0.3}},
                      {2.0, Point{-0.6}},
                      {0.25, Point{0.8}},
                      {1.5, Point{-0.2}}}});
    Domain disk(Ball(Point::zeros(2), 1));
    cases.push_back({"exp_cos d=2",
                     disk,
                     exp_cos(disk, {0.6, 0.8}),
                     {{0.5, Point{0.0, 0.0}},
                      {1.0, Point{0.3, -0.2}},
                      {0.25, Point{-0.5, 0.4}},
                      {2.0, Point{0.1, 0.7}},
                      {0.75, Point{-0.6, -0.3}}}});
    Domain ball(Ball(Point::zeros(3), 1));
    cases.push_back({"exp_cos d=3",
                     ball,
                     exp_cos(ball, {1.0, -0.5, 0.25}),
                     {{0.5, Point{0.0, 0.0, 0.0}},
                      {1.0, Point{0.3, -0.2, 0.1}},
                      {0.25, Point{-0.4, 0.4, 0.2}},
                      {2.0, Point{0.1, 0.2, -0.6}},
                      {0.75, Point{-0.5, -0.3, 0.3}}}});
    cases.push_back({"table d=2",
                     disk,
                     disk_table(),
                     {{0.5, Point{0.0, 0.0}},
                      {1.0, Point{0.3, -0.2}},
                      {0.25, Point{-0.5, 0.4}},
                      {2.0, Point{0.1, 0.7}},
                      {0.75, Point{-0.6, -0.3}}}});
    return cases;
}

Outcome wave_residual()
{
    bool ok = true;
    std::string detail;
    std::uint64_t stream = 0;
    for (const auto& c : residual_cases())
    {
        double worst = 0;
        int retries = 0;
        for (const auto& q : c.points)
        {
            std::uint64_t s = stream++;
            auto first = residual_wave(c.domain, c.f, q, kFdStep, kMillion, EstimatorConfig{},
                                       {kSeed.base_seed, s, 0}, kExec);
            if (!first.passed(kZ))
            {
                ++retries;
                first = residual_wave(c.domain, c.f, q, kFdStep, kMillion, EstimatorConfig{},
                                      retry_seed({kSeed.base_seed, s, 0}), kExec);
            }
            ok = ok && first.passed(kZ);
            worst = std::max(worst, std::abs(first.z_score));
        }
        detail += c.name + " max|z|=" + fmt("%.2f", worst)
                  + (retries ? " (" + std::to_string(retries) + " retried)" : "") + "; ";
    }
    return {ok, detail};
}

//---------------------------------------------------------------------------//
// 5. Cylinder harmonicity
//---------------------------------------------------------------------------//

Outcome harmonicity()
{
    Domain d(Interval(-1, 1));
    BoundaryData f = paper_example(d);
    const std::pair<double, double> points[] = {{0, 0}, {0.5, 0.3}, {-1, -0.5}, {2, 0.6}, {-3, -0.1}};
    bool ok = true;
    double worst = 0;
    int retries = 0;
    std::uint64_t stream = 0;
    for (auto [s0, x] : points)
    {
        SeedSpec seed{kSeed.base_seed, stream++, 0};
        auto r = check_harmonicity_v(d, f, s0, Point{x}, kFdStep, kMillion, Backend::wos,
                                     EstimatorConfig{}, seed, kExec);
        if (!r.passed(kZ))
        {
            ++retries;
            r = check_harmonicity_v(d, f, s0, Point{x}, kFdStep, kMillion, Backend::wos,
                                    EstimatorConfig{}, retry_seed(seed), kExec);
        }
        ok = ok && r.passed(kZ);
        worst = std::max(worst, std::abs(r.z_score));
    }
    return {ok, "5 cylinder points, max |z| " + fmt("%.2f", worst)
                    + (retries ? ", " + std::to_string(retries) + " retried" : "")};
}

//---------------------------------------------------------------------------//
// 6. Representation equivalence
//---------------------------------------------------------------------------//

Outcome equivalence(const SeedSpec& seed)
{
    Domain d(Interval(-1, 1));
    BoundaryData f = paper_example(d);
    std::vector<double> ts{0.25, 0.5, 1, 2};
    std::vector<Point> xs{Point{-0.5}, Point{0.0}, Point{0.5}};
    EstimatorConfig direct, mixed, quad;
    direct.method = Method::direct;
    mixed.method = Method::mixed;
    quad.method = Method::quadrature;
    auto a = evaluate_grid(d, f, ts, xs, kMillion, direct, {seed.base_seed, seed.stream_id, 0}, kExec);
    auto b = evaluate_grid(d, f, ts, xs, kMillion, mixed, {seed.base_seed, seed.stream_id + 1, 0},
                           kExec);
    auto c = evaluate_grid(d, f, ts, xs, 100'000, quad, {seed.base_seed, seed.stream_id + 2, 0},
                           kExec);
    double worst = 0;
    bool ok = true;
    for (std::size_t r = 0; r < a.size(); ++r)
    {
        if (!a[r].estimate || !b[r].estimate || !c[r].estimate)
            return {false, "row failed: " + a[r].error + b[r].error + c[r].error};
        double tail = c[r].tail_bound;
        double z[] = {pair_z(*a[r].estimate, *b[r].estimate),
                      pair_z(*a[r].estimate, *c[r].estimate, tail),
                      pair_z(*b[r].estimate, *c[r].estimate, tail)};
        for (double v : z)
        {
            worst = std::max(worst, v);
            ok = ok && v < kZ;
        }
    }
    return {ok, "12 points x 3 pairs, max combined |z| " + fmt("%.2f", worst)};
}

//---------------------------------------------------------------------------//
// 7. Exit-sampler oracles
//---------------------------------------------------------------------------//

Outcome exit_oracles(const SeedSpec& seed)
{
    EmConfig em;
    em.base_step = 1e-4;
    Domain interval(Interval(-1, 1));
    std::string detail;
    bool ok = true;

    Estimate tau = exit_mean_time(interval, Point{0.0}, kMillion, em,
                                  {seed.base_seed, seed.stream_id, 0}, kExec);
    double tau_exact = oracle::mean_exit_time_1d(0);
    ok = ok && within(tau, tau_exact);
    detail += "E tau(0) z=" + fmt("%.2f", z_of(tau, tau_exact));

    auto right = exit_statistics(interval, Point{0.5}, kMillion, em,
                                 {seed.base_seed, seed.stream_id + 1, 0}, kExec, 1,
                                 [](const ExitSample& e, std::span<double> out) {
                                     out[0] = e.exit_point[0] > 0;
                                 });
    Estimate p = right[0].to_estimate(seed);
    double p_exact = oracle::exit_right_probability_1d(0.5);
    ok = ok && within(p, p_exact);
    detail += ", P(right | 0.5) z=" + fmt("%.2f", z_of(p, p_exact));

    for (std::size_t dim : {2, 3})
    {
        Domain ball(Ball(Point::zeros(dim), 1));
        Estimate e = exit_mean_time(ball, Point::zeros(dim), kMillion, em,
                                    {seed.base_seed, seed.stream_id + dim, 0}, kExec);
        double exact = 1.0 / static_cast<double>(dim);
        ok = ok && within(e, exact);
        detail += ", E tau ball d=" + std::to_string(dim) + " z=" + fmt("%.2f", z_of(e, exact));
    }
    return {ok, detail};
}

//---------------------------------------------------------------------------//
// 8. Large-t decay
//---------------------------------------------------------------------------//

Outcome decay(const SeedSpec& seed)
{
    Domain d(Interval(-1, 1));
    std::vector<double> ts{1, 4, 16, 64};
    DecayReport r = check_large_t_decay(d, paper_example(d), Point{0.0}, ts, kFdStep, kMillion,
                                        EstimatorConfig{}, seed, kExec, kDecayTolerance);
    NonrepresentableReport probe =
        check_nonrepresentable_probe(0.0, default_probe_times(), 0, kFdStep, EstimatorConfig{}, seed,
                                     kExec, kDecayTolerance);
    // Same statistic on cos x cos t sampled at the decay grid itself
    DecayReport on_grid;
    on_grid.times = ts;
    on_grid.tolerance = kDecayTolerance;
    for (double t : ts)
        on_grid.derivatives.push_back(Estimate{-std::cos(0.0) * std::sin(t), 0, 0, {}});
    assess_decay(on_grid);

    bool ok = r.passed() && !probe.analytic.passed() && !on_grid.passed();
    return {ok, "|dt u(64)| = " + fmt("%.2e", std::abs(r.derivatives.back().mean)) + " +- "
                    + fmt("%.1e", r.derivatives.back().std_error)
                    + (r.decreasing ? ", decreasing" : ", NOT decreasing")
                    + "; cos x cos t: " + (probe.analytic.passed() ? "passes (unexpected)" : "violates")};
}

//---------------------------------------------------------------------------//
// 9. Determinism through the command-line tool
//---------------------------------------------------------------------------//

Outcome determinism()
{
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "wavewalk-acceptance";
    fs::create_directories(dir);
    auto run = [&](const std::string& name, const std::string& args) {
        std::string out = (dir / name).string();
        std::string cmd = std::string(WAVEWALK_CLI_PATH) + " eval " + args + " -o " + out
                          + " >/dev/null 2>&1";
        int raw = std::system(cmd.c_str());
        std::ifstream in(out, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        std::string text = s.str();
        // The echoed output path is the only intended difference.
        for (auto pos = text.find(out); pos != std::string::npos; pos = text.find(out))
            text.erase(pos, out.size());
        return std::pair{WIFEXITED(raw) && WEXITSTATUS(raw) == 0, text};
    };
    const std::string common = "-s t=0.25,0.5,1,2 -s 'x=-0.5;0;0.5' -n 200000 --seed 7 -p 8";
    bool ok = true;
    std::string detail;
    for (std::string fmt_name : {"csv", "json"})
    {
        auto a = run("a." + fmt_name, common + " -f " + fmt_name + " -j 1");
        auto b = run("b." + fmt_name, common + " -f " + fmt_name + " -j 1");
        auto c = run("c." + fmt_name, common + " -f " + fmt_name + " -j 4");
        bool same = a.first && b.first && c.first && !a.second.empty() && a.second == b.second
                    && a.second == c.second;
        ok = ok && same;
        detail += fmt_name + (same ? " identical" : " DIFFERS") + " ";
    }
    fs::remove_all(dir);
    return {ok, detail + "(2 runs at -j 1, 1 run at -j 4)"};
}

//---------------------------------------------------------------------------//
// 10. Bias decay
//---------------------------------------------------------------------------//

Outcome bias_decay(const SeedSpec& seed)
{
    Domain d(Interval(-1, 1));
    const double exact = oracle::mean_exit_time_1d(0);
    std::vector<Estimate> bias;
    std::string detail = "EM E tau bias";
    std::uint64_t stream = seed.stream_id;
    for (double h0 : {1e-2, 1e-3, 1e-4})
    {
        EmConfig em;
        em.base_step = h0;
        Estimate e = exit_mean_time(d, Point{0.0}, kMillion, em, {seed.base_seed, stream++, 0}, kExec);
        e.mean -= exact;
        bias.push_back(e);
        detail += " " + fmt("%.1e", e.mean);
    }
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < bias.size(); ++k)
    {
        double band = kZ * combined_std_error(bias[k].std_error, bias[k + 1].std_error);
        monotone = monotone && std::abs(bias[k + 1].mean) <= std::abs(bias[k].mean) + band;
    }

    EstimatorConfig cfg;
    cfg.method = Method::quadrature;
    cfg.quadrature.radius = 200;
    cfg.quadrature.nodes = 3200;
    FdBiasReport fd = fd_bias_study(d, OracleFamily::paper(), {1.0, Point{0.0}}, {0.2, 0.1, 0.05},
                                    10'000, cfg, {seed.base_seed, stream, 0}, kExec);
    bool slope_ok = fd.slope >= kBiasSlopeMin;
    detail += monotone ? " (monotone)" : " (NOT monotone)";
    detail += "; FD bias slope " + fmt("%.3f", fd.slope);
    return {monotone && slope_ok, detail};
}

}  // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        std::function<Attempted()> run;
    };
    auto retrying = [](Outcome (*fn)(const SeedSpec&)) {
        return [fn] { return with_single_retry(fn); };
    };
    auto once = [](Outcome (*fn)()) { return [fn] { return Attempted{fn(), false}; }; };

    const Criterion criteria[] = {
        {1, "paper example grid", retrying(paper_example_grid)},
        {2, "exponential martingale", retrying(martingale)},
        {3, "Cauchy characteristic function", retrying(cauchy_cf)},
        {4, "wave residual", once(wave_residual)},
        {5, "cylinder harmonicity", once(harmonicity)},
        {6, "representation equivalence", retrying(equivalence)},
        {7, "exit-sampler oracles", retrying(exit_oracles)},
        {8, "large-t decay", retrying(decay)},
        {9, "determinism", once(determinism)},
        {10, "bias decay", retrying(bias_decay)},
    };

    int failed = 0;
    for (const auto& c : criteria)
    {
        auto start = std::chrono::steady_clock::now();
        Attempted a;
        try
        {
            a = c.run();
        }
        catch (const std::exception& e)
        {
            a.outcome = {false, std::string("error: ") + e.what()};
        }
        double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !a.outcome.passed;
        std::printf("criterion %2d %s: %s  %s%s  [%.1f s]\n", c.id, c.name,
                    a.outcome.passed ? "PASS" : "FAIL", a.outcome.detail.c_str(),
                    a.retried ? " (after retry)" : "", seconds);
        std::fflush(stdout);
    }
    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed ? 1 : 0;
}
