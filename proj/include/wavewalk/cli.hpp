#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wavewalk/config.hpp"
#include "wavewalk/errors.hpp"
#include "wavewalk/estimator.hpp"
#include "wavewalk/verify.hpp"

namespace wavewalk {

//! Process exit codes of the command-line tool
enum ExitCode : int
{
    exit_ok = 0,
    exit_validation = 1,
    exit_runtime = 2,
    exit_verification = 3,
};

//! Write `content` to `path` through a temporary file and a rename
inline void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

namespace detail {

inline nlohmann::json seed_json(const SeedSpec& s)
{
    return {{"base_seed", s.base_seed}, {"stream_id", s.stream_id}, {"sample_index", s.sample_index}};
}

inline nlohmann::json estimate_json(const Estimate& e)
{
    return {{"mean", e.mean}, {"stderr", e.std_error}, {"n", e.n}, {"seed", seed_json(e.seed)}};
}

inline nlohmann::json point_json(const Point& p)
{
    return std::vector<double>(p.coords().begin(), p.coords().end());
}

inline nlohmann::json config_json(const RunConfig& cfg)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : cfg.resolved)
        j[k] = v;
    return j;
}

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
    {
        if (c == '"')
            out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline void emit(const RunConfig& cfg, const std::string& content, std::ostream& out)
{
    if (cfg.output.empty())
        out << content;
    else
        write_atomic(cfg.output, content);
}

}  // namespace detail

//---------------------------------------------------------------------------//
// eval
//---------------------------------------------------------------------------//

inline std::string format_grid(const RunConfig& cfg, const std::vector<GridRow>& rows)
{
    const std::string method = to_string(cfg.estimator.method);
    if (cfg.format == OutputFormat::json)
    {
        nlohmann::json j;
        j["schema"] = "wavewalk/1";
        j["command"] = "eval";
        j["config"] = detail::config_json(cfg);
        j["seed"] = detail::seed_json(cfg.seed);
        j["coupling"] = cfg.coupling == Coupling::common ? "common" : "independent";
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows)
        {
            nlohmann::json row{{"t", r.query.t}, {"x", detail::point_json(r.query.x)},
                               {"method", method}};
            if (r.estimate)
            {
                row["mean"] = r.estimate->mean;
                row["stderr"] = r.estimate->std_error;
                row["n"] = r.estimate->n;
                row["seed"] = detail::seed_json(r.estimate->seed);
            }
            if (cfg.estimator.method == Method::quadrature)
                row["tail_bound"] = r.tail_bound;
            if (!r.error.empty())
                row["error"] = r.error;
            out.push_back(std::move(row));
        }
        j["rows"] = std::move(out);
        return j.dump(2) + "\n";
    }

    std::string csv = canonical_text(cfg, "#! ");
    csv += "t";
    for (std::size_t i = 0; i < cfg.domain.dim(); ++i)
        csv += ",x_" + std::to_string(i + 1);
    csv += ",mean,stderr,n,method,error\n";
    for (const auto& r : rows)
    {
        csv += format_double(r.query.t);
        for (double c : r.query.x.coords())
            csv += "," + format_double(c);
        if (r.estimate)
        {
            csv += "," + format_double(r.estimate->mean) + "," + format_double(r.estimate->std_error)
                   + "," + std::to_string(r.estimate->n);
        }
        else
        {
            csv += ",,,";
        }
        csv += "," + method + "," + detail::csv_escape(r.error) + "\n";
    }
    return csv;
}

/*!
 * Estimate u on the configured grid and write one row per query.
 *
 * Returns exit_runtime when any row failed (the rows still get written).
 */
inline int cmd_eval(const RunConfig& cfg, std::ostream& out)
{
    auto rows = evaluate_grid(cfg.domain, cfg.f, cfg.t_values, cfg.x_values, cfg.n, cfg.estimator,
                              cfg.seed, cfg.execution, cfg.coupling);
    detail::emit(cfg, format_grid(cfg, rows), out);
    for (const auto& r : rows)
    {
        if (!r.error.empty())
            return exit_runtime;
    }
    return exit_ok;
}

//---------------------------------------------------------------------------//
// verify
//---------------------------------------------------------------------------//

struct CheckResult
{
    std::string kind;
    nlohmann::json detail;
    std::string summary;  //!< one line for the console table
    bool passed = false;
    int attempts = 1;
};

namespace detail {

inline std::optional<std::function<double(const QueryPoint&)>> exact_solution(const RunConfig& cfg)
{
    if (cfg.f_kind == "paper" || cfg.f_kind == "exp_cos")
    {
        OracleFamily family = cfg.f_kind == "paper" ? OracleFamily::paper()
                                                    : OracleFamily::exponential_cosine(cfg.f_a);
        return [family](const QueryPoint& q) { return family.exact(q); };
    }
    if (cfg.f_kind == "constant")
    {
        double c = cfg.f(0, Point::zeros(cfg.domain.dim()));
        return [c](const QueryPoint&) { return c; };
    }
    return std::nullopt;
}

inline std::string fmt(double v, int prec = 6)
{
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

inline std::string point_text(const Point& p)
{
    std::string s = "(";
    for (std::size_t i = 0; i < p.dim(); ++i)
        s += (i ? "," : "") + fmt(p[i], 4);
    return s + ")";
}

template<class Check>
auto run_with_retry(const SeedSpec& seed, int& attempts, Check&& check)
{
    attempts = 1;
    auto r = check(seed);
    if (r.passed())
        return r;
    attempts = 2;
    return check(retry_seed(seed));
}

inline nlohmann::json residual_json(const ResidualReport& r)
{
    return {{"t", r.query.t},
            {"x", point_json(r.query.x)},
            {"dtt", estimate_json(r.dtt)},
            {"lap", estimate_json(r.lap)},
            {"residual", estimate_json(r.residual)},
            {"fd_step", r.fd_step},
            {"z", r.z_score}};
}

}  // namespace detail

//! Check preconditions of the selected suite before anything is sampled
inline void validate_verify(const RunConfig& cfg)
{
    const std::string& s = cfg.suite;
    const double h = cfg.fd_step;
    if (s == "oracle" && !detail::exact_solution(cfg))
        throw ConfigError("verify.suite: the oracle suite needs f = paper, exp_cos or constant");
    if (s == "residual" || s == "all")
    {
        for (double t : cfg.t_values)
        {
            if (!(t - h > 0))
                throw ConfigError("verify.fd_step: residual stencil needs t > fd_step");
        }
    }
    if (s == "residual" || s == "harmonicity" || s == "all")
    {
        for (const auto& x : cfg.x_values)
        {
            if (!(cfg.domain.clearance(x) > h))
                throw DomainError("x: finite-difference stencil around " + detail::point_text(x)
                                  + " leaves the domain");
        }
    }
    if (s == "decay" || s == "all")
    {
        if (!(h < 1))
            throw ConfigError("verify.fd_step: decay check needs fd_step < 1");
        for (std::size_t k = 0; k < cfg.decay_t.size(); ++k)
        {
            if (!(cfg.decay_t[k] >= 1) || (k > 0 && !(cfg.decay_t[k] > cfg.decay_t[k - 1])))
                throw ConfigError("verify.decay_t: times must be >= 1 and strictly increasing");
        }
    }
}

/*!
 * Run the configured verification suite.
 *
 * Check k uses stream_id = seed.stream_id + k; a failing check is rerun
 * once with retry_seed. Returns exit_verification if any check still fails.
 */
inline int cmd_verify(const RunConfig& cfg, std::ostream& out)
{
    validate_verify(cfg);
    const std::string& suite = cfg.suite;
    const bool all = suite == "all";
    std::vector<CheckResult> results;
    std::uint64_t next_stream = cfg.seed.stream_id;
    auto check_seed = [&] { return SeedSpec{cfg.seed.base_seed, next_stream++, 0}; };

    if (suite == "oracle" || all)
    {
        if (auto exact = detail::exact_solution(cfg))
        {
            for (const auto& x : cfg.x_values)
            {
                for (double t : cfg.t_values)
                {
                    QueryPoint q{t, x};
                    CheckResult c{"oracle"};
                    auto rep = detail::run_with_retry(check_seed(), c.attempts, [&](const SeedSpec& s) {
                        OracleReport r;
                        r.query = q;
                        r.estimated = estimate_u(cfg.domain, cfg.f, q, cfg.n, cfg.estimator, s,
                                                 cfg.execution);
                        r.exact = (*exact)(q);
                        r.z_score = z_score(r.estimated.mean - r.exact, r.estimated.std_error);
                        return r;
                    });
                    c.passed = rep.passed();
                    c.detail = {{"t", t},
                                {"x", detail::point_json(x)},
                                {"estimate", detail::estimate_json(rep.estimated)},
                                {"exact", rep.exact},
                                {"z", rep.z_score}};
                    c.summary = "t=" + detail::fmt(t) + " x=" + detail::point_text(x) + " est="
                                + detail::fmt(rep.estimated.mean) + " exact=" + detail::fmt(rep.exact)
                                + " z=" + detail::fmt(rep.z_score, 3);
                    results.push_back(std::move(c));
                }
            }
        }
    }

    if (suite == "residual" || all)
    {
        for (const auto& x : cfg.x_values)
        {
            for (double t : cfg.t_values)
            {
                CheckResult c{"residual"};
                auto rep = detail::run_with_retry(check_seed(), c.attempts, [&](const SeedSpec& s) {
                    return residual_wave(cfg.domain, cfg.f, {t, x}, cfg.fd_step, cfg.n,
                                         cfg.estimator, s, cfg.execution);
                });
                c.passed = rep.passed();
                c.detail = detail::residual_json(rep);
                c.summary = "t=" + detail::fmt(t) + " x=" + detail::point_text(x) + " residual="
                            + detail::fmt(rep.residual.mean) + " z=" + detail::fmt(rep.z_score, 3);
                results.push_back(std::move(c));
            }
        }
    }

    if (suite == "harmonicity" || all)
    {
        for (const auto& x : cfg.x_values)
        {
            for (double s0 : cfg.s_values)
            {
                CheckResult c{"harmonicity"};
                auto rep = detail::run_with_retry(check_seed(), c.attempts, [&](const SeedSpec& s) {
                    return check_harmonicity_v(cfg.domain, cfg.f, s0, x, cfg.fd_step, cfg.n,
                                               cfg.estimator.backend(), cfg.estimator, s,
                                               cfg.execution);
                });
                c.passed = rep.passed();
                c.detail = detail::residual_json(rep);
                c.detail.erase("t");
                c.detail["s"] = s0;
                c.summary = "s=" + detail::fmt(s0) + " x=" + detail::point_text(x) + " laplacian="
                            + detail::fmt(rep.residual.mean) + " z=" + detail::fmt(rep.z_score, 3);
                results.push_back(std::move(c));
            }
        }
    }

    if (suite == "decay" || all)
    {
        for (const auto& x : cfg.x_values)
        {
            CheckResult c{"decay"};
            auto rep = detail::run_with_retry(check_seed(), c.attempts, [&](const SeedSpec& s) {
                return check_large_t_decay(cfg.domain, cfg.f, x, cfg.decay_t, cfg.fd_step, cfg.n,
                                           cfg.estimator, s, cfg.execution, cfg.decay_tolerance);
            });
            c.passed = rep.passed();
            nlohmann::json d = nlohmann::json::array();
            for (std::size_t k = 0; k < rep.times.size(); ++k)
                d.push_back({{"t", rep.times[k]}, {"dt", detail::estimate_json(rep.derivatives[k])}});
            c.detail = {{"x", detail::point_json(x)},
                        {"derivatives", d},
                        {"tolerance", rep.tolerance},
                        {"decreasing", rep.decreasing},
                        {"small_at_end", rep.small_at_end}};
            c.summary = "x=" + detail::point_text(x)
                        + " |dt u| at t_max=" + detail::fmt(std::abs(rep.derivatives.back().mean))
                        + (rep.decreasing ? " decreasing" : " not decreasing");
            results.push_back(std::move(c));
        }
    }

    bool passed = !results.empty();
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : results)
    {
        passed = passed && c.passed;
        nlohmann::json j = c.detail;
        j["check"] = c.kind;
        j["passed"] = c.passed;
        j["attempts"] = c.attempts;
        checks.push_back(std::move(j));
    }
    nlohmann::json report{{"schema", "wavewalk/1"},
                          {"command", "verify"},
                          {"suite", suite},
                          {"config", detail::config_json(cfg)},
                          {"seed", detail::seed_json(cfg.seed)},
                          {"retry_seed", detail::seed_json(retry_seed(cfg.seed))},
                          {"checks", checks},
                          {"passed", passed}};

    std::ostringstream table;
    for (const auto& c : results)
    {
        table << std::left << std::setw(12) << c.kind << (c.passed ? "PASS  " : "FAIL  ")
              << c.summary << (c.attempts > 1 ? "  (retried)" : "") << "\n";
    }
    table << (passed ? "verification passed" : "verification FAILED") << "\n";
    out << table.str();
    if (!cfg.output.empty())
        write_atomic(cfg.output, report.dump(2) + "\n");
    return passed ? exit_ok : exit_verification;
}

//---------------------------------------------------------------------------//
// reproduce-paper
//---------------------------------------------------------------------------//

struct PaperRow
{
    QueryPoint query;
    Estimate estimate;
    double exact = 0;
    double z_score = 0;
};

//! The e^y cos s example on (-1, 1) over t in {0.25, 0.5, 1, 2}, x in {-0.5, 0, 0.5}
inline std::vector<PaperRow> reproduce_paper_rows(std::uint64_t n, const SeedSpec& seed,
                                                  const Execution& exec)
{
    Domain domain(Interval(-1, 1));
    BoundaryData f = paper_example(domain);
    EstimatorConfig cfg;
    std::vector<Point> xs{Point{-0.5}, Point{0.0}, Point{0.5}};
    auto rows = evaluate_grid(domain, f, {0.25, 0.5, 1, 2}, xs, n, cfg, seed, exec);
    std::vector<PaperRow> out;
    for (const auto& r : rows)
    {
        if (!r.estimate)
            throw std::runtime_error(r.error);
        PaperRow p{r.query, *r.estimate, std::exp(r.query.x[0] - r.query.t), 0};
        p.z_score = z_score(p.estimate.mean - p.exact, p.estimate.std_error);
        out.push_back(std::move(p));
    }
    return out;
}

inline int cmd_reproduce_paper(std::uint64_t n, const SeedSpec& seed, const Execution& exec,
                               const std::string& output, std::ostream& out)
{
    require_samples(n);
    auto rows = reproduce_paper_rows(n, seed, exec);
    auto all_pass = [](const std::vector<PaperRow>& rs) {
        for (const auto& r : rs)
        {
            if (!(std::abs(r.z_score) < 3))
                return false;
        }
        return true;
    };
    SeedSpec used = seed;
    if (!all_pass(rows))
    {
        used = retry_seed(seed);
        rows = reproduce_paper_rows(n, used, exec);
    }
    bool passed = all_pass(rows);

    std::ostringstream table;
    table << "     t       x      estimate    stderr       exact         z\n";
    table << std::fixed;
    for (const auto& r : rows)
    {
        table << std::setw(6) << std::setprecision(2) << r.query.t << std::setw(8)
              << r.query.x[0] << std::setw(14) << std::setprecision(6) << r.estimate.mean
              << std::setw(10) << r.estimate.std_error << std::setw(12) << r.exact
              << std::setw(10) << std::setprecision(2) << r.z_score << "\n";
    }
    table << "seed " << used.base_seed << ", n " << n << " per point: "
          << (passed ? "all |z| < 3" : "some |z| >= 3") << "\n";
    out << table.str();

    if (!output.empty())
    {
        std::string csv = "#! seed = " + std::to_string(used.base_seed) + "\n#! n = "
                          + std::to_string(n) + "\n#! partitions = "
                          + std::to_string(exec.partitions) + "\n";
        csv += "t,x_1,mean,stderr,n,method,exact,z\n";
        for (const auto& r : rows)
        {
            csv += format_double(r.query.t) + "," + format_double(r.query.x[0]) + ","
                   + format_double(r.estimate.mean) + "," + format_double(r.estimate.std_error)
                   + "," + std::to_string(r.estimate.n) + ",mixed," + format_double(r.exact) + ","
                   + format_double(r.z_score) + "\n";
        }
        write_atomic(output, csv);
    }
    return passed ? exit_ok : exit_verification;
}

//---------------------------------------------------------------------------//
// Entry point
//---------------------------------------------------------------------------//

/*!
 * Parse the command line and run a subcommand.
 *
 * Errors are reported on `err` and mapped to exit codes: invalid input 1,
 * sampler or I/O failure 2, failed verification 3.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Monte Carlo solutions of the wave equation on bounded domains", "wavewalk"};
    app.require_subcommand(1);

    struct Common
    {
        std::string config;
        std::vector<std::string> sets;
        std::optional<std::string> n, seed, partitions, output, format, method;
        std::size_t threads = 0;
    };
    Common eval_opts, verify_opts;
    std::optional<std::string> suite;

    auto add_common = [](CLI::App* cmd, Common& c) {
        cmd->add_option("-c,--config", c.config, "key = value config file (or a previous output)");
        cmd->add_option("-s,--set", c.sets, "override a config key: key=value");
        cmd->add_option("-n,--n", c.n, "samples per estimate");
        cmd->add_option("--seed", c.seed, "base seed");
        cmd->add_option("-p,--partitions", c.partitions, "partition count (fixes the result)");
        cmd->add_option("-j,--threads", c.threads, "worker threads (does not change results)");
        cmd->add_option("-o,--output", c.output, "output file");
        cmd->add_option("-f,--format", c.format, "csv or json");
        cmd->add_option("-m,--method", c.method, "direct, mixed or quadrature");
    };
    auto* eval = app.add_subcommand("eval", "estimate u(t, x) on a grid");
    add_common(eval, eval_opts);
    auto* verify = app.add_subcommand("verify", "run verification checks");
    add_common(verify, verify_opts);
    verify->add_option("--suite", suite, "oracle, residual, harmonicity, decay or all");

    std::uint64_t paper_n = 1'000'000;
    std::uint64_t paper_seed = 42;
    std::size_t paper_partitions = Execution::default_partitions();
    std::size_t paper_threads = 0;
    std::string paper_output;
    auto* paper = app.add_subcommand("reproduce-paper", "reproduce the e^y cos s example");
    paper->add_option("-n,--n", paper_n, "samples per grid point");
    paper->add_option("--seed", paper_seed, "base seed");
    paper->add_option("-p,--partitions", paper_partitions, "partition count");
    paper->add_option("-j,--threads", paper_threads, "worker threads");
    paper->add_option("-o,--output", paper_output, "CSV output file");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }

    auto build = [&](Common& c, bool is_verify) {
        RawConfig raw;
        if (!c.config.empty())
            load_config_file(raw, c.config);
        for (const auto& s : c.sets)
            raw.parse_assignment(s, "--set");
        auto flag = [&](const std::optional<std::string>& v, const char* key, const char* name) {
            if (v)
                raw.set(key, *v, name);
        };
        flag(c.n, "n", "--n");
        flag(c.seed, "seed", "--seed");
        flag(c.partitions, "partitions", "--partitions");
        flag(c.output, "output", "--output");
        flag(c.format, "format", "--format");
        flag(c.method, "method", "--method");
        if (is_verify)
            flag(suite, "verify.suite", "--suite");
        RunConfig cfg = resolve_config(raw);
        cfg.execution.threads = c.threads;
        return cfg;
    };

    try
    {
        if (*eval)
            return cmd_eval(build(eval_opts, false), out);
        if (*verify)
            return cmd_verify(build(verify_opts, true), out);
        if (paper_partitions == 0)
            throw ConfigError("--partitions must be >= 1");
        return cmd_reproduce_paper(paper_n, {paper_seed, 0, 0}, {paper_partitions, paper_threads},
                                   paper_output, out);
    }
    catch (const std::invalid_argument& e)
    {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    }
    catch (const std::domain_error& e)
    {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    }
    catch (const std::exception& e)
    {
        err << "runtime error: " << e.what() << "\n";
        return exit_runtime;
    }
}

}  // namespace wavewalk
