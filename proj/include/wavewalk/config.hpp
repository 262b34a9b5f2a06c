#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavewalk/boundary_data.hpp"
#include "wavewalk/errors.hpp"
#include "wavewalk/estimator.hpp"
#include "wavewalk/geometry.hpp"
#include "wavewalk/stats.hpp"

namespace wavewalk {

//! Shortest decimal text that parses back to the same double
inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

//---------------------------------------------------------------------------//
/*!
 * Flat key = value configuration with per-key origins for diagnostics.
 *
 * Text syntax: one "key = value" per line, '#' starts a comment, blank
 * lines are ignored. Later assignments override earlier ones.
 */
class RawConfig
{
  public:
    struct Entry
    {
        std::string value;
        std::string origin;  //!< "file:line" or "--set"
    };

    void set(const std::string& key, const std::string& value, const std::string& origin)
    {
        entries_[key] = Entry{value, origin};
    }

    void parse_text(std::string_view text, const std::string& source)
    {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos)
                end = text.size();
            std::string_view line = text.substr(pos, end - pos);
            pos = end + 1;
            ++line_no;
            std::string origin = source + ":" + std::to_string(line_no);
            if (auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (line.empty())
                continue;
            auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(origin + ": expected 'key = value'");
            auto key = trim(line.substr(0, eq));
            auto value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ": missing key");
            set(std::string(key), std::string(value), origin);
        }
    }

    //! Parse "key=value" as given on the command line
    void parse_assignment(std::string_view text, const std::string& origin)
    {
        auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(origin + ": expected key=value, got '" + std::string(text) + "'");
        set(std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))), origin);
    }

    const Entry* find(const std::string& key) const
    {
        auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

    static std::string_view trim(std::string_view s)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

  private:
    std::map<std::string, Entry> entries_;
};

/*!
 * Load a configuration file.
 *
 * Besides plain key = value text this accepts the outputs of the tool
 * itself: a CSV whose leading "#! key = value" lines echo the resolved
 * configuration, or a JSON report with a "config" object.
 */
inline void load_config_file(RawConfig& raw, const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    std::string first(RawConfig::trim(std::string_view(text).substr(0, text.find('\n'))));
    if (!first.empty() && first.front() == '{')
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ConfigError(path + ": not valid JSON: " + e.what());
        }
        if (!j.contains("config") || !j["config"].is_object())
            throw ConfigError(path + ": JSON file has no \"config\" object");
        for (const auto& [key, value] : j["config"].items())
        {
            if (!value.is_string())
                throw ConfigError(path + ": config value of '" + key + "' must be a string");
            raw.set(key, value.get<std::string>(), path + ":config." + key);
        }
        return;
    }
    if (first.starts_with("#!"))
    {
        std::string echoed;
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line) && line.starts_with("#!"))
            echoed += line.substr(2) + "\n";
        raw.parse_text(echoed, path);
        return;
    }
    raw.parse_text(text, path);
}

//---------------------------------------------------------------------------//
// Resolved run configuration
//---------------------------------------------------------------------------//

enum class OutputFormat
{
    csv,
    json,
};

struct RunConfig
{
    // Canonical key = value text of every resolved setting
    std::map<std::string, std::string> resolved;

    Domain domain = Domain(Interval(-1, 1));
    std::string f_kind = "paper";
    std::vector<double> f_a;
    BoundaryData f = constant(0);
    EstimatorConfig estimator;
    std::vector<double> t_values;
    std::vector<Point> x_values;
    std::uint64_t n = 100'000;
    SeedSpec seed;
    Coupling coupling = Coupling::common;
    Execution execution;
    std::string output;
    OutputFormat format = OutputFormat::csv;

    // verify
    std::string suite = "oracle";
    double fd_step = 0.05;
    std::vector<double> s_values;
    std::vector<double> decay_t;
    double decay_tolerance = 0.01;
};

namespace detail {

//! ConfigError already prefixed with the origin of its key
class KeyError : public ConfigError
{
  public:
    using ConfigError::ConfigError;
};

struct Reader
{
    const RawConfig& raw;
    std::map<std::string, std::string>& resolved;

    std::string where(const std::string& key) const
    {
        const auto* e = raw.find(key);
        return e ? e->origin + ": " : std::string("default ");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const
    {
        // Messages that already name the key are not prefixed twice.
        bool named = msg.starts_with(key + " ") || msg.starts_with(key + ":");
        throw KeyError(where(key) + (named ? "" : key + ": ") + msg);
    }

    //! Run fn, attributing library validation errors to `key`
    template<class F>
    auto guard(const std::string& key, F&& fn) const
    {
        try
        {
            return fn();
        }
        catch (const KeyError&)
        {
            throw;
        }
        catch (const std::invalid_argument& e)
        {
            fail(key, e.what());
        }
    }

    std::string str(const std::string& key, const std::string& fallback)
    {
        const auto* e = raw.find(key);
        std::string v = e ? e->value : fallback;
        resolved[key] = v;
        return v;
    }

    std::optional<std::string> opt_str(const std::string& key)
    {
        const auto* e = raw.find(key);
        if (!e || e->value.empty())
            return std::nullopt;
        resolved[key] = e->value;
        return e->value;
    }

    double parse_double(const std::string& key, std::string_view text) const
    {
        text = RawConfig::trim(text);
        double v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
            fail(key, "'" + std::string(text) + "' is not a finite number");
        return v;
    }

    std::uint64_t parse_count(const std::string& key, std::string_view text) const
    {
        text = RawConfig::trim(text);
        std::uint64_t v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec == std::errc() && res.ptr == text.data() + text.size())
            return v;
        // Accept exact scientific notation such as 1e6.
        double d = parse_double(key, text);
        if (!(d >= 0 && d < 1.8e19 && d == std::floor(d)))
            fail(key, "'" + std::string(text) + "' is not a non-negative integer");
        return static_cast<std::uint64_t>(d);
    }

    double num(const std::string& key, double fallback)
    {
        const auto* e = raw.find(key);
        double v = e ? parse_double(key, e->value) : fallback;
        resolved[key] = format_double(v);
        return v;
    }

    std::optional<double> opt_num(const std::string& key)
    {
        const auto* e = raw.find(key);
        if (!e || e->value.empty())
            return std::nullopt;
        double v = parse_double(key, e->value);
        resolved[key] = format_double(v);
        return v;
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback)
    {
        const auto* e = raw.find(key);
        std::uint64_t v = e ? parse_count(key, e->value) : fallback;
        resolved[key] = std::to_string(v);
        return v;
    }

    //! Comma list of numbers; an item "a:b:k" expands to k evenly spaced values
    std::vector<double> list(const std::string& key, const std::string& fallback)
    {
        const auto* e = raw.find(key);
        std::string text = e ? e->value : fallback;
        std::vector<double> out;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            std::size_t end = text.find(',', pos);
            if (end == std::string::npos)
                end = text.size();
            std::string item(RawConfig::trim(std::string_view(text).substr(pos, end - pos)));
            pos = end + 1;
            if (item.empty())
                fail(key, "empty list item");
            auto c1 = item.find(':');
            if (c1 == std::string::npos)
            {
                out.push_back(parse_double(key, item));
                continue;
            }
            auto c2 = item.find(':', c1 + 1);
            if (c2 == std::string::npos)
                fail(key, "range must be lo:hi:count");
            double lo = parse_double(key, item.substr(0, c1));
            double hi = parse_double(key, item.substr(c1 + 1, c2 - c1 - 1));
            std::uint64_t k = parse_count(key, item.substr(c2 + 1));
            if (k < 2)
                fail(key, "range needs at least 2 values");
            for (std::uint64_t i = 0; i < k; ++i)
                out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
        }
        std::string canon;
        for (std::size_t i = 0; i < out.size(); ++i)
            canon += (i ? "," : "") + format_double(out[i]);
        resolved[key] = canon;
        return out;
    }

    //! Points separated by ';', coordinates by ','
    std::vector<Point> points(const std::string& key, const std::string& fallback)
    {
        const auto* e = raw.find(key);
        std::string text = e ? e->value : fallback;
        std::vector<Point> out;
        std::string canon;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            std::size_t end = text.find(';', pos);
            if (end == std::string::npos)
                end = text.size();
            std::string item(RawConfig::trim(std::string_view(text).substr(pos, end - pos)));
            pos = end + 1;
            std::vector<double> coords;
            std::size_t p = 0;
            while (p <= item.size())
            {
                std::size_t q = item.find(',', p);
                if (q == std::string::npos)
                    q = item.size();
                coords.push_back(parse_double(key, item.substr(p, q - p)));
                p = q + 1;
            }
            for (std::size_t i = 0; i < coords.size(); ++i)
                canon += (i ? "," : "") + format_double(coords[i]);
            canon += ";";
            out.emplace_back(std::move(coords));
        }
        canon.pop_back();
        resolved[key] = canon;
        return out;
    }
};

inline std::string default_center(const Domain& domain)
{
    struct
    {
        std::vector<double> operator()(const Interval& s) const { return {(s.lo() + s.hi()) / 2}; }
        std::vector<double> operator()(const Ball& s) const
        {
            auto c = s.center().coords();
            return {c.begin(), c.end()};
        }
        std::vector<double> operator()(const Box& s) const
        {
            std::vector<double> c;
            for (std::size_t i = 0; i < s.dim(); ++i)
                c.push_back((s.lo()[i] + s.hi()[i]) / 2);
            return c;
        }
    } center;
    auto c = std::visit(center, domain.shape());
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i)
        out += (i ? "," : "") + format_double(c[i]);
    return out;
}

}  // namespace detail

inline const std::vector<std::string>& known_config_keys()
{
    static const std::vector<std::string> keys{
        "domain", "domain.lo", "domain.hi", "domain.center", "domain.radius",
        "f", "f.a", "f.c", "f.axis", "f.threshold", "f.table",
        "method", "t", "x", "n", "seed", "stream", "partitions", "coupling",
        "em.base_step", "em.boundary_slowdown", "em.max_steps", "em.snap",
        "wos.epsilon", "wos.max_jumps",
        "quadrature.radius", "quadrature.nodes", "quadrature.tolerance", "quadrature.backend",
        "output", "format",
        "verify.suite", "verify.fd_step", "verify.s", "verify.decay_t", "verify.decay_tolerance",
    };
    return keys;
}

/*!
 * Validate a raw configuration and build the run settings.
 *
 * Every check happens here, before any sampling; errors name the origin of
 * the offending key.
 */
inline RunConfig resolve_config(const RawConfig& raw)
{
    for (const auto& [key, entry] : raw.entries())
    {
        const auto& known = known_config_keys();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(entry.origin + ": unknown key '" + key + "'");
    }

    RunConfig cfg;
    detail::Reader rd{raw, cfg.resolved};

    // Domain
    std::string shape = rd.str("domain", "interval");
    if (shape == "interval")
    {
        double lo = rd.num("domain.lo", -1);
        double hi = rd.num("domain.hi", 1);
        cfg.domain = rd.guard("domain", [&] { return Domain(Interval(lo, hi)); });
    }
    else if (shape == "ball")
    {
        double radius = rd.num("domain.radius", 1);
        auto center = rd.points("domain.center", "0");
        if (center.size() != 1)
            rd.fail("domain.center", "expected a single point");
        cfg.domain = rd.guard("domain.radius", [&] { return Domain(Ball(center[0], radius)); });
    }
    else if (shape == "box")
    {
        auto lo = rd.points("domain.lo", "0");
        auto hi = rd.points("domain.hi", "1");
        if (lo.size() != 1 || hi.size() != 1)
            rd.fail("domain.lo", "box corners must be single points");
        cfg.domain = rd.guard("domain.hi", [&] { return Domain(Box(lo[0], hi[0])); });
    }
    else
    {
        rd.fail("domain", "unknown shape '" + shape + "' (interval, ball, box)");
    }
    const std::size_t dim = cfg.domain.dim();

    // Boundary data
    cfg.f_kind = rd.str("f", "paper");
    if (cfg.f_kind == "paper")
    {
        cfg.f = rd.guard("f", [&] { return paper_example(cfg.domain); });
        cfg.f_a = {1.0};
    }
    else if (cfg.f_kind == "exp_cos")
    {
        cfg.f_a = rd.list("f.a", "1");
        cfg.f = rd.guard("f.a", [&] { return exp_cos(cfg.domain, cfg.f_a); });
    }
    else if (cfg.f_kind == "constant")
    {
        cfg.f = constant(rd.num("f.c", 1));
    }
    else if (cfg.f_kind == "indicator")
    {
        std::uint64_t axis = rd.count("f.axis", 0);
        if (axis >= dim)
            rd.fail("f.axis", "axis out of range for the domain");
        cfg.f = indicator(axis, rd.num("f.threshold", 0));
    }
    else if (cfg.f_kind == "table")
    {
        auto path = rd.opt_str("f.table");
        if (!path)
            rd.fail("f.table", "tabulated data needs a file path");
        cfg.f = rd.guard("f.table", [&] { return tabulated(load_table(*path), dim); });
    }
    else
    {
        rd.fail("f", "unknown boundary data '" + cfg.f_kind
                         + "' (paper, exp_cos, constant, indicator, table)");
    }

    // Estimator
    std::string method = rd.str("method", "mixed");
    if (method == "direct")
        cfg.estimator.method = Method::direct;
    else if (method == "mixed")
        cfg.estimator.method = Method::mixed;
    else if (method == "quadrature")
        cfg.estimator.method = Method::quadrature;
    else
        rd.fail("method", "unknown method '" + method + "' (direct, mixed, quadrature)");

    EmConfig em;
    em.base_step = rd.num("em.base_step", em.base_step);
    em.boundary_slowdown = rd.num("em.boundary_slowdown", em.boundary_slowdown);
    em.max_steps = rd.count("em.max_steps", em.max_steps);
    em.snap = rd.opt_num("em.snap");
    WosConfig wos;
    wos.epsilon = rd.opt_num("wos.epsilon");
    wos.max_jumps = rd.count("wos.max_jumps", wos.max_jumps);
    QuadratureSpec quad;
    quad.radius = rd.num("quadrature.radius", quad.radius);
    quad.nodes = rd.count("quadrature.nodes", quad.nodes);
    quad.tolerance = rd.opt_num("quadrature.tolerance");
    std::string qb = rd.str("quadrature.backend", "wos");
    if (qb == "wos")
        quad.backend = Backend::wos;
    else if (qb == "em")
        quad.backend = Backend::em;
    else
        rd.fail("quadrature.backend", "expected em or wos");
    cfg.estimator.em = em;
    cfg.estimator.wos = wos;
    cfg.estimator.quadrature = quad;
    rd.guard("em.base_step", [&] { em.validate(); });
    rd.guard("wos.epsilon", [&] { wos.validate(); });
    if (cfg.estimator.method == Method::quadrature)
        rd.guard("quadrature.nodes", [&] { quad.validate(); });

    // Queries
    cfg.t_values = rd.list("t", "0.5");
    cfg.x_values = rd.points("x", detail::default_center(cfg.domain));
    for (const auto& x : cfg.x_values)
    {
        if (x.dim() != dim)
            rd.fail("x", "point dimension " + std::to_string(x.dim())
                             + " does not match the domain dimension " + std::to_string(dim));
        if (!contains(cfg.domain, x))
            rd.fail("x", "query point must lie strictly inside the domain");
    }
    for (double t : cfg.t_values)
    {
        if (!(t > 0))
            rd.fail("t", "u-queries require t > 0");
    }
    cfg.n = rd.count("n", 100'000);
    if (cfg.n < 2)
        rd.fail("n", "n must be ≥ 2");
    cfg.seed.base_seed = rd.count("seed", 0);
    cfg.seed.stream_id = rd.count("stream", 0);
    cfg.execution.partitions = rd.count("partitions", Execution::default_partitions());
    if (cfg.execution.partitions == 0)
        rd.fail("partitions", "partitions must be >= 1");
    std::string coupling = rd.str("coupling", "common");
    if (coupling == "common")
        cfg.coupling = Coupling::common;
    else if (coupling == "independent")
        cfg.coupling = Coupling::independent;
    else
        rd.fail("coupling", "expected common or independent");

    // Output
    if (auto out = rd.opt_str("output"))
        cfg.output = *out;
    std::string format = rd.str("format", "csv");
    if (format == "csv")
        cfg.format = OutputFormat::csv;
    else if (format == "json")
        cfg.format = OutputFormat::json;
    else
        rd.fail("format", "expected csv or json");

    // Verification
    cfg.suite = rd.str("verify.suite", "oracle");
    if (cfg.suite != "oracle" && cfg.suite != "residual" && cfg.suite != "harmonicity"
        && cfg.suite != "decay" && cfg.suite != "all")
        rd.fail("verify.suite", "expected oracle, residual, harmonicity, decay or all");
    cfg.fd_step = rd.num("verify.fd_step", 0.05);
    if (!(cfg.fd_step > 0))
        rd.fail("verify.fd_step", "fd_step must be positive");
    cfg.s_values = rd.list("verify.s", "0");
    cfg.decay_t = rd.list("verify.decay_t", "1,4,16,64");
    cfg.decay_tolerance = rd.num("verify.decay_tolerance", 0.01);
    return cfg;
}

//! "key = value" lines of the resolved configuration, sorted by key
inline std::string canonical_text(const RunConfig& cfg, std::string_view prefix = "")
{
    std::string out;
    for (const auto& [key, value] : cfg.resolved)
        out += std::string(prefix) + key + " = " + value + "\n";
    return out;
}

}  // namespace wavewalk
