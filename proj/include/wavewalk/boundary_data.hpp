#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavewalk/errors.hpp"
#include "wavewalk/geometry.hpp"

namespace wavewalk {

//---------------------------------------------------------------------------//
/*!
 * Boundary evolution data f(s, y) on R x (boundary of D).
 *
 * Every evaluation is checked against the declared bound; a value outside
 * [-bound, bound] (or NaN) aborts the run with BoundViolation.
 */
class BoundaryData
{
  public:
    using Function = std::function<double(double, const Point&)>;

    BoundaryData(std::string name, Function eval, double bound)
        : name_(std::move(name)), eval_(std::move(eval)), bound_(bound)
    {
        if (!eval_)
            throw std::invalid_argument("boundary data needs a function");
        if (!(bound_ > 0 && std::isfinite(bound_)))
            throw std::invalid_argument("boundary data bound must be positive and finite");
    }

    double operator()(double s, const Point& y) const
    {
        double value = eval_(s, y);
        if (!(std::abs(value) <= bound_))
        {
            throw BoundViolation("boundary data '" + name_ + "' returned "
                                 + std::to_string(value) + " at s=" + std::to_string(s)
                                 + ", exceeding its bound " + std::to_string(bound_));
        }
        return value;
    }

    const std::string& name() const noexcept { return name_; }
    double bound() const noexcept { return bound_; }

    //! True when f does not depend on s (lets tests reason about reductions)
    bool time_independent() const noexcept { return time_independent_; }
    BoundaryData& mark_time_independent()
    {
        time_independent_ = true;
        return *this;
    }

  private:
    std::string name_;
    Function eval_;
    double bound_;
    bool time_independent_ = false;
};

//! sup of <a, y> over the closure of D
inline double support(const Domain& domain, std::span<const double> a)
{
    require_dim(domain.dim(), Point(std::vector<double>(a.begin(), a.end())));
    struct
    {
        std::span<const double> a;
        double operator()(const Interval& s) const
        {
            return std::max(a[0] * s.lo(), a[0] * s.hi());
        }
        double operator()(const Ball& s) const
        {
            double dot = 0;
            for (std::size_t i = 0; i < a.size(); ++i)
                dot += a[i] * s.center()[i];
            return dot + s.radius() * norm(a);
        }
        double operator()(const Box& s) const
        {
            double sum = 0;
            for (std::size_t i = 0; i < a.size(); ++i)
                sum += std::max(a[i] * s.lo()[i], a[i] * s.hi()[i]);
            return sum;
        }
    } h{a};
    return std::visit(h, domain.shape());
}

//---------------------------------------------------------------------------//
// Built-in families
//---------------------------------------------------------------------------//

/*!
 * f(s, y) = exp(<a, y>) cos(|a| s).
 *
 * Generates u(t, x) = exp(<a, x> - |a| t): exp(<a, B_t> - |a|^2 t / 2) is a
 * bounded martingale up to the exit time, so the s-average over the normal
 * offset gives v(s, x) = exp(<a, x>) cos(|a| s), and the Cauchy average
 * E cos(|a| t X) = exp(-|a| t).
 */
inline BoundaryData exp_cos(const Domain& domain, std::vector<double> a)
{
    if (a.size() != domain.dim())
        throw DimensionMismatch("exp_cos wave vector must match the domain dimension");
    double freq = norm(a);
    double bound = std::exp(support(domain, a));
    auto fn = [a = std::move(a), freq](double s, const Point& y) {
        double dot = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            dot += a[i] * y[i];
        return std::exp(dot) * std::cos(freq * s);
    };
    // A tiny relative slack covers rounding in exp at the extreme point.
    return BoundaryData("exp_cos", std::move(fn), bound * (1 + 1e-12));
}

//! The one-dimensional example f(s, y) = e^y cos s
inline BoundaryData paper_example(const Domain& domain)
{
    if (domain.dim() != 1)
        throw DimensionMismatch("the e^y cos s example is one-dimensional");
    BoundaryData f = exp_cos(domain, {1.0});
    return BoundaryData("paper_1d", [f](double s, const Point& y) { return f(s, y); },
                        f.bound());
}

inline BoundaryData constant(double c)
{
    double bound = c != 0 ? std::abs(c) : 1.0;
    return BoundaryData("constant", [c](double, const Point&) { return c; }, bound)
        .mark_time_independent();
}

//! f(s, y) = 1 if y[axis] >= threshold, else 0
inline BoundaryData indicator(std::size_t axis, double threshold)
{
    return BoundaryData("indicator",
                        [axis, threshold](double, const Point& y) {
                            return y[axis] >= threshold ? 1.0 : 0.0;
                        },
                        1.0)
        .mark_time_independent();
}

//! alpha f1 + beta f2
inline BoundaryData
linear_combination(double alpha, const BoundaryData& f1, double beta, const BoundaryData& f2)
{
    double bound = std::abs(alpha) * f1.bound() + std::abs(beta) * f2.bound();
    BoundaryData out("linear_combination",
                     [=](double s, const Point& y) { return alpha * f1(s, y) + beta * f2(s, y); },
                     bound > 0 ? bound : 1.0);
    if (f1.time_independent() && f2.time_independent())
        out.mark_time_independent();
    return out;
}

//! f(s + c, y)
inline BoundaryData shifted_in_time(const BoundaryData& f, double c)
{
    return BoundaryData(f.name() + "_shifted", [f, c](double s, const Point& y) { return f(s + c, y); },
                        f.bound());
}

//---------------------------------------------------------------------------//
/*!
 * Tabulated boundary data.
 *
 * Values are given at boundary sites (nearest site wins, ties to the lower
 * index) and at increasing s nodes (piecewise-linear in s, held constant
 * beyond the first and last node).
 *
 * File schema (JSON):
 * \code
 * {"schema": "wavewalk-table/1", "bound": 2.0,
 *  "s": [s_0, ..., s_{K-1}],
 *  "sites": [[y_0...], ...],           // P boundary points
 *  "values": [[f(s_0, site_0), ...], ...]}  // P rows of K values
 * \endcode
 */
struct BoundaryTable
{
    std::vector<double> s;
    std::vector<Point> sites;
    std::vector<std::vector<double>> values;
    double bound = 0;

    void validate(std::size_t dim) const
    {
        if (s.empty())
            throw ConfigError("table needs at least one s node");
        for (std::size_t k = 1; k < s.size(); ++k)
        {
            if (!(s[k] > s[k - 1]))
                throw ConfigError("table s nodes must be strictly increasing");
        }
        if (sites.empty())
            throw ConfigError("table needs at least one boundary site");
        if (values.size() != sites.size())
            throw ConfigError("table needs one row of values per site");
        if (!(bound > 0 && std::isfinite(bound)))
            throw ConfigError("table bound must be positive");
        for (std::size_t p = 0; p < sites.size(); ++p)
        {
            if (sites[p].dim() != dim)
                throw ConfigError("table site dimension does not match the domain");
            if (values[p].size() != s.size())
                throw ConfigError("table row " + std::to_string(p) + " has the wrong length");
            for (double v : values[p])
            {
                if (!(std::abs(v) <= bound))
                    throw ConfigError("table value exceeds the declared bound");
            }
        }
    }

    double operator()(double t, const Point& y) const
    {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < sites.size(); ++p)
        {
            double d = distance(sites[p], y);
            if (d < best_d)
            {
                best_d = d;
                best = p;
            }
        }
        const auto& row = values[best];
        if (t <= s.front())
            return row.front();
        if (t >= s.back())
            return row.back();
        auto hi = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), t) - s.begin());
        std::size_t lo = hi - 1;
        double w = (t - s[lo]) / (s[hi] - s[lo]);
        return (1 - w) * row[lo] + w * row[hi];
    }
};

inline void to_json(nlohmann::json& j, const BoundaryTable& table)
{
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& p : table.sites)
        sites.push_back(std::vector<double>(p.coords().begin(), p.coords().end()));
    j = {{"schema", "wavewalk-table/1"},
         {"bound", table.bound},
         {"s", table.s},
         {"sites", sites},
         {"values", table.values}};
}

inline BoundaryTable table_from_json(const nlohmann::json& j)
{
    if (j.value("schema", "") != "wavewalk-table/1")
        throw ConfigError("boundary table schema must be \"wavewalk-table/1\"");
    BoundaryTable table;
    try
    {
        table.bound = j.at("bound").get<double>();
        table.s = j.at("s").get<std::vector<double>>();
        for (const auto& site : j.at("sites"))
            table.sites.emplace_back(site.get<std::vector<double>>());
        table.values = j.at("values").get<std::vector<std::vector<double>>>();
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError(std::string("malformed boundary table: ") + e.what());
    }
    catch (const std::invalid_argument& e)
    {
        throw ConfigError(std::string("malformed boundary table: ") + e.what());
    }
    return table;
}

inline BoundaryTable load_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open boundary table '" + path + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("boundary table '" + path + "' is not valid JSON: " + e.what());
    }
    return table_from_json(j);
}

inline BoundaryData tabulated(BoundaryTable table, std::size_t dim)
{
    table.validate(dim);
    double bound = table.bound;
    bool constant_in_s = table.s.size() == 1;
    auto shared = std::make_shared<const BoundaryTable>(std::move(table));
    BoundaryData f("tabulated", [shared](double s, const Point& y) { return (*shared)(s, y); },
                   bound);
    if (constant_in_s)
        f.mark_time_independent();
    return f;
}

}  // namespace wavewalk
