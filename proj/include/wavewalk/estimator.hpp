#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "wavewalk/boundary_data.hpp"
#include "wavewalk/errors.hpp"
#include "wavewalk/exit.hpp"
#include "wavewalk/geometry.hpp"
#include "wavewalk/sampling.hpp"
#include "wavewalk/stats.hpp"

namespace wavewalk {

//! How exit data is sampled
enum class Backend
{
    em,   //!< Euler-Maruyama (tau, B_tau) with a normal time offset
    wos,  //!< walk on spheres in the cylinder R x D
};

//! Estimator for u(t, x)
enum class Method
{
    direct,      //!< f(tX + sqrt(tau) Z, B_tau) with Euler-Maruyama exits
    mixed,       //!< cylinder walk started at (tX, x)
    quadrature,  //!< Poisson-kernel integral of the harmonic lift v(., x)
};

inline std::string to_string(Backend b)
{
    return b == Backend::em ? "em" : "wos";
}

inline std::string to_string(Method m)
{
    switch (m)
    {
        case Method::direct: return "direct";
        case Method::mixed: return "mixed";
        case Method::quadrature: return "quadrature";
    }
    return "unknown";
}

//! (t, x) with t > 0 and x inside D
struct QueryPoint
{
    double t = 0;
    Point x;
};

/*!
 * Truncated Poisson-kernel quadrature in the s variable.
 *
 * Nodes are composite 8-point Gauss-Legendre panels in u on [-U, U] mapped
 * through y = t_c sinh(u), U = asinh(R / t_c). The map concentrates nodes
 * where the kernel t/(pi (t^2 + y^2)) peaks; at t = t_c each weighted node
 * carries kernel mass w_u / (pi cosh u).
 */
struct QuadratureSpec
{
    double radius = 50;
    std::size_t nodes = 400;
    std::optional<double> tolerance;  //!< maximum admissible tail bound
    Backend backend = Backend::wos;

    void validate() const
    {
        if (!(radius > 0 && std::isfinite(radius)))
            throw ConfigError("quadrature radius must be positive");
        if (nodes < 8 || nodes % 8 != 0)
            throw ConfigError("quadrature node count must be a positive multiple of 8");
        if (tolerance && !(*tolerance > 0))
            throw ConfigError("quadrature tolerance must be positive");
    }
};

//! Kernel mass outside [-R, R]: 1 - (2/pi) atan(R/t)
inline double poisson_tail_mass(double t, double radius)
{
    // atan(R/t) = pi/2 - atan(t/R) keeps precision for R >> t
    return (2 / std::numbers::pi) * std::atan(t / radius);
}

inline double poisson_kernel(double t, double y)
{
    return t / (std::numbers::pi * (t * t + y * y));
}

class PoissonQuadrature
{
  public:
    PoissonQuadrature(double t_center, const QuadratureSpec& spec) : radius_(spec.radius)
    {
        spec.validate();
        using Rule = boost::math::quadrature::gauss<double, 8>;
        const auto& abscissa = Rule::abscissa();
        const auto& weight = Rule::weights();

        double U = std::asinh(spec.radius / t_center);
        std::size_t panels = spec.nodes / 8;
        double width = 2 * U / static_cast<double>(panels);
        nodes_.reserve(spec.nodes);
        weights_.reserve(spec.nodes);
        for (std::size_t p = 0; p < panels; ++p)
        {
            double mid = -U + (static_cast<double>(p) + 0.5) * width;
            double half = width / 2;
            for (std::size_t k = 0; k < abscissa.size(); ++k)
            {
                for (double sign : {-1.0, 1.0})
                {
                    double u = mid + sign * half * abscissa[k];
                    nodes_.push_back(t_center * std::sinh(u));
                    weights_.push_back(half * weight[k] * t_center * std::cosh(u));
                }
            }
        }
    }

    std::span<const double> nodes() const noexcept { return nodes_; }
    double radius() const noexcept { return radius_; }

    //! Node weights times the kernel K_t at each node
    std::vector<double> kernel_weights(double t) const
    {
        std::vector<double> kw(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            kw[k] = weights_[k] * poisson_kernel(t, nodes_[k]);
        return kw;
    }

  private:
    double radius_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

//! Sampler settings shared by all estimators
struct EstimatorConfig
{
    Method method = Method::mixed;
    EmConfig em;
    WosConfig wos;
    QuadratureSpec quadrature;

    Backend backend() const
    {
        switch (method)
        {
            case Method::direct: return Backend::em;
            case Method::mixed: return Backend::wos;
            case Method::quadrature: return quadrature.backend;
        }
        return Backend::wos;
    }

    void validate() const
    {
        em.validate();
        wos.validate();
        if (method == Method::quadrature)
            quadrature.validate();
    }
};

//---------------------------------------------------------------------------//
// Replicate-level machinery
//---------------------------------------------------------------------------//

/*!
 * One replicate's boundary draw from x.
 *
 * Every estimator integrand is a function of (cauchy, offset, exit):
 * u-samples are f(t * cauchy + offset, exit) and v-samples at s are
 * f(s + offset, exit), where offset is sqrt(tau) Z (em) or the s
 * displacement of a cylinder walk started at (0, x) (wos).
 *
 * The Cauchy and normal variables come from the mixing lane and the path
 * from the path lane, so draws at different x under the same replicate
 * seed share X, Z and all path randomness.
 */
struct BoundaryDraw
{
    double cauchy = 0;
    double offset = 0;
    Point exit;
};

template<DomainShape S>
BoundaryDraw draw_boundary(const S& shape, const Point& x, Backend backend,
                           const EstimatorConfig& cfg, const SeedSpec& replicate)
{
    auto mix = replicate_stream(replicate, Lane::mixing);
    double cauchy = sample_standard_cauchy(mix);
    double normal = sample_standard_normal(mix);
    auto path = replicate_stream(replicate, Lane::path);
    if (backend == Backend::em)
    {
        ExitSample e = em_exit_sample(shape, x, cfg.em, path);
        return {cauchy, std::sqrt(e.tau) * normal, std::move(e.exit_point)};
    }
    CylinderExit c = wos_exit_sample(shape, CylinderPoint{0.0, x}, cfg.wos, path);
    return {cauchy, c.s, std::move(c.y)};
}

//! Query times that share one quadrature grid (centered at `center`)
struct TimeGroup
{
    double center = 0;
    std::vector<double> times;
};

/*!
 * Turns boundary draws into u-samples at a fixed list of times.
 *
 * Output order follows the groups, then the times within each group.
 */
class USampleEvaluator
{
  public:
    USampleEvaluator(const BoundaryData& f, const EstimatorConfig& cfg,
                     std::vector<TimeGroup> groups)
        : f_(f), quadrature_(cfg.method == Method::quadrature), groups_(std::move(groups))
    {
        for (const auto& g : groups_)
        {
            width_ += g.times.size();
            if (quadrature_)
            {
                rules_.emplace_back(g.center, cfg.quadrature);
                std::vector<std::vector<double>> kws;
                for (double t : g.times)
                    kws.push_back(rules_.back().kernel_weights(t));
                kernel_weights_.push_back(std::move(kws));
            }
        }
    }

    std::size_t width() const noexcept { return width_; }

    void evaluate(const BoundaryDraw& d, std::span<double> out) const
    {
        std::size_t slot = 0;
        for (std::size_t g = 0; g < groups_.size(); ++g)
        {
            if (!quadrature_)
            {
                for (double t : groups_[g].times)
                    out[slot++] = f_(t * d.cauchy + d.offset, d.exit);
                continue;
            }
            auto nodes = rules_[g].nodes();
            thread_local std::vector<double> values;
            values.resize(nodes.size());
            for (std::size_t k = 0; k < nodes.size(); ++k)
                values[k] = f_(nodes[k] + d.offset, d.exit);
            for (const auto& kw : kernel_weights_[g])
            {
                double sum = 0;
                for (std::size_t k = 0; k < kw.size(); ++k)
                    sum += kw[k] * values[k];
                out[slot++] = sum;
            }
        }
    }

  private:
    const BoundaryData& f_;
    bool quadrature_;
    std::vector<TimeGroup> groups_;
    std::vector<PoissonQuadrature> rules_;
    std::vector<std::vector<std::vector<double>>> kernel_weights_;
    std::size_t width_ = 0;
};

inline void require_interior(const Domain& domain, const Point& x)
{
    if (!contains(domain, x))
        throw DomainError("query point must lie strictly inside the domain");
}

inline void require_positive_time(double t)
{
    if (!(t > 0 && std::isfinite(t)))
        throw ConfigError("u-queries require t > 0");
}

inline SeedSpec estimate_seed(const SeedSpec& seed)
{
    return {seed.base_seed, seed.stream_id, 0};
}

//! Accumulate u-samples at every time of `groups` for the point x
inline std::vector<RunningStats>
sample_u_at(const Domain& domain, const BoundaryData& f, const Point& x,
            std::vector<TimeGroup> groups, std::uint64_t n, const EstimatorConfig& cfg,
            const SeedSpec& seed, const Execution& exec)
{
    USampleEvaluator eval(f, cfg, std::move(groups));
    Backend backend = cfg.backend();
    return domain.visit([&](const auto& shape) {
        return accumulate(n, eval.width(), exec, [&](std::uint64_t i, std::span<double> out) {
            auto d = draw_boundary(shape, x, backend, cfg, {seed.base_seed, seed.stream_id, i});
            eval.evaluate(d, out);
        });
    });
}

//---------------------------------------------------------------------------//
// Estimators
//---------------------------------------------------------------------------//

//! u(t, x) = E f(tX + sqrt(tau) Z, B_tau) with Euler-Maruyama exits
inline Estimate estimate_u_direct(const Domain& domain, const BoundaryData& f, const QueryPoint& q,
                                  std::uint64_t n, const EmConfig& em, const SeedSpec& seed,
                                  const Execution& exec = {})
{
    require_positive_time(q.t);
    require_interior(domain, q.x);
    require_samples(n);
    EstimatorConfig cfg;
    cfg.method = Method::direct;
    cfg.em = em;
    cfg.validate();
    auto stats = sample_u_at(domain, f, q.x, {{q.t, {q.t}}}, n, cfg, seed, exec);
    return stats[0].to_estimate(estimate_seed(seed));
}

/*!
 * u(t, x) = E v(tX, x) with the cylinder walk started at (tX, x).
 *
 * With n_inner > 1 each Cauchy draw is reused for n_inner walks and the
 * estimate is the mean of the n_outer per-draw averages (its standard error
 * is computed over those averages, so n reports n_outer).
 */
inline Estimate estimate_u_mixed(const Domain& domain, const BoundaryData& f, const QueryPoint& q,
                                 std::uint64_t n_outer, std::uint64_t n_inner, const WosConfig& wos,
                                 const SeedSpec& seed, const Execution& exec = {})
{
    require_positive_time(q.t);
    require_interior(domain, q.x);
    require_samples(n_outer);
    if (n_inner == 0)
        throw ConfigError("n_inner must be >= 1");
    wos.validate();
    EstimatorConfig cfg;
    cfg.method = Method::mixed;
    cfg.wos = wos;
    if (n_inner == 1)
    {
        auto stats = sample_u_at(domain, f, q.x, {{q.t, {q.t}}}, n_outer, cfg, seed, exec);
        return stats[0].to_estimate(estimate_seed(seed));
    }
    auto stats = domain.visit([&](const auto& shape) {
        return accumulate(n_outer, 1, exec, [&](std::uint64_t i, std::span<double> out) {
            auto mix = replicate_stream({seed.base_seed, seed.stream_id, i}, Lane::mixing);
            double start = q.t * sample_standard_cauchy(mix);
            double sum = 0;
            for (std::uint64_t j = 0; j < n_inner; ++j)
            {
                auto path = replicate_stream({seed.base_seed, seed.stream_id, i * n_inner + j},
                                             Lane::path);
                CylinderExit e = wos_exit_sample(shape, CylinderPoint{start, q.x}, wos, path);
                sum += f(e.s, e.y);
            }
            out[0] = sum / static_cast<double>(n_inner);
        });
    });
    return stats[0].to_estimate(estimate_seed(seed));
}

//! v(s, x) = E f(s + sqrt(tau) Z, B_tau) = E_{(s,x)} f(V_sigma)
inline Estimate estimate_v(const Domain& domain, const BoundaryData& f, double s, const Point& x,
                           std::uint64_t n, Backend backend, const EstimatorConfig& cfg,
                           const SeedSpec& seed, const Execution& exec = {})
{
    if (!std::isfinite(s))
        throw ConfigError("s must be finite");
    require_interior(domain, x);
    require_samples(n);
    cfg.em.validate();
    cfg.wos.validate();
    auto stats = domain.visit([&](const auto& shape) {
        return accumulate(n, 1, exec, [&](std::uint64_t i, std::span<double> out) {
            auto d = draw_boundary(shape, x, backend, cfg, {seed.base_seed, seed.stream_id, i});
            out[0] = f(s + d.offset, d.exit);
        });
    });
    return stats[0].to_estimate(estimate_seed(seed));
}

struct QuadratureEstimate
{
    Estimate estimate;
    double tail_bound = 0;  //!< |f| bound times the kernel mass beyond R
};

/*!
 * u(t, x) = integral of K_t(y) v(y, x) dy over [-R, R].
 *
 * All nodes share each replicate's boundary draw (common random numbers),
 * so one replicate yields the whole weighted sum.
 */
inline QuadratureEstimate
estimate_u_quadrature(const Domain& domain, const BoundaryData& f, const QueryPoint& q,
                      const QuadratureSpec& spec, std::uint64_t n_per_node,
                      const EstimatorConfig& cfg, const SeedSpec& seed, const Execution& exec = {})
{
    require_positive_time(q.t);
    require_interior(domain, q.x);
    require_samples(n_per_node);
    spec.validate();
    double tail = f.bound() * poisson_tail_mass(q.t, spec.radius);
    if (spec.tolerance && tail > *spec.tolerance)
    {
        throw ConfigError("quadrature radius " + std::to_string(spec.radius)
                          + " leaves a tail bound of " + std::to_string(tail)
                          + ", above the requested tolerance "
                          + std::to_string(*spec.tolerance));
    }
    EstimatorConfig qcfg = cfg;
    qcfg.method = Method::quadrature;
    qcfg.quadrature = spec;
    qcfg.validate();
    auto stats = sample_u_at(domain, f, q.x, {{q.t, {q.t}}}, n_per_node, qcfg, seed, exec);
    return {stats[0].to_estimate(estimate_seed(seed)), tail};
}

//! Single u-estimate with the method selected in cfg
inline Estimate estimate_u(const Domain& domain, const BoundaryData& f, const QueryPoint& q,
                           std::uint64_t n, const EstimatorConfig& cfg, const SeedSpec& seed,
                           const Execution& exec = {})
{
    switch (cfg.method)
    {
        case Method::direct: return estimate_u_direct(domain, f, q, n, cfg.em, seed, exec);
        case Method::mixed: return estimate_u_mixed(domain, f, q, n, 1, cfg.wos, seed, exec);
        case Method::quadrature:
            return estimate_u_quadrature(domain, f, q, cfg.quadrature, n, cfg, seed, exec).estimate;
    }
    throw ConfigError("unknown method");
}

//---------------------------------------------------------------------------//
// Grids
//---------------------------------------------------------------------------//

//! Random-number coupling between grid points
enum class Coupling
{
    common,       //!< every point uses stream_id = seed.stream_id
    independent,  //!< point k uses stream_id = seed.stream_id + k
};

struct GridRow
{
    QueryPoint query;
    std::optional<Estimate> estimate;
    double tail_bound = 0;  //!< quadrature only
    std::string error;      //!< non-empty when the row failed
};

/*!
 * Estimate u on the product grid t_values x x_values (rows ordered by x,
 * then t).
 *
 * Points sharing x share their boundary draws; under common coupling each
 * row is bitwise identical to the corresponding single-point estimate.
 * Failures are reported per row and do not stop the grid.
 */
inline std::vector<GridRow> evaluate_grid(const Domain& domain, const BoundaryData& f,
                                          const std::vector<double>& t_values,
                                          const std::vector<Point>& x_values, std::uint64_t n,
                                          const EstimatorConfig& cfg, const SeedSpec& seed,
                                          const Execution& exec = {},
                                          Coupling coupling = Coupling::common)
{
    require_samples(n);
    cfg.validate();
    std::vector<GridRow> rows;
    for (std::size_t ix = 0; ix < x_values.size(); ++ix)
    {
        const Point& x = x_values[ix];
        std::size_t first = rows.size();
        std::vector<std::size_t> pending;
        for (double t : t_values)
        {
            GridRow row{QueryPoint{t, x}, std::nullopt, 0, {}};
            try
            {
                require_positive_time(t);
                require_interior(domain, x);
                if (cfg.method == Method::quadrature)
                {
                    row.tail_bound = f.bound() * poisson_tail_mass(t, cfg.quadrature.radius);
                    if (cfg.quadrature.tolerance && row.tail_bound > *cfg.quadrature.tolerance)
                        throw ConfigError("quadrature tail bound exceeds the tolerance");
                }
                pending.push_back(rows.size());
            }
            catch (const std::exception& e)
            {
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
        if (pending.empty())
            continue;

        auto run = [&](std::vector<TimeGroup> groups, const SeedSpec& s) {
            return sample_u_at(domain, f, x, std::move(groups), n, cfg, s, exec);
        };
        try
        {
            if (coupling == Coupling::common)
            {
                std::vector<TimeGroup> groups;
                for (std::size_t r : pending)
                    groups.push_back({rows[r].query.t, {rows[r].query.t}});
                auto stats = run(std::move(groups), seed);
                for (std::size_t k = 0; k < pending.size(); ++k)
                    rows[pending[k]].estimate = stats[k].to_estimate(estimate_seed(seed));
            }
            else
            {
                for (std::size_t r : pending)
                {
                    SeedSpec s{seed.base_seed, seed.stream_id + r, 0};
                    auto stats = run({{rows[r].query.t, {rows[r].query.t}}}, s);
                    rows[r].estimate = stats[0].to_estimate(s);
                }
            }
        }
        catch (const std::exception& e)
        {
            for (std::size_t r = first; r < rows.size(); ++r)
            {
                if (!rows[r].estimate && rows[r].error.empty())
                    rows[r].error = e.what();
            }
        }
    }
    return rows;
}

}  // namespace wavewalk
