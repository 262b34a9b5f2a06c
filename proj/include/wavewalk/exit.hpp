#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "wavewalk/errors.hpp"
#include "wavewalk/geometry.hpp"
#include "wavewalk/sampling.hpp"
#include "wavewalk/stats.hpp"

namespace wavewalk {

//! Independent draw sequences of one replicate
enum class Lane : std::uint64_t
{
    path = 0,    //!< Brownian increments and walk-on-spheres jumps
    mixing = 1,  //!< Cauchy and normal mixing variables
};

inline RngStream replicate_stream(const SeedSpec& seed, Lane lane)
{
    return RngStream(seed, static_cast<std::uint64_t>(lane));
}

//! First exit of Brownian motion from D: time and position
struct ExitSample
{
    double tau = 0;
    Point exit_point;
};

//! First exit of (d+1)-dimensional Brownian motion from R x D
struct CylinderExit
{
    double s = 0;
    Point y;
};

/*!
 * Euler-Maruyama exit sampler settings.
 *
 * The step from a state at distance r from the boundary is
 * min(base_step, boundary_slowdown * r^2). A path stops when r drops to
 * the snap tolerance or below (a step that leaves D gives r <= 0); its exit
 * point is the nearest boundary point of the final state.
 */
struct EmConfig
{
    double base_step = 1e-3;
    double boundary_slowdown = 0.1;
    std::uint64_t max_steps = 100'000'000;
    std::optional<double> snap;  //!< default: 1e-6 x domain diameter

    double snap_for(double diameter) const { return snap ? *snap : 1e-6 * diameter; }

    void validate() const
    {
        if (!(base_step > 0 && std::isfinite(base_step)))
            throw ConfigError("em.base_step must be positive");
        if (!(boundary_slowdown > 0 && std::isfinite(boundary_slowdown)))
            throw ConfigError("em.boundary_slowdown must be positive");
        if (max_steps == 0)
            throw ConfigError("em.max_steps must be positive");
        if (snap && !(*snap > 0))
            throw ConfigError("em.snap must be positive");
    }
};

//! Walk-on-spheres settings for the cylinder R x D
struct WosConfig
{
    std::optional<double> epsilon;  //!< default: 1e-5 x domain diameter
    std::uint64_t max_jumps = 1'000'000;

    double epsilon_for(double diameter) const
    {
        return epsilon ? *epsilon : 1e-5 * diameter;
    }

    void validate() const
    {
        if (epsilon && !(*epsilon > 0 && std::isfinite(*epsilon)))
            throw ConfigError("wos.epsilon must be positive");
        if (max_jumps == 0)
            throw ConfigError("wos.max_jumps must be positive");
    }
};

//---------------------------------------------------------------------------//
// Euler-Maruyama
//---------------------------------------------------------------------------//

/*!
 * Simulate (tau, B_tau) for Brownian motion started at x0.
 *
 * Throws DomainError unless x0 is interior, TruncationError when the path
 * is still inside after max_steps steps.
 */
template<DomainShape S>
ExitSample em_exit_sample(const S& shape, const Point& x0, const EmConfig& cfg,
                          RngStream& stream)
{
    if (!contains(shape, x0))
        throw DomainError("Brownian start point must lie inside the domain");

    boost::random::normal_distribution<double> normal;
    const double snap = cfg.snap_for(shape.diameter());
    const std::size_t dim = x0.dim();
    const double sd_max = std::sqrt(cfg.base_step);
    const double sd_slope = std::sqrt(cfg.boundary_slowdown);
    // Far from the boundary, m base steps are drawn as one N(0, m h0) step.
    // This matches m separate steps in law unless some intermediate state
    // would have left D; with r >= bulk_margin * sqrt(m h0) that event has
    // probability below 1e-16.
    const double bulk_margin = 8.5 * std::sqrt(static_cast<double>(dim));
    Point x = x0;
    double tau = 0;
    std::uint64_t step = 0;
    for (;;)
    {
        double r = shape.clearance(x);
        if (r <= snap)
            break;
        if (step >= cfg.max_steps)
        {
            throw TruncationError("Euler-Maruyama path did not exit within "
                                  + std::to_string(cfg.max_steps) + " steps");
        }
        double block = r / bulk_margin;
        double m = std::floor(block * block / cfg.base_step);
        if (m >= 2)
        {
            m = std::min(m, static_cast<double>(cfg.max_steps - step));
            double h = m * cfg.base_step;
            double sd = std::sqrt(h);
            for (std::size_t i = 0; i < dim; ++i)
                x[i] += sd * normal(stream);
            tau += h;
            step += static_cast<std::uint64_t>(m);
            continue;
        }
        // sqrt(min(h0, c r^2)) without the square root
        double sd = std::min(sd_max, sd_slope * r);
        for (std::size_t i = 0; i < dim; ++i)
            x[i] += sd * normal(stream);
        tau += sd * sd;
        ++step;
    }
    return ExitSample{tau, shape.nearest_boundary_point(x)};
}

inline ExitSample
em_exit_sample(const Domain& domain, const Point& x0, const EmConfig& cfg, RngStream& stream)
{
    return domain.visit(
        [&](const auto& s) { return em_exit_sample(s, x0, cfg, stream); });
}

//---------------------------------------------------------------------------//
// Walk on spheres in the cylinder
//---------------------------------------------------------------------------//

/*!
 * Sample the exit point of Brownian motion from R x D started at `start`.
 *
 * The largest ball around (s, x) inside the cylinder has radius
 * dist(x, boundary of D), so each jump lands uniformly on that
 * (d+1)-sphere. The walk stops within epsilon of the boundary and snaps the
 * spatial part onto it; the s coordinate is kept as is.
 *
 * The jump radii depend only on the spatial part, so the walk is exactly
 * translation invariant in s: the result is start.s plus a displacement
 * that does not depend on start.s.
 */
template<DomainShape S>
CylinderExit wos_exit_sample(const S& shape, const CylinderPoint& start, const WosConfig& cfg,
                             RngStream& stream)
{
    if (!contains(shape, start.x))
        throw DomainError("cylinder walk must start inside the domain");

    const double eps = cfg.epsilon_for(shape.diameter());
    const std::size_t dim = start.x.dim();
    std::vector<double> dir(dim + 1);
    double ds = 0;
    Point x = start.x;
    for (std::uint64_t jump = 0;; ++jump)
    {
        double r = shape.clearance(x);
        if (r < eps)
            break;
        if (jump == cfg.max_jumps)
        {
            throw TruncationError("walk on spheres did not reach the boundary within "
                                  + std::to_string(cfg.max_jumps) + " jumps");
        }
        sample_uniform_sphere(stream, std::span<double>(dir));
        ds += r * dir[0];
        for (std::size_t i = 0; i < dim; ++i)
            x[i] += r * dir[i + 1];
    }
    return CylinderExit{start.s + ds, shape.nearest_boundary_point(x)};
}

inline CylinderExit wos_exit_sample(const Domain& domain, const CylinderPoint& start,
                                    const WosConfig& cfg, RngStream& stream)
{
    return domain.visit(
        [&](const auto& s) { return wos_exit_sample(s, start, cfg, stream); });
}

//---------------------------------------------------------------------------//
// Aggregates
//---------------------------------------------------------------------------//

/*!
 * Accumulate `width` functionals of Euler-Maruyama exits from x0.
 *
 * Replicate i uses SeedSpec{seed.base_seed, seed.stream_id, i}.
 */
template<class F>
std::vector<RunningStats> exit_statistics(const Domain& domain, const Point& x0, std::uint64_t n,
                                          const EmConfig& cfg, const SeedSpec& seed,
                                          const Execution& exec, std::size_t width, F&& functional)
{
    require_samples(n);
    cfg.validate();
    if (!contains(domain, x0))
        throw DomainError("Brownian start point must lie inside the domain");
    return domain.visit([&](const auto& shape) {
        return accumulate(n, width, exec, [&](std::uint64_t i, std::span<double> out) {
            auto stream = replicate_stream({seed.base_seed, seed.stream_id, i}, Lane::path);
            functional(em_exit_sample(shape, x0, cfg, stream), out);
        });
    });
}

//! Monte Carlo mean of the exit time from x0
inline Estimate exit_mean_time(const Domain& domain, const Point& x0, std::uint64_t n,
                               const EmConfig& cfg, const SeedSpec& seed,
                               const Execution& exec = {})
{
    auto stats = exit_statistics(domain, x0, n, cfg, seed, exec, 1,
                                 [](const ExitSample& e, std::span<double> out) {
                                     out[0] = e.tau;
                                 });
    return stats[0].to_estimate({seed.base_seed, seed.stream_id, 0});
}

}  // namespace wavewalk
