#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wavewalk/boundary_data.hpp"
#include "wavewalk/errors.hpp"
#include "wavewalk/estimator.hpp"
#include "wavewalk/geometry.hpp"
#include "wavewalk/stats.hpp"

namespace wavewalk {

//! z = mean / stderr, with 0/0 = 0
inline double z_score(double deviation, double std_error)
{
    if (std_error > 0)
        return deviation / std_error;
    if (deviation == 0)
        return 0;
    return std::copysign(std::numeric_limits<double>::infinity(), deviation);
}

//! sqrt(a^2 + b^2) for two independent standard errors
inline double combined_std_error(double a, double b)
{
    return std::hypot(a, b);
}

/*!
 * Finite-difference check of an identity lhs = rhs.
 *
 * For the wave equation lhs is the second time difference and rhs the
 * discrete Laplacian; for the cylinder lift lhs is the second s difference
 * and rhs is minus the spatial Laplacian. residual.mean is exactly
 * dtt.mean - lap.mean; its standard error comes from the per-replicate
 * residuals, which share all random numbers across the stencil.
 */
struct ResidualReport
{
    QueryPoint query;
    Estimate dtt;
    Estimate lap;
    Estimate residual;
    double fd_step = 0;
    double z_score = 0;

    bool passed(double threshold = 3) const { return std::abs(z_score) < threshold; }
};

struct OracleReport
{
    QueryPoint query;
    Estimate estimated;
    double exact = 0;
    double z_score = 0;

    bool passed(double threshold = 3) const { return std::abs(z_score) < threshold; }
};

namespace detail {

inline void require_stencil(const Domain& domain, const Point& x, double h)
{
    if (!(h > 0 && std::isfinite(h)))
        throw ConfigError("fd_step must be positive");
    require_interior(domain, x);
    if (!(domain.clearance(x) > h))
        throw DomainError("finite-difference stencil leaves the domain");
}

inline ResidualReport make_residual_report(QueryPoint q, const std::vector<RunningStats>& stats,
                                           double h, const SeedSpec& seed)
{
    ResidualReport r;
    r.query = std::move(q);
    r.dtt = stats[0].to_estimate(seed);
    r.lap = stats[1].to_estimate(seed);
    r.residual = stats[2].to_estimate(seed);
    r.residual.mean = r.dtt.mean - r.lap.mean;
    r.fd_step = h;
    r.z_score = z_score(r.residual.mean, r.residual.std_error);
    return r;
}

}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * CRN finite-difference residual of the wave equation at q.
 *
 * Stencil: (t +- h, x), (t, x), (t, x +- h e_i). Each replicate evaluates
 * every stencil point from the same random numbers and contributes one
 * residual sample.
 */
inline ResidualReport residual_wave(const Domain& domain, const BoundaryData& f, const QueryPoint& q,
                                    double fd_step, std::uint64_t n, const EstimatorConfig& cfg,
                                    const SeedSpec& seed, const Execution& exec = {})
{
    const double h = fd_step;
    require_positive_time(q.t);
    if (!(q.t - h > 0))
        throw ConfigError("residual stencil needs t > fd_step");
    detail::require_stencil(domain, q.x, h);
    require_samples(n);
    cfg.validate();

    const std::size_t dim = q.x.dim();
    USampleEvaluator center(f, cfg, {{q.t, {q.t - h, q.t, q.t + h}}});
    USampleEvaluator side(f, cfg, {{q.t, {q.t}}});
    std::vector<Point> neighbors;
    for (std::size_t i = 0; i < dim; ++i)
    {
        neighbors.push_back(q.x.shifted(i, h));
        neighbors.push_back(q.x.shifted(i, -h));
    }
    const Backend backend = cfg.backend();
    const double inv_h2 = 1 / (h * h);

    auto stats = domain.visit([&](const auto& shape) {
        return accumulate(n, 3, exec, [&](std::uint64_t i, std::span<double> out) {
            SeedSpec rep{seed.base_seed, seed.stream_id, i};
            std::array<double, 3> c;
            center.evaluate(draw_boundary(shape, q.x, backend, cfg, rep), c);
            double dtt = (c[2] - 2 * c[1] + c[0]) * inv_h2;
            double lap = 0;
            for (std::size_t k = 0; k < neighbors.size(); k += 2)
            {
                std::array<double, 1> plus, minus;
                side.evaluate(draw_boundary(shape, neighbors[k], backend, cfg, rep), plus);
                side.evaluate(draw_boundary(shape, neighbors[k + 1], backend, cfg, rep), minus);
                lap += (plus[0] - 2 * c[1] + minus[0]) * inv_h2;
            }
            out[0] = dtt;
            out[1] = lap;
            out[2] = dtt - lap;
        });
    });
    return detail::make_residual_report(q, stats, h, estimate_seed(seed));
}

/*!
 * CRN check that v is harmonic in the cylinder: d_s^2 v = -Laplacian_x v.
 *
 * The report's dtt holds the second s difference, lap holds minus the
 * spatial discrete Laplacian, and the residual is their difference (the
 * full (d+1)-dimensional discrete Laplacian of v).
 */
inline ResidualReport check_harmonicity_v(const Domain& domain, const BoundaryData& f, double s,
                                          const Point& x, double fd_step, std::uint64_t n,
                                          Backend backend, const EstimatorConfig& cfg,
                                          const SeedSpec& seed, const Execution& exec = {})
{
    const double h = fd_step;
    if (!std::isfinite(s))
        throw ConfigError("s must be finite");
    detail::require_stencil(domain, x, h);
    require_samples(n);
    cfg.em.validate();
    cfg.wos.validate();

    const std::size_t dim = x.dim();
    std::vector<Point> neighbors;
    for (std::size_t i = 0; i < dim; ++i)
    {
        neighbors.push_back(x.shifted(i, h));
        neighbors.push_back(x.shifted(i, -h));
    }
    const double inv_h2 = 1 / (h * h);

    auto stats = domain.visit([&](const auto& shape) {
        return accumulate(n, 3, exec, [&](std::uint64_t i, std::span<double> out) {
            SeedSpec rep{seed.base_seed, seed.stream_id, i};
            BoundaryDraw d = draw_boundary(shape, x, backend, cfg, rep);
            double v0 = f(s + d.offset, d.exit);
            double dss = (f(s + h + d.offset, d.exit) - 2 * v0 + f(s - h + d.offset, d.exit))
                         * inv_h2;
            double lap = 0;
            for (std::size_t k = 0; k < neighbors.size(); k += 2)
            {
                BoundaryDraw p = draw_boundary(shape, neighbors[k], backend, cfg, rep);
                BoundaryDraw m = draw_boundary(shape, neighbors[k + 1], backend, cfg, rep);
                lap += (f(s + p.offset, p.exit) - 2 * v0 + f(s + m.offset, m.exit)) * inv_h2;
            }
            out[0] = dss;
            out[1] = -lap;
            out[2] = dss + lap;
        });
    });
    return detail::make_residual_report(QueryPoint{s, x}, stats, h, estimate_seed(seed));
}

//---------------------------------------------------------------------------//
// Closed-form oracles
//---------------------------------------------------------------------------//

/*!
 * Boundary data with a known solution.
 *
 * paper_1d: f = e^y cos s on a one-dimensional domain, u = e^{x - t}.
 * exp_cos:  f = e^{<a,y>} cos(|a| s), u = e^{<a,x> - |a| t}.
 */
struct OracleFamily
{
    enum class Kind
    {
        paper_1d,
        exp_cos,
    };

    Kind kind = Kind::paper_1d;
    std::vector<double> a;  //!< wave vector for exp_cos

    static OracleFamily paper() { return {Kind::paper_1d, {1.0}}; }
    static OracleFamily exponential_cosine(std::vector<double> a)
    {
        return {Kind::exp_cos, std::move(a)};
    }

    std::vector<double> wave_vector() const { return kind == Kind::paper_1d ? std::vector<double>{1.0} : a; }

    void validate(std::size_t dim) const
    {
        if (kind == Kind::paper_1d && dim != 1)
            throw DimensionMismatch("paper_1d oracle needs a one-dimensional domain");
        if (kind == Kind::exp_cos && a.size() != dim)
            throw DimensionMismatch("exp_cos wave vector must match the domain dimension");
    }

    BoundaryData boundary_data(const Domain& domain) const
    {
        validate(domain.dim());
        return kind == Kind::paper_1d ? paper_example(domain) : exp_cos(domain, a);
    }

    double exact(const QueryPoint& q) const
    {
        auto w = wave_vector();
        double dot = 0;
        for (std::size_t i = 0; i < w.size(); ++i)
            dot += w[i] * q.x[i];
        return std::exp(dot - norm(w) * q.t);
    }

    //! d_t^2 u = |a|^2 u
    double exact_dtt(const QueryPoint& q) const
    {
        double k = norm(wave_vector());
        return k * k * exact(q);
    }

    //! d_t u = -|a| u
    double exact_dt(const QueryPoint& q) const { return -norm(wave_vector()) * exact(q); }
};

inline OracleReport check_oracle(const Domain& domain, const OracleFamily& family,
                                 const QueryPoint& q, std::uint64_t n,
                                 const EstimatorConfig& cfg, const SeedSpec& seed,
                                 const Execution& exec = {})
{
    family.validate(domain.dim());
    require_dim(domain.dim(), q.x);
    BoundaryData f = family.boundary_data(domain);
    OracleReport r;
    r.query = q;
    r.estimated = estimate_u(domain, f, q, n, cfg, seed, exec);
    r.exact = family.exact(q);
    r.z_score = z_score(r.estimated.mean - r.exact, r.estimated.std_error);
    return r;
}

//---------------------------------------------------------------------------//
// Large-t behaviour
//---------------------------------------------------------------------------//

struct DecayReport
{
    std::vector<double> times;
    std::vector<Estimate> derivatives;  //!< central differences of u in t
    double tolerance = 0.01;
    bool decreasing = false;      //!< |d_{k+1}| <= |d_k| + 3 combined stderr
    bool small_at_end = false;    //!< |d_last| < tolerance + 3 stderr
    bool passed() const { return decreasing && small_at_end; }
};

//! Evaluate the decay statistic on a sequence of derivative estimates
inline void assess_decay(DecayReport& r)
{
    r.decreasing = true;
    for (std::size_t k = 0; k + 1 < r.derivatives.size(); ++k)
    {
        const Estimate& a = r.derivatives[k];
        const Estimate& b = r.derivatives[k + 1];
        double band = 3 * combined_std_error(a.std_error, b.std_error);
        if (!(std::abs(b.mean) <= std::abs(a.mean) + band))
            r.decreasing = false;
    }
    const Estimate& last = r.derivatives.back();
    r.small_at_end = std::abs(last.mean) < r.tolerance + 3 * last.std_error;
}

/*!
 * CRN central differences (u(t+h) - u(t-h)) / 2h at increasing t >= 1.
 *
 * All times share each replicate's boundary draw.
 */
inline DecayReport check_large_t_decay(const Domain& domain, const BoundaryData& f, const Point& x,
                                       const std::vector<double>& t_values, double fd_step,
                                       std::uint64_t n, const EstimatorConfig& cfg,
                                       const SeedSpec& seed, const Execution& exec = {},
                                       double tolerance = 0.01)
{
    const double h = fd_step;
    if (t_values.empty())
        throw ConfigError("decay check needs at least one time");
    for (std::size_t k = 0; k < t_values.size(); ++k)
    {
        if (!(t_values[k] >= 1))
            throw ConfigError("decay check times must be >= 1");
        if (k > 0 && !(t_values[k] > t_values[k - 1]))
            throw ConfigError("decay check times must be strictly increasing");
    }
    if (!(h > 0 && h < 1))
        throw ConfigError("decay fd_step must lie in (0, 1)");
    require_interior(domain, x);
    require_samples(n);

    std::vector<TimeGroup> groups;
    for (double t : t_values)
        groups.push_back({t, {t - h, t + h}});
    cfg.validate();
    USampleEvaluator eval(f, cfg, std::move(groups));
    const Backend backend = cfg.backend();
    const std::size_t K = t_values.size();
    auto diffs = domain.visit([&](const auto& shape) {
        return accumulate(n, K, exec, [&](std::uint64_t i, std::span<double> out) {
            thread_local std::vector<double> values;
            values.resize(2 * K);
            eval.evaluate(draw_boundary(shape, x, backend, cfg, {seed.base_seed, seed.stream_id, i}),
                          values);
            for (std::size_t k = 0; k < K; ++k)
                out[k] = (values[2 * k + 1] - values[2 * k]) / (2 * h);
        });
    });

    DecayReport r;
    r.times = t_values;
    r.tolerance = tolerance;
    for (const auto& s : diffs)
        r.derivatives.push_back(s.to_estimate(estimate_seed(seed)));
    assess_decay(r);
    return r;
}

struct NonrepresentableReport
{
    double x = 0;
    DecayReport analytic;                      //!< d_t (cos x cos t), exact
    std::optional<DecayReport> representable;  //!< e^y cos s data, estimated
};

inline std::vector<double> default_probe_times()
{
    std::vector<double> t;
    for (int k = 0; k < 4; ++k)
        t.push_back(std::numbers::pi / 2 + 2 * std::numbers::pi * k);
    return t;
}

/*!
 * Apply the decay statistic to u = cos x cos t, a bounded wave solution
 * whose time derivative -cos x sin t does not decay.
 *
 * With n >= 2 and x inside (-1, 1), the same statistic is also evaluated
 * for the e^y cos s example on the same time grid.
 */
inline NonrepresentableReport
check_nonrepresentable_probe(double x, const std::vector<double>& t_values, std::uint64_t n,
                             double fd_step, const EstimatorConfig& cfg, const SeedSpec& seed,
                             const Execution& exec = {}, double tolerance = 0.01)
{
    NonrepresentableReport r;
    r.x = x;
    r.analytic.times = t_values;
    r.analytic.tolerance = tolerance;
    for (double t : t_values)
        r.analytic.derivatives.push_back(Estimate{-std::cos(x) * std::sin(t), 0.0, 0, {}});
    assess_decay(r.analytic);

    if (n >= 2 && std::abs(x) < 1)
    {
        Domain domain(Interval(-1, 1));
        BoundaryData f = paper_example(domain);
        r.representable = check_large_t_decay(domain, f, Point{x}, t_values, fd_step, n, cfg,
                                              seed, exec, tolerance);
    }
    return r;
}

//---------------------------------------------------------------------------//
// Finite-difference bias
//---------------------------------------------------------------------------//

struct FdBiasReport
{
    QueryPoint query;
    std::vector<double> steps;
    std::vector<Estimate> dtt;   //!< plain CRN second differences
    std::vector<Estimate> bias;  //!< control-variate estimates of E dtt - d_t^2 u
    double slope = 0;            //!< least-squares slope of log|bias| on log h
};

/*!
 * Measure how the second time difference of an oracle family approaches
 * d_t^2 u as the step shrinks.
 *
 * The plain estimate of E dtt_h carries the full Monte Carlo noise of u,
 * which swamps an O(h^2) bias at small h. Using the same replicates'
 * u-sample at t as a control variate with known mean u(t) removes it:
 * mean(dtt_h - u_t) + u(t) is unbiased for E dtt_h, and subtracting the
 * exact d_t^2 u leaves the bias. A method whose samples are smooth in t
 * (quadrature) keeps the residual noise far below the bias.
 */
inline FdBiasReport fd_bias_study(const Domain& domain, const OracleFamily& family,
                                  const QueryPoint& q, const std::vector<double>& steps,
                                  std::uint64_t n, const EstimatorConfig& cfg,
                                  const SeedSpec& seed, const Execution& exec = {})
{
    family.validate(domain.dim());
    require_positive_time(q.t);
    require_interior(domain, q.x);
    require_samples(n);
    cfg.validate();
    if (steps.size() < 2)
        throw ConfigError("bias study needs at least two steps");
    for (double h : steps)
    {
        if (!(h > 0 && q.t - h > 0))
            throw ConfigError("bias study steps must lie in (0, t)");
    }

    BoundaryData f = family.boundary_data(domain);
    std::vector<double> times{q.t};
    for (double h : steps)
    {
        times.push_back(q.t - h);
        times.push_back(q.t + h);
    }
    USampleEvaluator eval(f, cfg, {{q.t, times}});
    const Backend backend = cfg.backend();
    const std::size_t K = steps.size();

    auto stats = domain.visit([&](const auto& shape) {
        return accumulate(n, 2 * K, exec, [&](std::uint64_t i, std::span<double> out) {
            thread_local std::vector<double> values;
            values.resize(times.size());
            eval.evaluate(draw_boundary(shape, q.x, backend, cfg, {seed.base_seed, seed.stream_id, i}),
                          values);
            for (std::size_t k = 0; k < K; ++k)
            {
                double h = steps[k];
                double dtt = (values[1 + 2 * k] - 2 * values[0] + values[2 + 2 * k]) / (h * h);
                out[2 * k] = dtt;
                out[2 * k + 1] = dtt - values[0];
            }
        });
    });

    FdBiasReport r;
    r.query = q;
    r.steps = steps;
    const double u = family.exact(q);
    const double utt = family.exact_dtt(q);
    for (std::size_t k = 0; k < K; ++k)
    {
        r.dtt.push_back(stats[2 * k].to_estimate(estimate_seed(seed)));
        Estimate b = stats[2 * k + 1].to_estimate(estimate_seed(seed));
        b.mean += u - utt;
        r.bias.push_back(b);
    }

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < K; ++k)
    {
        double lx = std::log(steps[k]);
        double ly = std::log(std::abs(r.bias[k].mean));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double m = static_cast<double>(K);
    r.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return r;
}

//---------------------------------------------------------------------------//
// Retry policy
//---------------------------------------------------------------------------//

//! Seed used for the single permitted retry of a statistical check
inline SeedSpec retry_seed(const SeedSpec& seed)
{
    return {seed.base_seed + 1, seed.stream_id, seed.sample_index};
}

/*!
 * Run `check(seed)`; if its result does not pass, run it once more with
 * retry_seed(seed). Returns the last result.
 */
template<class Check>
auto with_retry(const SeedSpec& seed, Check&& check) -> decltype(check(seed))
{
    auto first = check(seed);
    if (first.passed())
        return first;
    return check(retry_seed(seed));
}

}  // namespace wavewalk
