#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wavewalk/errors.hpp"

namespace wavewalk {

//---------------------------------------------------------------------------//
/*!
 * A point of R^d with d >= 1 finite coordinates.
 */
class Point
{
  public:
    Point() = default;
    Point(std::initializer_list<double> coords) : coords_(coords) { check(); }
    explicit Point(std::vector<double> coords) : coords_(std::move(coords))
    {
        check();
    }

    //! Origin of R^dim
    static Point zeros(std::size_t dim) { return Point(std::vector<double>(dim, 0.0)); }

    std::size_t dim() const noexcept { return coords_.size(); }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }
    double& operator[](std::size_t i) noexcept { return coords_[i]; }

    std::span<const double> coords() const noexcept { return coords_; }
    std::span<double> coords() noexcept { return coords_; }

    //! Copy with coordinate `axis` shifted by `delta`
    Point shifted(std::size_t axis, double delta) const
    {
        Point p = *this;
        p.coords_[axis] += delta;
        return p;
    }

    friend bool operator==(const Point&, const Point&) = default;

  private:
    std::vector<double> coords_;

    void check() const
    {
        if (coords_.empty())
            throw std::invalid_argument("point dimension must be at least 1");
        for (double c : coords_)
        {
            if (!std::isfinite(c))
                throw std::invalid_argument("point coordinates must be finite");
        }
    }
};

inline double norm(std::span<const double> v) noexcept
{
    double s = 0;
    for (double c : v)
        s += c * c;
    return std::sqrt(s);
}

inline double distance(const Point& a, const Point& b) noexcept
{
    double s = 0;
    for (std::size_t i = 0; i < a.dim(); ++i)
    {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

//! A point (s, x) of the cylinder R x D
struct CylinderPoint
{
    double s = 0;
    Point x;
};

//---------------------------------------------------------------------------//
// Shapes
//
// Every shape exposes a signed clearance: the exact distance to the boundary
// for interior points, zero on the boundary, negative outside. Samplers use
// it in their inner loops so that a step that crosses the boundary never
// needs a separate membership query.
//---------------------------------------------------------------------------//

template<class S>
concept DomainShape = requires(const S& s, const Point& p) {
    { s.dim() } -> std::convertible_to<std::size_t>;
    { s.clearance(p) } -> std::convertible_to<double>;
    { s.nearest_boundary_point(p) } -> std::same_as<Point>;
    { s.diameter() } -> std::convertible_to<double>;
};

//! Open interval (lo, hi) of the real line
class Interval
{
  public:
    Interval(double lo, double hi) : lo_(lo), hi_(hi)
    {
        if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
            throw std::invalid_argument("interval requires finite lo < hi");
    }

    std::size_t dim() const noexcept { return 1; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    double diameter() const noexcept { return hi_ - lo_; }

    double clearance(const Point& p) const noexcept
    {
        return std::min(p[0] - lo_, hi_ - p[0]);
    }

    // Ties go to lo.
    Point nearest_boundary_point(const Point& p) const
    {
        return Point{(p[0] - lo_ <= hi_ - p[0]) ? lo_ : hi_};
    }

  private:
    double lo_;
    double hi_;
};

//! Open Euclidean ball
class Ball
{
  public:
    Ball(Point center, double radius) : center_(std::move(center)), radius_(radius)
    {
        if (!(std::isfinite(radius) && radius > 0))
            throw std::invalid_argument("ball radius must be positive");
    }

    std::size_t dim() const noexcept { return center_.dim(); }
    const Point& center() const noexcept { return center_; }
    double radius() const noexcept { return radius_; }
    double diameter() const noexcept { return 2 * radius_; }

    double clearance(const Point& p) const noexcept
    {
        return radius_ - distance(p, center_);
    }

    // Radial projection; the center projects along the first axis.
    Point nearest_boundary_point(const Point& p) const
    {
        double r = distance(p, center_);
        Point q = center_;
        if (r == 0)
        {
            q[0] += radius_;
            return q;
        }
        double scale = radius_ / r;
        for (std::size_t i = 0; i < q.dim(); ++i)
            q[i] += scale * (p[i] - center_[i]);
        // Rounding may leave q a hair inside; push it onto the closed
        // complement so membership fails on the returned point.
        while (clearance(q) > 0)
        {
            scale = std::nextafter(scale, std::numeric_limits<double>::infinity());
            for (std::size_t i = 0; i < q.dim(); ++i)
                q[i] = center_[i] + scale * (p[i] - center_[i]);
        }
        return q;
    }

  private:
    Point center_;
    double radius_;
};

//! Open axis-aligned box prod_i (lo_i, hi_i)
class Box
{
  public:
    Box(Point lo, Point hi) : lo_(std::move(lo)), hi_(std::move(hi))
    {
        if (lo_.dim() != hi_.dim())
            throw std::invalid_argument("box corners must have equal dimension");
        for (std::size_t i = 0; i < lo_.dim(); ++i)
        {
            if (!(lo_[i] < hi_[i]))
                throw std::invalid_argument("box requires lo_i < hi_i on every axis");
        }
    }

    std::size_t dim() const noexcept { return lo_.dim(); }
    const Point& lo() const noexcept { return lo_; }
    const Point& hi() const noexcept { return hi_; }
    double diameter() const noexcept { return distance(lo_, hi_); }

    double clearance(const Point& p) const noexcept
    {
        double c = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lo_.dim(); ++i)
            c = std::min(c, std::min(p[i] - lo_[i], hi_[i] - p[i]));
        return c;
    }

    // Exterior points clamp onto the box. Interior points move to the
    // nearest face; ties go to the smallest axis, then to the lo face.
    Point nearest_boundary_point(const Point& p) const
    {
        Point q = p;
        bool outside = false;
        for (std::size_t i = 0; i < q.dim(); ++i)
        {
            if (q[i] <= lo_[i] || q[i] >= hi_[i])
            {
                outside = true;
                q[i] = std::clamp(q[i], lo_[i], hi_[i]);
            }
        }
        if (outside)
            return q;

        std::size_t best_axis = 0;
        bool best_lo = true;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < q.dim(); ++i)
        {
            double dlo = p[i] - lo_[i];
            double dhi = hi_[i] - p[i];
            if (dlo < best)
            {
                best = dlo;
                best_axis = i;
                best_lo = true;
            }
            if (dhi < best)
            {
                best = dhi;
                best_axis = i;
                best_lo = false;
            }
        }
        q[best_axis] = best_lo ? lo_[best_axis] : hi_[best_axis];
        return q;
    }

  private:
    Point lo_;
    Point hi_;
};

//---------------------------------------------------------------------------//
/*!
 * Runtime-selected bounded domain.
 *
 * Samplers are templated on \c DomainShape; \c visit hands them the concrete
 * shape so the dispatch happens once per batch rather than once per step.
 */
class Domain
{
  public:
    using Shape = std::variant<Interval, Ball, Box>;

    Domain(Interval s) : shape_(std::move(s)) {}
    Domain(Ball s) : shape_(std::move(s)) {}
    Domain(Box s) : shape_(std::move(s)) {}

    template<class F>
    decltype(auto) visit(F&& f) const
    {
        return std::visit(std::forward<F>(f), shape_);
    }

    const Shape& shape() const noexcept { return shape_; }

    std::size_t dim() const
    {
        return visit([](const auto& s) { return s.dim(); });
    }

    double diameter() const
    {
        return visit([](const auto& s) { return s.diameter(); });
    }

    //! Short shape name as used in configuration files
    std::string kind() const
    {
        struct
        {
            std::string operator()(const Interval&) const { return "interval"; }
            std::string operator()(const Ball&) const { return "ball"; }
            std::string operator()(const Box&) const { return "box"; }
        } names;
        return std::visit(names, shape_);
    }

    double clearance(const Point& p) const
    {
        return visit([&](const auto& s) { return s.clearance(p); });
    }

  private:
    Shape shape_;
};

//---------------------------------------------------------------------------//
// Queries with checked preconditions
//---------------------------------------------------------------------------//

inline void require_dim(std::size_t domain_dim, const Point& p)
{
    if (p.dim() != domain_dim)
    {
        throw DimensionMismatch("point has dimension " + std::to_string(p.dim())
                                + ", domain has dimension "
                                + std::to_string(domain_dim));
    }
}

//! True iff p lies strictly inside the (open) domain
template<DomainShape S>
bool contains(const S& shape, const Point& p)
{
    require_dim(shape.dim(), p);
    return shape.clearance(p) > 0;
}

inline bool contains(const Domain& domain, const Point& p)
{
    return domain.visit([&](const auto& s) { return contains(s, p); });
}

template<DomainShape S>
double distance_to_boundary(const S& shape, const Point& p)
{
    require_dim(shape.dim(), p);
    double c = shape.clearance(p);
    if (!(c > 0))
        throw DomainError("distance_to_boundary requires an interior point");
    return c;
}

inline double distance_to_boundary(const Domain& domain, const Point& p)
{
    return domain.visit([&](const auto& s) { return distance_to_boundary(s, p); });
}

template<DomainShape S>
Point project_to_boundary(const S& shape, const Point& p)
{
    require_dim(shape.dim(), p);
    return shape.nearest_boundary_point(p);
}

inline Point project_to_boundary(const Domain& domain, const Point& p)
{
    return domain.visit([&](const auto& s) { return project_to_boundary(s, p); });
}

}  // namespace wavewalk
