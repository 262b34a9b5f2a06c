// Estimate u(t, x) = e^{x - t} for f(s, y) = e^y cos s on (-1, 1) with the
// three estimators and print them next to the exact value.
#include <cmath>
#include <cstdio>

#include "wavewalk.hpp"

int main()
{
    using namespace wavewalk;

    Domain domain(Interval(-1, 1));
    BoundaryData f = paper_example(domain);
    QueryPoint q{0.5, Point{0.25}};
    SeedSpec seed{2024, 0, 0};
    const std::uint64_t n = 200'000;

    EstimatorConfig cfg;
    Estimate mixed = estimate_u(domain, f, q, n, cfg, seed);
    Estimate direct = estimate_u_direct(domain, f, q, n, cfg.em, seed);
    QuadratureSpec spec;
    QuadratureEstimate quad = estimate_u_quadrature(domain, f, q, spec, n / 10, cfg, seed);

    std::printf("exact       %.5f\n", std::exp(q.x[0] - q.t));
    std::printf("mixed       %.5f +- %.5f\n", mixed.mean, mixed.std_error);
    std::printf("direct      %.5f +- %.5f\n", direct.mean, direct.std_error);
    std::printf("quadrature  %.5f +- %.5f (tail <= %.4f)\n", quad.estimate.mean,
                quad.estimate.std_error, quad.tail_bound);

    // The same estimate is a finite-difference solution of the wave equation.
    ResidualReport r = residual_wave(domain, f, q, 0.05, n, cfg, seed);
    std::printf("residual    %.4f +- %.4f (z = %.2f)\n", r.residual.mean, r.residual.std_error,
                r.z_score);
}
