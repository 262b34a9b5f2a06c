#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "wavewalk/errors.hpp"
#include "wavewalk/sampling.hpp"

namespace wavewalk {

//! Monte Carlo result with its seed provenance
struct Estimate
{
    double mean = 0;
    double std_error = 0;  //!< Bessel-corrected sample sd over sqrt(n)
    std::uint64_t n = 0;
    SeedSpec seed;
};

//! Single-pass mean and sum of squared deviations (Welford, Chan merge)
class RunningStats
{
  public:
    void add(double x) noexcept
    {
        ++n_;
        double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    void merge(const RunningStats& other) noexcept
    {
        if (other.n_ == 0)
            return;
        if (n_ == 0)
        {
            *this = other;
            return;
        }
        double na = static_cast<double>(n_);
        double nb = static_cast<double>(other.n_);
        double n = na + nb;
        double delta = other.mean_ - mean_;
        mean_ += delta * (nb / n);
        m2_ += other.m2_ + delta * delta * (na * nb / n);
        n_ += other.n_;
    }

    std::uint64_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept
    {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double std_error() const noexcept
    {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

    Estimate to_estimate(const SeedSpec& seed) const
    {
        return Estimate{mean_, std_error(), n_, seed};
    }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0;
    double m2_ = 0;
};

//---------------------------------------------------------------------------//
/*!
 * How a batch of replicates is split across threads.
 *
 * Replicates are cut into \c partitions contiguous ranges, each reduced
 * into its own accumulator, and the accumulators are merged in partition
 * order. Results therefore depend on the partition count but never on the
 * number of threads.
 */
struct Execution
{
    std::size_t partitions = default_partitions();
    std::size_t threads = 0;  //!< 0: one per hardware thread

    static std::size_t default_partitions()
    {
        return std::max<std::size_t>(1, std::thread::hardware_concurrency());
    }
};

/*!
 * Run `per_sample(i, out)` for i in [0, n) and accumulate each of the
 * `width` output slots.
 *
 * If replicates throw, the exception of the lowest failing partition is
 * rethrown after all workers stop.
 */
template<class F>
std::vector<RunningStats>
accumulate(std::uint64_t n, std::size_t width, const Execution& exec, F&& per_sample)
{
    std::size_t parts = std::max<std::size_t>(1, exec.partitions);
    std::vector<std::vector<RunningStats>> partial(parts,
                                                   std::vector<RunningStats>(width));
    std::vector<std::exception_ptr> errors(parts);
    std::atomic<std::size_t> next{0};
    // Lowest partition index that has failed; only partitions above it stop
    // early, so the reported error does not depend on thread timing.
    std::atomic<std::size_t> first_failed{parts};

    auto work = [&] {
        std::vector<double> out(width);
        for (std::size_t p = next++; p < parts; p = next++)
        {
            std::uint64_t begin = n / parts * p + std::min<std::uint64_t>(p, n % parts);
            std::uint64_t end = begin + n / parts + (p < n % parts ? 1 : 0);
            try
            {
                for (std::uint64_t i = begin;
                     i < end && p < first_failed.load(std::memory_order_relaxed); ++i)
                {
                    per_sample(i, std::span<double>(out));
                    for (std::size_t k = 0; k < width; ++k)
                        partial[p][k].add(out[k]);
                }
            }
            catch (...)
            {
                errors[p] = std::current_exception();
                std::size_t seen = first_failed.load();
                while (p < seen && !first_failed.compare_exchange_weak(seen, p))
                {
                }
            }
        }
    };

    std::size_t nthreads = exec.threads ? exec.threads
                                        : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, parts);
    if (nthreads <= 1)
    {
        work();
    }
    else
    {
        std::vector<std::jthread> pool;
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back(work);
    }

    for (auto& e : errors)
    {
        if (e)
            std::rethrow_exception(e);
    }

    std::vector<RunningStats> total(width);
    for (const auto& part : partial)
    {
        for (std::size_t k = 0; k < width; ++k)
            total[k].merge(part[k]);
    }
    return total;
}

inline void require_samples(std::uint64_t n)
{
    if (n < 2)
        throw ConfigError("n must be ≥ 2");
}

}  // namespace wavewalk
