#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include <boost/random/normal_distribution.hpp>

#include "wavewalk/geometry.hpp"

namespace wavewalk {

//---------------------------------------------------------------------------//
/*!
 * Address of one Monte Carlo replicate.
 *
 * A replicate's generator is seeded from one Philox4x64-10 block:
 *
 *   key     = (base_seed, 0)
 *   counter = (stream_id, sample_index, 0, lane)
 *
 * Philox is a bijection of the counter for a fixed key, so distinct
 * (stream_id, sample_index, lane) under one base seed always get distinct
 * seeds. The block becomes the state of a xoshiro256++ generator that
 * produces the replicate's draws; \c lane separates independent draw
 * sequences of the same replicate.
 *
 * Convention used throughout the library: \c stream_id selects a coupling
 * group (all queries evaluated with common random numbers share it) and
 * \c sample_index is the replicate index within an estimate.
 */
struct SeedSpec
{
    std::uint64_t base_seed = 0;
    std::uint64_t stream_id = 0;
    std::uint64_t sample_index = 0;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo)
{
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

//! Philox4x64 with 10 rounds (Salmon et al., Random123)
inline std::array<std::uint64_t, 4>
philox4x64(std::array<std::uint64_t, 4> ctr, std::array<std::uint64_t, 2> key)
{
    constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ull;
    constexpr std::uint64_t m1 = 0xCA5A826395121157ull;
    constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ull;
    constexpr std::uint64_t w1 = 0xBB67AE8584CAA73Bull;

    for (int round = 0; round < 10; ++round)
    {
        if (round > 0)
        {
            key[0] += w0;
            key[1] += w1;
        }
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(m0, ctr[0], hi0, lo0);
        detail::mulhilo64(m1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

//---------------------------------------------------------------------------//
/*!
 * Generator for one replicate.
 *
 * Satisfies UniformRandomBitGenerator. Construction is pure; advancing is
 * the only mutation.
 */
class RngStream
{
  public:
    using result_type = std::uint64_t;

    explicit RngStream(const SeedSpec& seed, std::uint64_t lane = 0)
        : state_(philox4x64({seed.stream_id, seed.sample_index, 0, lane},
                            {seed.base_seed, 0}))
    {
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
            state_[0] = 1;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    // xoshiro256++ (Blackman and Vigna)
    result_type operator()() noexcept
    {
        std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

  private:
    std::array<std::uint64_t, 4> state_;

    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }
};

//! Uniform on the open interval (0, 1); never returns 0 or 1
inline double sample_uniform_open(RngStream& stream)
{
    return (static_cast<double>(stream() >> 11) + 0.5) * 0x1p-53;
}

//! Standard normal via the Marsaglia-Tsang ziggurat
inline double sample_standard_normal(RngStream& stream)
{
    boost::random::normal_distribution<double> normal;
    return normal(stream);
}

//! Standard Cauchy by inverse CDF: tan(pi (U - 1/2))
inline double sample_standard_cauchy(RngStream& stream)
{
    double u = sample_uniform_open(stream);
    return std::tan(std::numbers::pi * (u - 0.5));
}

//! Fill `out` with a unit vector uniform on S^{n-1}, n = out.size() >= 1
inline void sample_uniform_sphere(RngStream& stream, std::span<double> out)
{
    if (out.size() == 1)
    {
        out[0] = (stream() >> 63) ? 1.0 : -1.0;
        return;
    }
    boost::random::normal_distribution<double> normal;
    double r2 = 0;
    do
    {
        r2 = 0;
        for (double& c : out)
        {
            c = normal(stream);
            r2 += c * c;
        }
    } while (r2 == 0);
    double inv = 1 / std::sqrt(r2);
    for (double& c : out)
        c *= inv;
}

inline Point sample_uniform_sphere(RngStream& stream, std::size_t dim)
{
    if (dim == 0)
        throw std::invalid_argument("sphere dimension must be at least 1");
    std::vector<double> v(dim);
    sample_uniform_sphere(stream, std::span<double>(v));
    return Point(std::move(v));
}

}  // namespace wavewalk
