#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace pathbf {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// A reproducible random stream keyed by (master seed, stream id).
///
/// Streams never share state. Child streams are derived with split(), which
/// hashes the parent id with a key, so the stream used for (replicate r, step
/// i, grid point g) depends only on those indices and not on the order in
/// which work is scheduled.
class RngStream {
public:
    using result_type = std::mt19937_64::result_type;

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : master_seed_(master_seed), stream_id_(stream_id)
    {
        std::seed_seq seq{
            static_cast<std::uint32_t>(master_seed & 0xffffffffULL),
            static_cast<std::uint32_t>(master_seed >> 32),
            static_cast<std::uint32_t>(stream_id & 0xffffffffULL),
            static_cast<std::uint32_t>(stream_id >> 32),
            0x70617468U};
        engine_.seed(seq);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    RngStream split(std::uint64_t key) const
    {
        const std::uint64_t child =
            detail::splitmix64(stream_id_ ^ detail::splitmix64(key + 0x632be59bd9b4e019ULL));
        return RngStream(master_seed_, child);
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform()
    {
        double u;
        do {
            u = std::generate_canonical<double, 53>(engine_);
        } while (u <= 0.0);
        return u;
    }

    double normal() { return normal_(engine_); }

    /// Gamma with the given shape and rate.
    double gamma(double shape, double rate)
    {
        std::gamma_distribution<double> g(shape, 1.0 / rate);
        return g(engine_);
    }

    double chi_squared(double df) { return gamma(0.5 * df, 0.5); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace pathbf
