#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ivpseudo {

/// Deterministic random stream keyed by (master_seed, stream_id).
///
/// The generator state is seeded from a splitmix64 hash of both keys, so
/// streams for different replicates never depend on how many draws another
/// stream consumed. `derive(purpose)` yields a child stream for a sub-task
/// (pseudo permutation, CV folds, sample split) of the same replicate.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    RngStream derive(std::uint64_t purpose) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform();
    /// Uniform integer on [0, bound); bound must be > 0.
    std::uint64_t uniform_index(std::uint64_t bound);
    double normal();
    /// Uniformly random permutation of 0..n-1 (Fisher-Yates, high index first).
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Purpose tags for derived streams.
namespace stream_purpose {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPseudo = 2;
inline constexpr std::uint64_t kCrossValidation = 3;
inline constexpr std::uint64_t kSampleSplit = 4;
inline constexpr std::uint64_t kPresetDraws = 5;
}  // namespace stream_purpose

}  // namespace ivpseudo
