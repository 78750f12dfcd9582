#include "ivpseudo/rng.hpp"

#include <stdexcept>

namespace ivpseudo {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {
std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t stream_id) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL));
}
}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      engine_(stream_key(master_seed, stream_id)) {}

RngStream RngStream::derive(std::uint64_t purpose) const {
    return RngStream(stream_key(master_seed_, stream_id_), purpose);
}

double RngStream::uniform() {
    // 53 random mantissa bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index: bound must be positive");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
}

double RngStream::normal() { return normal_(engine_); }

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace ivpseudo
