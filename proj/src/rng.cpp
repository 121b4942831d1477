#include "esg/rng.hpp"

namespace esg {

std::uint64_t counter_rng::mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t counter_rng::next_u64() {
    std::uint64_t z = mix(seed + 0x632be59bd9b4e019ull);
    z = mix(z ^ stream);
    return mix(z + counter++ * 0x9e3779b97f4a7c15ull);
}

double counter_rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t counter_rng::next_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
}

double counter_rng::next_real(double lo, double hi) {
    return lo + next_unit() * (hi - lo);
}

double counter_rng::next_normal(double sigma) {
    double acc = 0.0;
    for (int i = 0; i < 12; ++i) {
        acc += next_unit();
    }
    return (acc - 6.0) * sigma;
}

void counter_rng::shuffle(std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        int j = static_cast<int>(next_int(0, i));
        std::swap(v[i], v[j]);
    }
}

std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t salt) {
    return counter_rng::mix(parent ^ (salt * 0xd1342543de82ef95ull));
}

}  // namespace esg
