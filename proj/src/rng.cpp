// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/rng.hpp"

#include <sstream>

namespace turbodsa {

std::string Rng::state() const {
    std::ostringstream out;
    out << gen_;
    out << ' ' << (have_spare_ ? 1 : 0);
    if (have_spare_) {
        out.precision(17);
        out << ' ' << spare_;
    }
    return out.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream in(s);
    in >> gen_;
    int flag = 0;
    in >> flag;
    have_spare_ = (flag == 1);
    spare_ = 0.0;
    if (have_spare_) in >> spare_;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 over the combined value
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& stream) {
    // FNV-1a over the stream name, then mix with the base seed
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return derive_seed(base, h);
}

}  // namespace turbodsa
