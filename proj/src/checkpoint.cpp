// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "turbodsa/errors.hpp"

namespace turbodsa {

namespace {

constexpr char kMagic[4] = {'T', 'D', 'S', 'A'};

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("checkpoint corrupt: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1ULL << 32)) throw std::runtime_error("checkpoint corrupt: bad string length");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint corrupt: truncated");
    return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor get_tensor(std::istream& in) {
    const std::uint64_t rank = get_u64(in);
    if (rank > 8) throw std::runtime_error("checkpoint corrupt: bad tensor rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
        shape[i] = static_cast<std::size_t>(get_u64(in));
        n *= shape[i];
    }
    if (n > (1ULL << 31)) throw std::runtime_error("checkpoint corrupt: bad tensor size");
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint corrupt: truncated");
    return t;
}

void put_tensor_list(std::ostream& out,
                     const std::vector<std::pair<std::string, Tensor>>& list) {
    put_u64(out, list.size());
    for (const auto& [name, tensor] : list) {
        put_string(out, name);
        put_tensor(out, tensor);
    }
}

std::vector<std::pair<std::string, Tensor>> get_tensor_list(std::istream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1ULL << 24)) throw std::runtime_error("checkpoint corrupt: bad list length");
    std::vector<std::pair<std::string, Tensor>> list;
    list.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = get_string(in);
        list.emplace_back(std::move(name), get_tensor(in));
    }
    return list;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    out.put(static_cast<char>(Checkpoint::kVersion));
    put_u64(out, ckpt.fingerprint);
    put_u64(out, ckpt.epoch);
    put_u64(out, ckpt.adam_steps);
    put_tensor_list(out, ckpt.params);
    put_tensor_list(out, ckpt.adam_m);
    put_tensor_list(out, ckpt.adam_v);
    put_u64(out, ckpt.rng_states.size());
    for (const auto& [name, state] : ckpt.rng_states) {
        put_string(out, name);
        put_string(out, state);
    }
    put_u64(out, 0x454e44u);  // end marker
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint corrupt: bad magic");
    const int version = in.get();
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.fingerprint = get_u64(in);
    ckpt.epoch = get_u64(in);
    ckpt.adam_steps = get_u64(in);
    ckpt.params = get_tensor_list(in);
    ckpt.adam_m = get_tensor_list(in);
    ckpt.adam_v = get_tensor_list(in);
    const std::uint64_t n_rng = get_u64(in);
    if (n_rng > 64) throw std::runtime_error("checkpoint corrupt: bad rng count");
    for (std::uint64_t i = 0; i < n_rng; ++i) {
        std::string name = get_string(in);
        ckpt.rng_states[name] = get_string(in);
    }
    if (get_u64(in) != 0x454e44u) throw std::runtime_error("checkpoint corrupt: bad end marker");
    return ckpt;
}

}  // namespace turbodsa
