#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace cfsl {

// 64-bit FNV-1a. Used for content fingerprints in manifests, reports and
// checkpoints; not a cryptographic hash.
class Fnv1a {
public:
    void update(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) {
        update(s.data(), s.size());
        // length terminator so ("ab","c") and ("a","bc") differ
        const std::uint64_t n = s.size();
        update(&n, sizeof n);
    }
    template <class T>
    void update(std::span<const T> values) {
        update(values.data(), values.size_bytes());
    }
    void update_u64(std::uint64_t v) { update(&v, sizeof v); }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex_digest(std::uint64_t h);

}  // namespace cfsl
