#include "cfsl/hash.hpp"

#include <cstdio>
#include <string>

namespace cfsl {

std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cfsl
