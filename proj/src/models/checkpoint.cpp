#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "cfsl/error.hpp"
#include "cfsl/hash.hpp"
#include "cfsl/models.hpp"
#include "cfsl/serialization.hpp"

namespace cfsl {
namespace {

constexpr std::array<char, 8> kMagic{'C', 'F', 'S', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& file) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint '" + file + "'");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

std::uint64_t body_digest(const std::vector<float>& body) {
    Fnv1a h;
    h.update(std::span<const float>(body));
    return h.digest();
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const Json header{{"spec", ckpt.spec},
                      {"tag", ckpt.tag},
                      {"validation_score", ckpt.validation_score},
                      {"body_values", ckpt.body.size()},
                      {"body_hash", hex_digest(body_digest(ckpt.body))}};
    const std::string text = header.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic.data(), kMagic.size());
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (float v : ckpt.body) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        write_u32(out, bits);
    }
    if (!out) throw CheckpointError("short write to checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + file + "'");
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw CheckpointError("'" + file + "' is not a checkpoint");
    }
    const std::uint32_t version = read_u32(in, file);
    if (version > kVersion) {
        throw VersionError("checkpoint '" + file + "' has version " + std::to_string(version) + ", newest supported is " +
                           std::to_string(kVersion));
    }
    const std::uint32_t header_len = read_u32(in, file);
    std::string text(header_len, '\0');
    if (!in.read(text.data(), header_len)) throw CheckpointError("truncated checkpoint header in '" + file + "'");
    const Json header = parse_json(text, "checkpoint header of '" + file + "'");

    Checkpoint ckpt;
    ckpt.spec = header.at("spec").get<LearnerSpec>();
    ckpt.tag = header.at("tag").get<std::string>();
    ckpt.validation_score = header.at("validation_score").get<double>();
    const auto n = header.at("body_values").get<std::size_t>();
    ckpt.body.resize(n);
    for (auto& v : ckpt.body) {
        const std::uint32_t bits = read_u32(in, file);
        std::memcpy(&v, &bits, sizeof v);
    }
    if (hex_digest(body_digest(ckpt.body)) != header.at("body_hash").get<std::string>()) {
        throw CheckpointError("checkpoint '" + file + "' failed its integrity hash");
    }
    return ckpt;
}

}  // namespace cfsl
