#include "esg/features.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "esg/error.hpp"

namespace esg {

namespace {

constexpr char kMagic[4] = {'E', 'S', 'G', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
    out.push_back(static_cast<char>((x >> 16) & 0xff));
    out.push_back(static_cast<char>((x >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

segment_features reverse_segments(const segment_features& f) {
    segment_features out = f;
    for (int t = 0; t < f.t_count; ++t) {
        for (int d = 0; d < f.dim; ++d) {
            out.at(t, d) = f.at(f.t_count - 1 - t, d);
        }
    }
    return out;
}

segment_features load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open feature file " + path);
    }
    std::string raw((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw io_error("read failure on " + path);
    }
    if (raw.size() < 16) {
        throw io_error("feature file truncated: " + path);
    }
    const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
    if (std::memcmp(p, kMagic, 4) != 0) {
        throw format_error("bad magic in " + path);
    }
    std::uint32_t version = get_u32(p + 4);
    if (version != kVersion) {
        throw format_error("unsupported feature file version " +
                           std::to_string(version) + " in " + path);
    }
    std::uint32_t t_count = get_u32(p + 8);
    std::uint32_t dim = get_u32(p + 12);
    if (t_count < 1 || dim < 1) {
        throw format_error("feature file declares empty matrix: " + path);
    }
    std::size_t payload = static_cast<std::size_t>(t_count) * dim * 4;
    if (raw.size() < 16 + payload) {
        throw io_error("feature file truncated: " + path);
    }
    if (raw.size() > 16 + payload) {
        throw format_error("trailing bytes after payload in " + path);
    }
    segment_features f;
    f.video_id = std::filesystem::path(path).stem().string();
    f.t_count = static_cast<int>(t_count);
    f.dim = static_cast<int>(dim);
    f.values.resize(static_cast<std::size_t>(t_count) * dim);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        std::uint32_t bits = get_u32(p + 16 + i * 4);
        f.values[i] = std::bit_cast<float>(bits);
        if (!std::isfinite(f.values[i])) {
            throw validation_error("non-finite feature value in " + path);
        }
    }
    return f;
}

void write_features(const segment_features& f, const std::string& path) {
    if (f.t_count < 1 || f.dim < 1 ||
        f.values.size() != static_cast<std::size_t>(f.t_count) * f.dim) {
        throw validation_error("feature matrix dims do not match payload");
    }
    for (float x : f.values) {
        if (!std::isfinite(x)) {
            throw validation_error("non-finite feature value for video " +
                                   f.video_id);
        }
    }
    std::string out;
    out.reserve(16 + f.values.size() * 4);
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(f.t_count));
    put_u32(out, static_cast<std::uint32_t>(f.dim));
    for (float x : f.values) {
        put_u32(out, std::bit_cast<std::uint32_t>(x));
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw io_error("cannot open " + path + " for writing");
    }
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) {
        throw io_error("write failure on " + path);
    }
}

}  // namespace esg
