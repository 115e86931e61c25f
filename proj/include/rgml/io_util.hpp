#pragma once

// Small IO helpers shared by dataset/checkpoint writers: little-endian
// binary primitives, shortest-round-trip float printing, content hashing,
// and atomic file replacement (write temp, then rename).

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgml {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class T>
inline void put_le(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
inline T get_le(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size())
        throw IoError("truncated file: need " + std::to_string(sizeof(T)) +
                      " bytes at offset " + std::to_string(pos) + ", have " +
                      std::to_string(in.size() - pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

// Shortest representation that round-trips exactly; used for all CSV output
// so reruns are byte-comparable.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline uint64_t fnv1a64(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

inline uint64_t fnv1a64_file(const std::string& path) {
    return fnv1a64(read_file(path));
}

// Writes via a sibling temp file and renames over the target, so a crashed
// run never leaves a half-written artifact behind.
inline void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace rgml
