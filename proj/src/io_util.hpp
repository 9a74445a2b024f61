#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pqii::detail {

// Little-endian scalar IO. Throws on short reads so loaders can surface
// truncation with context.

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(out, b, 8);
}

inline void write_i32(std::ostream& out, std::int32_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
}

inline void write_f32(std::ostream& out, float v) {
    write_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    write_bytes(out, b, 2);
}

inline void read_bytes(std::istream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw std::runtime_error(std::string("truncated read of ") + what);
    }
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_bytes(in, b, 4, what);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    read_bytes(in, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::int32_t read_i32(std::istream& in, const char* what) {
    return static_cast<std::int32_t>(read_u32(in, what));
}

inline float read_f32(std::istream& in, const char* what) {
    return std::bit_cast<float>(read_u32(in, what));
}

inline std::uint16_t read_u16(std::istream& in, const char* what) {
    unsigned char b[2];
    read_bytes(in, b, 2, what);
    return static_cast<std::uint16_t>(std::uint16_t(b[0]) | std::uint16_t(b[1]) << 8);
}

inline void expect_magic(std::istream& in, const char magic[4], const char* format_name) {
    char got[4];
    read_bytes(in, got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0) {
        throw std::runtime_error(std::string(format_name) + ": bad magic");
    }
}

}  // namespace pqii::detail
