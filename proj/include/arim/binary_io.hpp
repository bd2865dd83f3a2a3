#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "arim/error.hpp"

// Little-endian primitives for the record and checkpoint formats. Short reads
// raise FormatError.

namespace arim::binary {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(out, b, 8);
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void read_bytes(std::istream& in, void* data, std::size_t n, std::string_view what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatError("truncated data while reading " + std::string(what));
    }
}

inline std::uint32_t read_u32(std::istream& in, std::string_view what) {
    unsigned char b[4];
    read_bytes(in, b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& in, std::string_view what) {
    unsigned char b[8];
    read_bytes(in, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline float read_f32(std::istream& in, std::string_view what) {
    return std::bit_cast<float>(read_u32(in, what));
}

inline double read_f64(std::istream& in, std::string_view what) {
    return std::bit_cast<double>(read_u64(in, what));
}

inline void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
    std::string got(magic.size(), '\0');
    read_bytes(in, got.data(), got.size(), what);
    if (got != magic) throw FormatError("bad magic in " + std::string(what));
}

} // namespace arim::binary
