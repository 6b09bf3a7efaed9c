#pragma once

// Little-endian binary stream helpers shared by the file format readers and
// writers. All on-disk formats in this project are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "motseg/error.hpp"

namespace motseg::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; reads/writes here do not byte-swap");

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& what = "value") {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw IoError("truncated read: " + what);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void write_magic(std::ostream& os, const char magic[4]) {
    os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[4], const std::string& path) {
    char buf[4] = {};
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0) {
        throw DataError("bad magic in " + path + ": expected '" + std::string(magic, 4) + "'");
    }
}

inline void write_f32_block(std::ostream& os, const double* values, std::size_t n) {
    std::vector<float> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = static_cast<float>(values[i]);
    os.write(reinterpret_cast<const char*>(tmp.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
}

inline void read_f32_block(std::istream& is, double* values, std::size_t n,
                           const std::string& what = "float block") {
    std::vector<float> tmp(n);
    is.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw IoError("truncated read: " + what);
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(tmp[i]);
}

}  // namespace motseg::detail
