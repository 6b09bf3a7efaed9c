#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>

namespace motseg {

struct Vec3f {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;
};

struct Vec3d {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3d operator+(const Vec3d& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3d operator-(const Vec3d& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3d operator*(double s) const { return {x * s, y * s, z * s}; }
};

inline bool is_finite(const Vec3f& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Integer grid index of a voxel cell. Ordered lexicographically by (x, y, z).
struct VoxelCoord {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;

    VoxelCoord offset(int dx, int dy, int dz) const {
        return {x + dx, y + dy, z + dz};
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct VoxelCoordHash {
    std::size_t operator()(const VoxelCoord& c) const {
        std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.x)) << 42) ^
                            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.y)) << 21) ^
                            static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.z));
        return static_cast<std::size_t>(splitmix64(key));
    }
};

}  // namespace motseg
