#include "motseg/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "motseg/error.hpp"

namespace motseg {

void GridConfig::validate() const {
    if (!(resolution > 0.0))
        throw ConfigError("grid resolution must be positive, got " + std::to_string(resolution));
    if (window < 2)
        throw ConfigError("window must be at least 2, got " + std::to_string(window));
    if (window > 64)
        throw ConfigError("window is capped at 64 (packed histories), got " +
                          std::to_string(window));
    if (radius < 0)
        throw ConfigError("radius must be non-negative, got " + std::to_string(radius));
}

namespace {

std::int32_t cell_of(float coord, double resolution) {
    return static_cast<std::int32_t>(std::floor(static_cast<double>(coord) / resolution));
}

}  // namespace

Voxelization voxelize(const PointFrame& frame, double resolution) {
    if (!(resolution > 0.0))
        throw ConfigError("grid resolution must be positive, got " + std::to_string(resolution));

    // coord -> position in coords; rebuilt sorted afterwards
    std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
    std::vector<VoxelCoord> coords;
    std::vector<std::vector<std::int32_t>> lists;
    index.reserve(frame.points.size());

    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        const Vec3f& p = frame.points[i];
        VoxelCoord c{cell_of(p.x, resolution), cell_of(p.y, resolution), cell_of(p.z, resolution)};
        auto [it, inserted] = index.try_emplace(c, coords.size());
        if (inserted) {
            coords.push_back(c);
            lists.emplace_back();
        }
        lists[it->second].push_back(static_cast<std::int32_t>(i));
    }

    std::vector<std::size_t> order(coords.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });

    Voxelization out;
    out.coords.reserve(coords.size());
    out.point_lists.reserve(coords.size());
    for (std::size_t i : order) {
        out.coords.push_back(coords[i]);
        out.point_lists.push_back(std::move(lists[i]));
    }
    return out;
}

Voxelization voxelize_coords(std::vector<VoxelCoord> coords) {
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    Voxelization out;
    out.point_lists.assign(coords.size(), {});
    out.coords = std::move(coords);
    return out;
}

OccupancyState::OccupancyState(GridConfig config) : config_(config) {
    config_.validate();
    mask_ = (config_.window == 64) ? ~std::uint64_t{0}
                                   : ((std::uint64_t{1} << config_.window) - 1);
}

void OccupancyState::advance(Voxelization vox) {
    // Shift every stored history one step into the past, evicting voxels whose
    // entire window is now empty.
    for (auto it = map_.begin(); it != map_.end();) {
        std::uint64_t shifted = (it->second << 1) & mask_;
        if (shifted == 0) {
            it = map_.erase(it);
        } else {
            it->second = shifted;
            ++it;
        }
    }
    for (const VoxelCoord& c : vox.coords) map_[c] |= std::uint64_t{1};
    current_ = std::move(vox);
    ++frame_;
}

std::uint64_t OccupancyState::history_bits(const VoxelCoord& v) const {
    auto it = map_.find(v);
    return it == map_.end() ? 0 : it->second;
}

std::vector<std::uint8_t> OccupancyState::history_of(const VoxelCoord& v) const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(config_.window));
    unpack_history(history_bits(v), config_.window, out.data());
    return out;
}

void unpack_history(std::uint64_t bits, int window, std::uint8_t* out) {
    // bit 0 is the newest step; out[0] is the oldest.
    for (int j = 0; j < window; ++j)
        out[j] = static_cast<std::uint8_t>((bits >> (window - 1 - j)) & 1);
}

}  // namespace motseg
