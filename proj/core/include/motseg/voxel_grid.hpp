#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "motseg/ingest.hpp"
#include "motseg/types.hpp"

namespace motseg {

/// Grid resolution, time window and neighborhood radius shared across the
/// pipeline. The window is capped at 64 steps because occupancy histories are
/// packed into a single 64-bit word.
struct GridConfig {
    double resolution = 0.2;  // meters per voxel edge
    int window = 15;          // time steps
    int radius = 2;           // neighborhood radius in voxel units

    void validate() const;
    int channels() const { return (2 * radius + 1) * (2 * radius + 1) * (2 * radius + 1); }
};

/// One frame's occupied voxels in lexicographic order, with the indices of the
/// points that fell into each voxel.
struct Voxelization {
    std::vector<VoxelCoord> coords;
    std::vector<std::vector<std::int32_t>> point_lists;

    std::size_t size() const { return coords.size(); }
};

/// Assign each point to floor(coordinate / resolution) per axis.
Voxelization voxelize(const PointFrame& frame, double resolution);

/// Occupied-voxel set only, for synthetic or test-driven sequences.
Voxelization voxelize_coords(std::vector<VoxelCoord> coords);

/// Sliding-window occupancy state of the scene. Each stored voxel carries a
/// packed binary history of its last `window` occupancy states; bit 0 of the
/// packed word is the current frame, bit j the state j frames ago. Histories
/// that become all-zero are evicted, so the map never holds voxels unseen for
/// a full window.
class OccupancyState {
public:
    explicit OccupancyState(GridConfig config);

    /// Push the next frame's occupancy: every stored history shifts by one
    /// step, voxels in `vox` end with an occupied bit, all-zero histories are
    /// evicted and the frame counter increments.
    void advance(Voxelization vox);

    /// Packed history of a voxel, zero if the voxel is not stored. Free space
    /// and never-observed space are indistinguishable.
    std::uint64_t history_bits(const VoxelCoord& v) const;

    /// History as a w-length 0/1 vector, index 0 = oldest step.
    std::vector<std::uint8_t> history_of(const VoxelCoord& v) const;

    int frame_index() const { return frame_; }
    const GridConfig& config() const { return config_; }
    const Voxelization& current() const { return current_; }
    std::size_t stored_voxels() const { return map_.size(); }

private:
    GridConfig config_;
    std::uint64_t mask_;
    std::unordered_map<VoxelCoord, std::uint64_t, VoxelCoordHash> map_;
    Voxelization current_;
    int frame_ = -1;
};

/// Expand a packed history into w entries, index 0 = oldest.
void unpack_history(std::uint64_t bits, int window, std::uint8_t* out);

}  // namespace motseg
