#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "motseg/types.hpp"

namespace motseg {

/// One LiDAR frame. Points and intensities are parallel arrays; non-finite
/// points are dropped at load time and their original file indices recorded so
/// that per-point labels can be filtered jointly.
struct PointFrame {
    std::vector<Vec3f> points;
    std::vector<float> intensities;
    int frame_index = 0;
    std::vector<std::int32_t> dropped_indices;

    std::size_t size() const { return points.size(); }
    std::size_t dropped() const { return dropped_indices.size(); }
};

/// Rigid sensor pose: orthonormal rotation plus translation in meters.
struct Pose {
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major 3x3
    Vec3d translation{0, 0, 0};
    int frame_index = 0;

    bool is_orthonormal(double tol = 1e-5) const;
};

/// Per-point moving/static flags for one frame (1 = moving).
struct PointLabels {
    std::vector<std::uint8_t> moving;
    int frame_index = 0;
};

/// Result of ground removal: the retained points plus, per retained point, its
/// index in the input frame.
struct GroundFiltered {
    PointFrame frame;
    std::vector<std::int32_t> index_map;
};

/// Read one frame of packed little-endian float32 (x, y, z, intensity)
/// records. Drops non-finite points and records their indices.
PointFrame load_point_frame(const std::string& path, int frame_index = 0);

void write_point_frame(const std::string& path, const PointFrame& frame);

/// Read poses, one frame per line: 12 decimals forming a row-major 3x4 [R|t].
std::vector<Pose> load_poses(const std::string& path);

/// Raw label file: one little-endian uint32 per point.
std::vector<std::uint32_t> load_label_file(const std::string& path);
void write_label_file(const std::string& path, const std::vector<std::uint32_t>& labels);

/// Default moving-class label values (SemanticKITTI-MOS moving classes).
const std::vector<std::uint32_t>& default_moving_labels();

/// Convert raw labels to moving flags and apply the frame's dropped-point
/// filter, so that flags align with frame.points. The raw label count must
/// equal the frame's point count before filtering.
PointLabels make_point_labels(const std::vector<std::uint32_t>& raw,
                              const std::vector<std::uint32_t>& moving_values,
                              const PointFrame& frame);

/// Transform every point into the reference frame:
/// p' = R_ref^T * (R_pose * p + t_pose - t_ref).
PointFrame apply_pose(const PointFrame& frame, const Pose& pose, const Pose& reference);

/// Keep exactly the points with z > z_threshold (strict).
GroundFiltered remove_ground(const PointFrame& frame, double z_threshold);

/// Select labels through a filter's index map so they align with the
/// filtered frame's points.
PointLabels filter_labels(const PointLabels& labels, const std::vector<std::int32_t>& index_map);

/// Map indices into a loaded frame back to raw file record indices,
/// reinserting the gaps left by dropped points.
std::vector<std::int32_t> loaded_to_file_indices(std::size_t loaded_count,
                                                 const std::vector<std::int32_t>& dropped_indices);

}  // namespace motseg
