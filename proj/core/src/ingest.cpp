#include "motseg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "motseg/error.hpp"

namespace motseg {

bool Pose::is_orthonormal(double tol) const {
    const auto& r = rotation;
    // R * R^T == I
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += r[i * 3 + k] * r[j * 3 + k];
            const double expect = (i == j) ? 1.0 : 0.0;
            if (std::abs(dot - expect) > tol) return false;
        }
    }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) -
                       r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    return std::abs(det - 1.0) <= tol;
}

PointFrame load_point_frame(const std::string& path, int frame_index) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open point file: " + path);

    in.seekg(0, std::ios::end);
    const std::streamoff bytes = in.tellg();
    in.seekg(0, std::ios::beg);
    if (bytes % 16 != 0) {
        throw DataError("malformed point file " + path + ": " +
                        std::to_string(bytes % 16) + " trailing bytes (records are 16 bytes)");
    }

    const std::size_t count = static_cast<std::size_t>(bytes / 16);
    std::vector<float> raw(count * 4);
    if (count > 0) {
        in.read(reinterpret_cast<char*>(raw.data()), bytes);
        if (!in) throw IoError("short read on point file: " + path);
    }

    PointFrame frame;
    frame.frame_index = frame_index;
    frame.points.reserve(count);
    frame.intensities.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vec3f p{raw[i * 4], raw[i * 4 + 1], raw[i * 4 + 2]};
        const float intensity = raw[i * 4 + 3];
        if (!is_finite(p) || !std::isfinite(intensity)) {
            frame.dropped_indices.push_back(static_cast<std::int32_t>(i));
            continue;
        }
        frame.points.push_back(p);
        frame.intensities.push_back(intensity);
    }
    return frame;
}

void write_point_frame(const std::string& path, const PointFrame& frame) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    std::vector<float> raw(frame.points.size() * 4);
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        raw[i * 4] = frame.points[i].x;
        raw[i * 4 + 1] = frame.points[i].y;
        raw[i * 4 + 2] = frame.points[i].z;
        raw[i * 4 + 3] = i < frame.intensities.size() ? frame.intensities[i] : 0.0f;
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Pose> load_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pose file: " + path);
    std::vector<Pose> poses;
    std::string line;
    int index = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::array<double, 12> v{};
        for (int i = 0; i < 12; ++i) {
            if (!(ss >> v[i])) {
                throw DataError("pose file " + path + " line " + std::to_string(index + 1) +
                                ": expected 12 values");
            }
        }
        Pose pose;
        pose.frame_index = index++;
        for (int row = 0; row < 3; ++row) {
            pose.rotation[row * 3] = v[row * 4];
            pose.rotation[row * 3 + 1] = v[row * 4 + 1];
            pose.rotation[row * 3 + 2] = v[row * 4 + 2];
        }
        pose.translation = {v[3], v[7], v[11]};
        if (!pose.is_orthonormal()) {
            throw DataError("pose file " + path + " line " + std::to_string(index) +
                            ": rotation not orthonormal");
        }
        poses.push_back(pose);
    }
    return poses;
}

std::vector<std::uint32_t> load_label_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open label file: " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff bytes = in.tellg();
    in.seekg(0, std::ios::beg);
    if (bytes % 4 != 0) {
        throw DataError("malformed label file " + path + ": " + std::to_string(bytes % 4) +
                        " trailing bytes (records are 4 bytes)");
    }
    std::vector<std::uint32_t> labels(static_cast<std::size_t>(bytes / 4));
    if (!labels.empty()) {
        in.read(reinterpret_cast<char*>(labels.data()), bytes);
        if (!in) throw IoError("short read on label file: " + path);
    }
    return labels;
}

void write_label_file(const std::string& path, const std::vector<std::uint32_t>& labels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::uint32_t)));
    if (!out) throw IoError("write failed: " + path);
}

const std::vector<std::uint32_t>& default_moving_labels() {
    static const std::vector<std::uint32_t> values{251, 252, 253, 254, 255, 256, 257, 258, 259};
    return values;
}

PointLabels make_point_labels(const std::vector<std::uint32_t>& raw,
                              const std::vector<std::uint32_t>& moving_values,
                              const PointFrame& frame) {
    const std::size_t expected = frame.size() + frame.dropped();
    if (raw.size() != expected) {
        throw DataError("label count " + std::to_string(raw.size()) + " does not match point count " +
                        std::to_string(expected) + " for frame " + std::to_string(frame.frame_index));
    }
    PointLabels out;
    out.frame_index = frame.frame_index;
    out.moving.reserve(frame.size());
    std::size_t next_dropped = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (next_dropped < frame.dropped_indices.size() &&
            frame.dropped_indices[next_dropped] == static_cast<std::int32_t>(i)) {
            ++next_dropped;
            continue;
        }
        const bool moving = std::find(moving_values.begin(), moving_values.end(), raw[i]) !=
                            moving_values.end();
        out.moving.push_back(moving ? 1 : 0);
    }
    return out;
}

PointFrame apply_pose(const PointFrame& frame, const Pose& pose, const Pose& reference) {
    PointFrame out = frame;
    const auto& r = pose.rotation;
    const auto& rr = reference.rotation;
    const Vec3d dt = pose.translation - reference.translation;
    for (auto& p : out.points) {
        const double wx = r[0] * p.x + r[1] * p.y + r[2] * p.z + dt.x;
        const double wy = r[3] * p.x + r[4] * p.y + r[5] * p.z + dt.y;
        const double wz = r[6] * p.x + r[7] * p.y + r[8] * p.z + dt.z;
        // reference rotation is orthonormal, so its inverse is the transpose
        p.x = static_cast<float>(rr[0] * wx + rr[3] * wy + rr[6] * wz);
        p.y = static_cast<float>(rr[1] * wx + rr[4] * wy + rr[7] * wz);
        p.z = static_cast<float>(rr[2] * wx + rr[5] * wy + rr[8] * wz);
    }
    return out;
}

GroundFiltered remove_ground(const PointFrame& frame, double z_threshold) {
    GroundFiltered out;
    out.frame.frame_index = frame.frame_index;
    out.frame.dropped_indices = frame.dropped_indices;
    out.frame.points.reserve(frame.points.size());
    out.frame.intensities.reserve(frame.points.size());
    out.index_map.reserve(frame.points.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        if (static_cast<double>(frame.points[i].z) > z_threshold) {
            out.frame.points.push_back(frame.points[i]);
            out.frame.intensities.push_back(frame.intensities[i]);
            out.index_map.push_back(static_cast<std::int32_t>(i));
        }
    }
    return out;
}

PointLabels filter_labels(const PointLabels& labels, const std::vector<std::int32_t>& index_map) {
    PointLabels out;
    out.frame_index = labels.frame_index;
    out.moving.reserve(index_map.size());
    for (std::int32_t idx : index_map) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= labels.moving.size())
            throw DataError("filter index " + std::to_string(idx) +
                            " outside label array of " + std::to_string(labels.moving.size()));
        out.moving.push_back(labels.moving[static_cast<std::size_t>(idx)]);
    }
    return out;
}

std::vector<std::int32_t> loaded_to_file_indices(std::size_t loaded_count,
                                                 const std::vector<std::int32_t>& dropped_indices) {
    std::vector<std::int32_t> out(loaded_count);
    std::size_t next_dropped = 0;
    std::int32_t file_index = 0;
    for (std::size_t i = 0; i < loaded_count; ++i) {
        while (next_dropped < dropped_indices.size() && dropped_indices[next_dropped] == file_index) {
            ++next_dropped;
            ++file_index;
        }
        out[i] = file_index++;
    }
    return out;
}

}  // namespace motseg
