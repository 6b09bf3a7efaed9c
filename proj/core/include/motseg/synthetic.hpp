#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motseg/ingest.hpp"
#include "motseg/types.hpp"

namespace motseg {

/// Axis-aligned box whose six faces are sampled at `density` points per m².
struct SurfaceBox {
    Vec3d center;
    Vec3d size;
    double density = 50.0;
};

/// Horizontal rectangle at height z, sampled at `density` points per m².
/// Stands in for the ground.
struct SurfacePlane {
    double z = -1.5;
    double x_min = -10.0, x_max = 10.0;
    double y_min = -10.0, y_max = 10.0;
    double density = 5.0;
};

/// Rigid box translating at constant velocity. Its surface is sampled once in
/// local coordinates and re-emitted at the translated pose every frame.
struct Mover {
    Vec3d start_center;
    Vec3d size;
    Vec3d velocity;  // m/s
    double density = 50.0;

    Vec3d center_at(int frame, double hz) const {
        return start_center + velocity * (static_cast<double>(frame) / hz);
    }
};

/// Optional z-buffer culling of points shadowed from a sensor origin: the
/// sphere of directions is binned in azimuth/elevation and only points within
/// `tolerance` meters of the nearest return in their bin survive.
struct OcclusionSpec {
    bool enabled = false;
    Vec3d origin{0.0, 0.0, 0.0};
    double az_bin_deg = 0.5;
    double el_bin_deg = 0.5;
    double tolerance = 0.15;
};

struct SceneSpec {
    int frames = 200;
    double hz = 10.0;
    std::vector<SurfacePlane> planes;
    std::vector<SurfaceBox> boxes;
    std::vector<Mover> movers;
    double noise_sigma = 0.02;  // meters, per axis, clipped at 3 sigma
    std::uint64_t seed = 1;
    OcclusionSpec occlusion;

    void validate() const;
};

struct LabeledFrame {
    PointFrame frame;
    PointLabels labels;
};

/// Deterministic scene: base surface points are sampled once from the seed;
/// each frame re-emits them with fresh jitter (forked from the seed and the
/// frame index), movers translated to their pose. frame(t) is pure — any t
/// can be generated in any order.
class SyntheticScene {
public:
    explicit SyntheticScene(SceneSpec spec);

    LabeledFrame frame(int t) const;

    int frames() const { return spec_.frames; }
    const SceneSpec& spec() const { return spec_; }
    const std::vector<Vec3d>& static_base() const { return static_base_; }
    const std::vector<Vec3d>& mover_base(std::size_t i) const { return mover_base_.at(i); }

private:
    SceneSpec spec_;
    std::vector<Vec3d> static_base_;                // world coordinates
    std::vector<std::vector<Vec3d>> mover_base_;    // local, centered at origin
};

struct ScenePreset {
    std::string name;
    SceneSpec spec;
};

std::vector<ScenePreset> presets();
SceneSpec find_preset(const std::string& name);

/// Write every frame of the scene as <dir>/velodyne/NNNNNN.bin plus
/// <dir>/labels/NNNNNN.label with labels 0 (static) and 1 (moving).
void write_scene(const std::string& dir, const SceneSpec& spec);

}  // namespace motseg
