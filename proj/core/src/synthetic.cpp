#include "motseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>

#include "motseg/error.hpp"
#include "motseg/rng.hpp"

namespace motseg {

void SceneSpec::validate() const {
    if (frames < 1) throw ConfigError("scene needs at least one frame");
    if (!(hz > 0.0)) throw ConfigError("frame rate must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    for (const SurfacePlane& p : planes) {
        if (!(p.density > 0.0)) throw ConfigError("plane density must be positive");
        if (!(p.x_max > p.x_min) || !(p.y_max > p.y_min))
            throw ConfigError("plane extent must be non-empty");
    }
    for (const SurfaceBox& b : boxes) {
        if (!(b.density > 0.0)) throw ConfigError("box density must be positive");
        if (!(b.size.x > 0.0) || !(b.size.y > 0.0) || !(b.size.z > 0.0))
            throw ConfigError("box size must be positive");
    }
    for (const Mover& m : movers) {
        if (!(m.density > 0.0)) throw ConfigError("mover density must be positive");
        if (!(m.size.x > 0.0) || !(m.size.y > 0.0) || !(m.size.z > 0.0))
            throw ConfigError("mover size must be positive");
    }
    if (occlusion.enabled) {
        if (!(occlusion.az_bin_deg > 0.0) || !(occlusion.el_bin_deg > 0.0))
            throw ConfigError("occlusion bin sizes must be positive");
        if (!(occlusion.tolerance >= 0.0)) throw ConfigError("occlusion tolerance must be non-negative");
    }
}

namespace {

std::size_t surface_count(double area, double density) {
    auto n = static_cast<long long>(std::llround(area * density));
    return n < 1 ? 1 : static_cast<std::size_t>(n);
}

void sample_plane(const SurfacePlane& p, Rng& rng, std::vector<Vec3d>& out) {
    double area = (p.x_max - p.x_min) * (p.y_max - p.y_min);
    std::size_t n = surface_count(area, p.density);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({rng.uniform(p.x_min, p.x_max), rng.uniform(p.y_min, p.y_max), p.z});
}

// Samples all six faces, proportionally to their area, in local coordinates
// centered at the origin.
void sample_box_local(const Vec3d& size, double density, Rng& rng, std::vector<Vec3d>& out) {
    const double hx = size.x / 2, hy = size.y / 2, hz = size.z / 2;
    struct Face {
        int fixed_axis;
        double fixed_value;
        double a_half, b_half;
    };
    const Face faces[6] = {
        {0, +hx, hy, hz}, {0, -hx, hy, hz}, {1, +hy, hx, hz},
        {1, -hy, hx, hz}, {2, +hz, hx, hy}, {2, -hz, hx, hy},
    };
    for (const Face& f : faces) {
        std::size_t n = surface_count(4 * f.a_half * f.b_half, density);
        for (std::size_t i = 0; i < n; ++i) {
            double a = rng.uniform(-f.a_half, f.a_half);
            double b = rng.uniform(-f.b_half, f.b_half);
            switch (f.fixed_axis) {
                case 0: out.push_back({f.fixed_value, a, b}); break;
                case 1: out.push_back({a, f.fixed_value, b}); break;
                default: out.push_back({a, b, f.fixed_value}); break;
            }
        }
    }
}

// Gaussian jitter clipped at 3 sigma by resampling, so every emitted point
// stays within 3 sigma of its generating surface.
double clipped_jitter(Rng& rng, double sigma) {
    if (sigma == 0.0) return 0.0;
    for (;;) {
        double j = rng.normal() * sigma;
        if (std::abs(j) <= 3.0 * sigma) return j;
    }
}

void cull_occluded(const OcclusionSpec& occ, PointFrame& frame, PointLabels& labels) {
    const double deg = 3.14159265358979323846 / 180.0;
    const double az_bin = occ.az_bin_deg * deg;
    const double el_bin = occ.el_bin_deg * deg;

    auto bin_of = [&](const Vec3f& p, double& range) -> std::int64_t {
        double dx = p.x - occ.origin.x, dy = p.y - occ.origin.y, dz = p.z - occ.origin.z;
        double horiz = std::sqrt(dx * dx + dy * dy);
        range = std::sqrt(dx * dx + dy * dy + dz * dz);
        auto az = static_cast<std::int64_t>(std::floor(std::atan2(dy, dx) / az_bin));
        auto el = static_cast<std::int64_t>(std::floor(std::atan2(dz, horiz) / el_bin));
        return az * 100000 + el;
    };

    std::unordered_map<std::int64_t, double> nearest;
    std::vector<double> ranges(frame.points.size());
    std::vector<std::int64_t> bins(frame.points.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        bins[i] = bin_of(frame.points[i], ranges[i]);
        auto [it, inserted] = nearest.try_emplace(bins[i], ranges[i]);
        if (!inserted && ranges[i] < it->second) it->second = ranges[i];
    }

    std::size_t kept = 0;
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        if (ranges[i] <= nearest[bins[i]] + occ.tolerance) {
            frame.points[kept] = frame.points[i];
            frame.intensities[kept] = frame.intensities[i];
            labels.moving[kept] = labels.moving[i];
            ++kept;
        }
    }
    frame.points.resize(kept);
    frame.intensities.resize(kept);
    labels.moving.resize(kept);
}

}  // namespace

SyntheticScene::SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng = Rng::fork(spec_.seed, 0);
    for (const SurfacePlane& p : spec_.planes) sample_plane(p, rng, static_base_);
    for (const SurfaceBox& b : spec_.boxes) {
        std::vector<Vec3d> local;
        sample_box_local(b.size, b.density, rng, local);
        for (const Vec3d& q : local) static_base_.push_back(q + b.center);
    }
    mover_base_.resize(spec_.movers.size());
    for (std::size_t i = 0; i < spec_.movers.size(); ++i)
        sample_box_local(spec_.movers[i].size, spec_.movers[i].density, rng, mover_base_[i]);
}

LabeledFrame SyntheticScene::frame(int t) const {
    if (t < 0 || t >= spec_.frames)
        throw std::out_of_range("frame " + std::to_string(t) + " outside scene of " +
                                std::to_string(spec_.frames));
    Rng rng = Rng::fork(spec_.seed, static_cast<std::uint64_t>(t) + 1);
    const double sigma = spec_.noise_sigma;

    LabeledFrame out;
    out.frame.frame_index = t;
    out.labels.frame_index = t;
    std::size_t total = static_base_.size();
    for (const auto& base : mover_base_) total += base.size();
    out.frame.points.reserve(total);
    out.frame.intensities.assign(total, 0.0f);
    out.labels.moving.reserve(total);

    auto emit = [&](const Vec3d& p, std::uint8_t moving) {
        out.frame.points.push_back(Vec3f{static_cast<float>(p.x + clipped_jitter(rng, sigma)),
                                         static_cast<float>(p.y + clipped_jitter(rng, sigma)),
                                         static_cast<float>(p.z + clipped_jitter(rng, sigma))});
        out.labels.moving.push_back(moving);
    };

    for (const Vec3d& p : static_base_) emit(p, 0);
    for (std::size_t i = 0; i < spec_.movers.size(); ++i) {
        Vec3d center = spec_.movers[i].center_at(t, spec_.hz);
        for (const Vec3d& q : mover_base_[i]) emit(q + center, 1);
    }

    if (spec_.occlusion.enabled) cull_occluded(spec_.occlusion, out.frame, out.labels);
    return out;
}

namespace {

constexpr double kGroundZ = -1.5;

Mover pedestrian(double x, double y, double vx, double vy) {
    Mover m;
    m.size = {0.5, 0.5, 1.8};
    m.start_center = {x, y, kGroundZ + m.size.z / 2};
    m.velocity = {vx, vy, 0.0};
    m.density = 250.0;
    return m;
}

Mover car(double x, double y, double vx, double vy) {
    Mover m;
    m.size = {4.5, 1.8, 1.5};
    m.start_center = {x, y, kGroundZ + m.size.z / 2};
    m.velocity = {vx, vy, 0.0};
    m.density = 50.0;
    return m;
}

SurfaceBox wall(double cx, double cy, double len_x, double len_y, double height) {
    SurfaceBox b;
    b.size = {len_x, len_y, height};
    b.center = {cx, cy, kGroundZ + height / 2};
    b.density = 30.0;
    return b;
}

SurfaceBox pillar(double cx, double cy) {
    SurfaceBox b;
    b.size = {0.4, 0.4, 2.5};
    b.center = {cx, cy, kGroundZ + b.size.z / 2};
    b.density = 60.0;
    return b;
}

SurfacePlane ground(double half_extent, double density) {
    SurfacePlane p;
    p.z = kGroundZ;
    p.x_min = -half_extent;
    p.x_max = half_extent;
    p.y_min = -half_extent;
    p.y_max = half_extent;
    p.density = density;
    return p;
}

}  // namespace

std::vector<ScenePreset> presets() {
    std::vector<ScenePreset> out;

    {
        SceneSpec s;
        s.frames = 200;
        s.hz = 10.0;
        s.seed = 7;
        s.planes = {ground(10.0, 6.0)};
        s.movers = {pedestrian(-9.0, -0.8, 1.4, 0.0), pedestrian(9.0, 0.8, -1.4, 0.0)};
        out.push_back({"crossing-pedestrians", std::move(s)});
    }
    {
        SceneSpec s;
        s.frames = 200;
        s.hz = 10.0;
        s.seed = 11;
        s.planes = {ground(12.0, 5.0)};
        s.movers = {car(-11.0, 0.0, 8.0, 0.0)};
        out.push_back({"passing-car", std::move(s)});
    }
    {
        SceneSpec s;
        s.frames = 200;
        s.hz = 10.0;
        s.seed = 13;
        s.planes = {ground(12.0, 5.0)};
        s.boxes = {wall(0.0, 8.0, 6.0, 0.2, 1.5), wall(0.0, -8.0, 6.0, 0.2, 1.5),
                   pillar(-6.0, 4.0), pillar(6.0, 3.0), pillar(0.0, -5.0)};
        s.movers = {car(-11.0, -2.0, 8.0, 0.0), pedestrian(-9.0, 1.5, 1.4, 0.0),
                    pedestrian(9.0, -1.5, -1.4, 0.0)};
        out.push_back({"mixed-intersection", std::move(s)});
    }
    return out;
}

SceneSpec find_preset(const std::string& name) {
    auto all = presets();
    for (const ScenePreset& p : all)
        if (p.name == name) return p.spec;
    std::string names;
    for (const ScenePreset& p : all) {
        if (!names.empty()) names += ", ";
        names += p.name;
    }
    throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
}

void write_scene(const std::string& dir, const SceneSpec& spec) {
    namespace fs = std::filesystem;
    SyntheticScene scene(spec);
    fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "velodyne", ec);
    fs::create_directories(root / "labels", ec);
    if (ec) throw IoError("cannot create scene directories under " + dir + ": " + ec.message());

    char name[16];
    for (int t = 0; t < spec.frames; ++t) {
        LabeledFrame lf = scene.frame(t);
        std::snprintf(name, sizeof name, "%06d", t);
        write_point_frame((root / "velodyne" / (std::string(name) + ".bin")).string(), lf.frame);
        std::vector<std::uint32_t> raw(lf.labels.moving.size());
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = lf.labels.moving[i] ? 1u : 0u;
        write_label_file((root / "labels" / (std::string(name) + ".label")).string(), raw);
    }
}

}  // namespace motseg
