#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "motseg/error.hpp"
#include "motseg/ingest.hpp"
#include "motseg/rng.hpp"
#include "support/oracles.hpp"
#include "support/temp.hpp"

using namespace motseg;

namespace {

void write_raw_floats(const std::string& path, const std::vector<float>& vals) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(float)));
}

PointFrame random_frame(Rng& rng, std::size_t n, double lo = -10.0, double hi = 10.0) {
    PointFrame f;
    for (std::size_t i = 0; i < n; ++i) {
        f.points.push_back({static_cast<float>(rng.uniform(lo, hi)),
                            static_cast<float>(rng.uniform(lo, hi)),
                            static_cast<float>(rng.uniform(lo, hi))});
        f.intensities.push_back(static_cast<float>(rng.uniform()));
    }
    return f;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("point frame decodes packed float records") {
    testutil::TempDir tmp("ingest");
    write_raw_floats(tmp.str("two.bin"), {1, 2, 3, 0.5f, 4, 5, 6, 0.1f});
    const PointFrame f = load_point_frame(tmp.str("two.bin"), 7);
    REQUIRE(f.size() == 2);
    CHECK(f.frame_index == 7);
    CHECK(f.points[0].x == 1.0f);
    CHECK(f.points[0].y == 2.0f);
    CHECK(f.points[0].z == 3.0f);
    CHECK(f.intensities[0] == 0.5f);
    CHECK(f.points[1].x == 4.0f);
    CHECK(f.intensities[1] == 0.1f);
    CHECK(f.dropped() == 0);
}

TEST_CASE("empty point file yields empty frame") {
    testutil::TempDir tmp("ingest");
    write_raw_floats(tmp.str("empty.bin"), {});
    const PointFrame f = load_point_frame(tmp.str("empty.bin"));
    CHECK(f.size() == 0);
    CHECK(f.dropped() == 0);
}

TEST_CASE("non-finite points are dropped and indexed") {
    testutil::TempDir tmp("ingest");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    write_raw_floats(tmp.str("nan.bin"), {nan, 2, 3, 0.5f});
    const PointFrame f = load_point_frame(tmp.str("nan.bin"));
    CHECK(f.size() == 0);
    REQUIRE(f.dropped() == 1);
    CHECK(f.dropped_indices[0] == 0);

    const float inf = std::numeric_limits<float>::infinity();
    write_raw_floats(tmp.str("mixed.bin"), {1, 2, 3, 0, 1, inf, 3, 0, 9, 9, 9, 0});
    const PointFrame g = load_point_frame(tmp.str("mixed.bin"));
    REQUIRE(g.size() == 2);
    REQUIRE(g.dropped() == 1);
    CHECK(g.dropped_indices[0] == 1);
    CHECK(g.points[1].x == 9.0f);
}

TEST_CASE("malformed point file length names the trailing bytes") {
    testutil::TempDir tmp("ingest");
    write_raw_floats(tmp.str("bad.bin"), {1, 2, 3, 0.5f, 4, 5});
    CHECK_THROWS_WITH_AS(load_point_frame(tmp.str("bad.bin")),
                         doctest::Contains("8 trailing bytes"), DataError);
    CHECK_THROWS_AS(load_point_frame(tmp.str("absent.bin")), IoError);
}

TEST_CASE("point frame write/load round-trips") {
    testutil::TempDir tmp("ingest");
    Rng rng(11);
    const PointFrame f = random_frame(rng, 257);
    write_point_frame(tmp.str("rt.bin"), f);
    const PointFrame g = load_point_frame(tmp.str("rt.bin"));
    REQUIRE(g.size() == f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(g.points[i].x == f.points[i].x);
        CHECK(g.points[i].y == f.points[i].y);
        CHECK(g.points[i].z == f.points[i].z);
        CHECK(g.intensities[i] == f.intensities[i]);
    }
}

TEST_CASE("identity pose leaves points in place") {
    Rng rng(3);
    const PointFrame f = random_frame(rng, 50);
    Pose p;
    p.translation = {4.0, -2.0, 1.0};
    const PointFrame out = apply_pose(f, p, p);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(out.points[i].x == doctest::Approx(f.points[i].x).epsilon(1e-6));
        CHECK(out.points[i].y == doctest::Approx(f.points[i].y).epsilon(1e-6));
        CHECK(out.points[i].z == doctest::Approx(f.points[i].z).epsilon(1e-6));
    }
}

TEST_CASE("pure translation moves the origin") {
    PointFrame f;
    f.points.push_back({0, 0, 0});
    f.intensities.push_back(0);
    Pose pose, ref;
    pose.translation = {1.0, 0.0, 0.0};
    const PointFrame out = apply_pose(f, pose, ref);
    CHECK(out.points[0].x == doctest::Approx(1.0));
    CHECK(out.points[0].y == doctest::Approx(0.0));
    CHECK(out.points[0].z == doctest::Approx(0.0));
}

TEST_CASE("random rigid poses match the homogeneous-matrix oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Pose pose, ref;
        pose.rotation = oracle::random_rotation(rng);
        pose.translation = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        ref.rotation = oracle::random_rotation(rng);
        ref.translation = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        REQUIRE(pose.is_orthonormal());
        REQUIRE(ref.is_orthonormal());

        const PointFrame f = random_frame(rng, 25);
        const PointFrame out = apply_pose(f, pose, ref);

        const oracle::Mat4 t =
            oracle::mat_mul(oracle::mat_inverse(oracle::pose_matrix(ref)),
                            oracle::pose_matrix(pose));
        for (std::size_t i = 0; i < f.size(); ++i) {
            const Vec3d want = oracle::transform_point(
                t, {f.points[i].x, f.points[i].y, f.points[i].z});
            CHECK(out.points[i].x == doctest::Approx(want.x).epsilon(1e-5));
            CHECK(out.points[i].y == doctest::Approx(want.y).epsilon(1e-5));
            CHECK(out.points[i].z == doctest::Approx(want.z).epsilon(1e-5));
        }
    }
}

TEST_CASE("pose round trip restores coordinates") {
    Rng rng(5);
    Pose a, b;
    a.rotation = oracle::random_rotation(rng);
    a.translation = {1.5, -3.0, 0.25};
    b.rotation = oracle::random_rotation(rng);
    b.translation = {-2.0, 4.0, 1.0};
    const PointFrame f = random_frame(rng, 40);
    const PointFrame back = apply_pose(apply_pose(f, a, b), b, a);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(back.points[i].x == doctest::Approx(f.points[i].x).epsilon(1e-5));
        CHECK(back.points[i].y == doctest::Approx(f.points[i].y).epsilon(1e-5));
        CHECK(back.points[i].z == doctest::Approx(f.points[i].z).epsilon(1e-5));
    }
}

TEST_CASE("ground removal keeps strictly-above points only") {
    PointFrame f;
    for (float z : {-2.0f, -1.0f, 0.5f}) {
        f.points.push_back({0, 0, z});
        f.intensities.push_back(0);
    }
    const GroundFiltered out = remove_ground(f, -1.0);
    REQUIRE(out.frame.size() == 1);
    CHECK(out.frame.points[0].z == 0.5f);
    REQUIRE(out.index_map.size() == 1);
    CHECK(out.index_map[0] == 2);
}

TEST_CASE("ground removal of an empty frame is empty") {
    const GroundFiltered out = remove_ground(PointFrame{}, -1.0);
    CHECK(out.frame.size() == 0);
    CHECK(out.index_map.empty());
}

TEST_CASE("ground removal equals the per-point filter and is idempotent") {
    Rng rng(21);
    const PointFrame f = random_frame(rng, 1000, -3.0, 3.0);
    const GroundFiltered out = remove_ground(f, -1.0);

    std::vector<std::int32_t> want;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.points[i].z > -1.0) want.push_back(static_cast<std::int32_t>(i));
    REQUIRE(out.index_map == want);
    for (std::size_t i = 0; i < out.frame.size(); ++i) {
        CHECK(out.frame.points[i].x == f.points[out.index_map[i]].x);
        CHECK(out.frame.intensities[i] == f.intensities[out.index_map[i]]);
    }

    const GroundFiltered again = remove_ground(out.frame, -1.0);
    CHECK(again.frame.size() == out.frame.size());
}

TEST_CASE("pose file parses 12-decimal lines") {
    testutil::TempDir tmp("ingest");
    {
        std::ofstream out(tmp.str("poses.txt"));
        out << "1 0 0 0.5 0 1 0 -1.25 0 0 1 2\n";
        out << "0 -1 0 0 1 0 0 0 0 0 1 0\n";
    }
    const std::vector<Pose> poses = load_poses(tmp.str("poses.txt"));
    REQUIRE(poses.size() == 2);
    CHECK(poses[0].translation.x == doctest::Approx(0.5));
    CHECK(poses[0].translation.y == doctest::Approx(-1.25));
    CHECK(poses[0].translation.z == doctest::Approx(2.0));
    CHECK(poses[1].rotation[1] == doctest::Approx(-1.0));
    CHECK(poses[1].frame_index == 1);

    {
        std::ofstream out(tmp.str("short.txt"));
        out << "1 0 0 0.5 0 1 0\n";
    }
    CHECK_THROWS_AS(load_poses(tmp.str("short.txt")), DataError);

    {
        std::ofstream out(tmp.str("skew.txt"));
        out << "2 0 0 0 0 1 0 0 0 0 1 0\n";
    }
    CHECK_THROWS_AS(load_poses(tmp.str("skew.txt")), DataError);
}

TEST_CASE("labels round-trip and map to moving flags") {
    testutil::TempDir tmp("ingest");
    const std::vector<std::uint32_t> raw = {251, 9, 259, 0};
    write_label_file(tmp.str("a.label"), raw);
    CHECK(load_label_file(tmp.str("a.label")) == raw);

    PointFrame f;
    for (int i = 0; i < 4; ++i) {
        f.points.push_back({0, 0, 0});
        f.intensities.push_back(0);
    }
    const PointLabels labels = make_point_labels(raw, default_moving_labels(), f);
    REQUIRE(labels.moving.size() == 4);
    CHECK(labels.moving[0] == 1);
    CHECK(labels.moving[1] == 0);
    CHECK(labels.moving[2] == 1);
    CHECK(labels.moving[3] == 0);

    CHECK_THROWS_AS(make_point_labels({251}, default_moving_labels(), f), DataError);
}

TEST_CASE("labels skip dropped points") {
    testutil::TempDir tmp("ingest");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    write_raw_floats(tmp.str("d.bin"), {1, 1, 1, 0, nan, 0, 0, 0, 2, 2, 2, 0});
    const PointFrame f = load_point_frame(tmp.str("d.bin"));
    REQUIRE(f.size() == 2);
    // raw labels cover all three file records; the NaN record's label is dropped
    const PointLabels labels = make_point_labels({0, 1, 1}, {1}, f);
    REQUIRE(labels.moving.size() == 2);
    CHECK(labels.moving[0] == 0);
    CHECK(labels.moving[1] == 1);
}

TEST_CASE("filter_labels follows an index map") {
    PointLabels labels;
    labels.moving = {1, 0, 0, 1, 1};
    const PointLabels out = filter_labels(labels, {0, 3, 4});
    CHECK(out.moving == std::vector<std::uint8_t>{1, 1, 1});
    CHECK_THROWS_AS(filter_labels(labels, {9}), DataError);
}

TEST_CASE("loaded indices map back to file records") {
    // file had 5 records, records 1 and 3 dropped
    const std::vector<std::int32_t> file_idx = loaded_to_file_indices(3, {1, 3});
    CHECK(file_idx == std::vector<std::int32_t>{0, 2, 4});
    CHECK(loaded_to_file_indices(2, {}) == std::vector<std::int32_t>{0, 1});
}

}  // TEST_SUITE
