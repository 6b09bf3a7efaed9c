#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <vector>

#include "motseg/error.hpp"
#include "motseg/mots.hpp"
#include "motseg/rng.hpp"
#include "motseg/voxel_grid.hpp"
#include "support/oracles.hpp"
#include "support/temp.hpp"

using namespace motseg;

namespace {

std::vector<std::uint8_t> unpacked(const MotsFeature& f, int window) {
    std::vector<double> vals(f.rows.size() * static_cast<std::size_t>(window));
    unpack_feature(f, window, vals.data());
    std::vector<std::uint8_t> bits(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) bits[i] = vals[i] != 0.0 ? 1 : 0;
    return bits;
}

std::vector<MotsBatch> run_video(const oracle::DenseVideo& video, GridConfig config,
                                 int threads = 1) {
    MotsExtractor extractor(config, threads);
    std::vector<MotsBatch> batches;
    for (int t = 0; t < video.frames; ++t)
        batches.push_back(extractor.next(voxelize_coords(oracle::occupied_at(video, t))));
    return batches;
}

}  // namespace

TEST_SUITE("mots") {

TEST_CASE("neighbor offsets follow the channel-count law") {
    CHECK(neighbor_offsets(0) == std::vector<VoxelCoord>{{0, 0, 0}});
    CHECK(neighbor_offsets(1).size() == 27);
    CHECK(neighbor_offsets(2).size() == 125);
    CHECK_THROWS_AS(neighbor_offsets(-1), std::invalid_argument);
}

TEST_CASE("r=3 offsets equal the brute-force triple loop") {
    const std::vector<VoxelCoord> got = neighbor_offsets(3);
    std::vector<VoxelCoord> want;
    for (int dx = -3; dx <= 3; ++dx)
        for (int dy = -3; dy <= 3; ++dy)
            for (int dz = -3; dz <= 3; ++dz) want.push_back({dx, dy, dz});
    CHECK(got.size() == 343);
    CHECK(got == want);

    // lexicographic and unique
    std::set<VoxelCoord> unique(got.begin(), got.end());
    CHECK(unique.size() == got.size());
    CHECK(std::is_sorted(got.begin(), got.end()));
    CHECK(std::count(got.begin(), got.end(), VoxelCoord{0, 0, 0}) == 1);
}

TEST_CASE("isolated voxel has a single live row") {
    GridConfig config;
    config.radius = 1;
    config.window = 8;
    MotsExtractor extractor(config);
    const MotsBatch batch = extractor.next(voxelize_coords({{5, 5, 5}}));
    REQUIRE(batch.size() == 1);
    const std::vector<std::uint8_t> m = unpacked(batch.features[0], 8);
    const int self = 13;  // (0,0,0) sits mid-list for r=1
    for (int c = 0; c < 27; ++c)
        for (int j = 0; j < 8; ++j)
            CHECK(m[static_cast<std::size_t>(c) * 8 + j] == (c == self && j == 7 ? 1 : 0));
}

TEST_CASE("adjacent pair keeps exactly two all-ones rows") {
    GridConfig config;
    config.radius = 1;
    config.window = 6;
    MotsExtractor extractor(config);
    MotsBatch batch;
    for (int t = 0; t < 6; ++t)
        batch = extractor.next(voxelize_coords({{0, 0, 0}, {1, 0, 0}}));
    REQUIRE(batch.size() == 2);
    for (const MotsFeature& f : batch.features) {
        const std::vector<std::uint8_t> m = unpacked(f, 6);
        int full = 0, partial = 0;
        for (int c = 0; c < 27; ++c) {
            int ones = 0;
            for (int j = 0; j < 6; ++j) ones += m[static_cast<std::size_t>(c) * 6 + j];
            if (ones == 6) ++full;
            else if (ones != 0) ++partial;
        }
        CHECK(full == 2);
        CHECK(partial == 0);
    }
}

TEST_CASE("features equal the dense gather oracle") {
    Rng rng(303);
    for (int radius : {0, 1, 2}) {
        GridConfig config;
        config.radius = radius;
        config.window = 10;
        const oracle::DenseVideo video = oracle::random_video(rng, 9, 9, 9, 14, 0.3);
        const std::vector<VoxelCoord> offsets = neighbor_offsets(radius);

        MotsExtractor extractor(config);
        for (int t = 0; t < video.frames; ++t) {
            const MotsBatch batch =
                extractor.next(voxelize_coords(oracle::occupied_at(video, t)));
            CHECK(batch.channels == config.channels());
            for (const MotsFeature& f : batch.features)
                REQUIRE(unpacked(f, 10) ==
                        oracle::dense_feature(video, f.center, offsets, 10, t));
        }
    }
}

TEST_CASE("one-frame input is zero-padded") {
    GridConfig config;
    config.radius = 0;
    config.window = 12;
    MotsExtractor extractor(config);
    const MotsBatch batch = extractor.next(voxelize_coords({{3, 3, 3}}));
    REQUIRE(batch.size() == 1);
    const std::vector<std::uint8_t> m = unpacked(batch.features[0], 12);
    for (int j = 0; j < 11; ++j) CHECK(m[j] == 0);
    CHECK(m[11] == 1);
}

TEST_CASE("stationary scene saturates by frame w-1") {
    GridConfig config;
    config.radius = 1;
    config.window = 7;
    const std::vector<VoxelCoord> occ = {{0, 0, 0}, {0, 1, 0}, {4, 4, 4}};
    MotsExtractor extractor(config);
    for (int t = 0; t < 10; ++t) {
        const MotsBatch batch = extractor.next(voxelize_coords(occ));
        if (t < config.window - 1) continue;
        for (const MotsFeature& f : batch.features) {
            const std::vector<std::uint8_t> m = unpacked(f, 7);
            const std::vector<VoxelCoord> offsets = neighbor_offsets(1);
            for (std::size_t c = 0; c < offsets.size(); ++c) {
                const VoxelCoord n = f.center.offset(offsets[c].x, offsets[c].y, offsets[c].z);
                const bool neighbor_occupied =
                    std::find(occ.begin(), occ.end(), n) != occ.end();
                int ones = 0;
                for (int j = 0; j < 7; ++j) ones += m[c * 7 + j];
                CHECK(ones == (neighbor_occupied ? 7 : 0));
            }
        }
    }
}

TEST_CASE("extractor equals manual advance plus extract") {
    Rng rng(404);
    const oracle::DenseVideo video = oracle::random_video(rng, 7, 7, 7, 9, 0.3);
    GridConfig config;
    config.radius = 1;
    config.window = 8;

    MotsExtractor extractor(config);
    OccupancyState state(config);
    const std::vector<VoxelCoord> offsets = neighbor_offsets(config.radius);
    for (int t = 0; t < video.frames; ++t) {
        const std::vector<VoxelCoord> occ = oracle::occupied_at(video, t);
        const MotsBatch a = extractor.next(voxelize_coords(occ));
        state.advance(voxelize_coords(occ));
        const MotsBatch b = extract_frame(state, offsets, 1);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.features[i].center == b.features[i].center);
            CHECK(a.features[i].rows == b.features[i].rows);
        }
    }
}

TEST_CASE("batches are coordinate-sorted and thread-count independent") {
    Rng rng(505);
    const oracle::DenseVideo video = oracle::random_video(rng, 8, 8, 8, 10, 0.35);
    GridConfig config;
    config.radius = 1;
    config.window = 9;
    const std::vector<MotsBatch> one = run_video(video, config, 1);
    const std::vector<MotsBatch> four = run_video(video, config, 4);
    REQUIRE(one.size() == four.size());
    for (std::size_t t = 0; t < one.size(); ++t) {
        REQUIRE(one[t].size() == four[t].size());
        for (std::size_t i = 0; i < one[t].size(); ++i) {
            CHECK(one[t].features[i].center == four[t].features[i].center);
            CHECK(one[t].features[i].rows == four[t].features[i].rows);
            if (i > 0) CHECK(one[t].features[i - 1].center < one[t].features[i].center);
        }
    }
}

TEST_CASE("features are translation equivariant") {
    Rng rng(606);
    const oracle::DenseVideo video = oracle::random_video(rng, 6, 6, 6, 8, 0.3);
    GridConfig config;
    config.radius = 1;
    config.window = 8;
    const VoxelCoord shift{17, -9, 4};

    MotsExtractor base(config), moved(config);
    for (int t = 0; t < video.frames; ++t) {
        std::vector<VoxelCoord> occ = oracle::occupied_at(video, t);
        const MotsBatch a = base.next(voxelize_coords(occ));
        for (VoxelCoord& c : occ) c = c.offset(shift.x, shift.y, shift.z);
        const MotsBatch b = moved.next(voxelize_coords(occ));
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(b.features[i].center ==
                  a.features[i].center.offset(shift.x, shift.y, shift.z));
            CHECK(b.features[i].rows == a.features[i].rows);
        }
    }
}

TEST_CASE("self channel always ends in one") {
    Rng rng(707);
    const oracle::DenseVideo video = oracle::random_video(rng, 8, 8, 8, 12, 0.25);
    GridConfig config;
    config.radius = 2;
    config.window = 11;
    const std::size_t self = 62;  // (0,0,0) for r=2
    MotsExtractor extractor(config);
    for (int t = 0; t < video.frames; ++t) {
        const MotsBatch batch = extractor.next(voxelize_coords(oracle::occupied_at(video, t)));
        for (const MotsFeature& f : batch.features) {
            const std::vector<std::uint8_t> m = unpacked(f, 11);
            CHECK(m[self * 11 + 10] == 1);
        }
    }
}

TEST_CASE("feature cache round-trips") {
    testutil::TempDir tmp("mots");
    Rng rng(808);
    const oracle::DenseVideo video = oracle::random_video(rng, 7, 7, 7, 9, 0.3);
    GridConfig config;
    config.radius = 1;
    config.window = 13;
    const std::vector<MotsBatch> batches = run_video(video, config);

    const std::string path = tmp.str("f.mots");
    write_mots_cache_file(path, batches, config.channels(), config.window);
    const std::vector<MotsBatch> loaded =
        read_mots_cache_file(path, config.channels(), config.window);

    REQUIRE(loaded.size() == batches.size());
    for (std::size_t t = 0; t < batches.size(); ++t) {
        CHECK(loaded[t].frame_index == batches[t].frame_index);
        REQUIRE(loaded[t].size() == batches[t].size());
        for (std::size_t i = 0; i < batches[t].size(); ++i) {
            CHECK(loaded[t].features[i].center == batches[t].features[i].center);
            CHECK(loaded[t].features[i].rows == batches[t].features[i].rows);
        }
    }

    CHECK_THROWS_AS(read_mots_cache_file(path, 125, config.window), DataError);
    CHECK_THROWS_AS(read_mots_cache_file(path, config.channels(), 8), DataError);

    {
        std::ofstream bad(tmp.str("bad.mots"), std::ios::binary);
        bad << "NOPE";
    }
    CHECK_THROWS_AS(read_mots_cache_file(tmp.str("bad.mots"), 27, 13), DataError);

    // truncate mid-feature
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(tmp.str("cut.mots"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    }
    CHECK_THROWS_AS(read_mots_cache_file(tmp.str("cut.mots"), 27, 13), IoError);
}

TEST_CASE("row unpacking is oldest-first") {
    MotsFeature f;
    f.rows = {0b001u, 0b100u};
    std::vector<double> vals(6);
    unpack_feature(f, 3, vals.data());
    CHECK(vals == std::vector<double>{0, 0, 1, 1, 0, 0});
}

}  // TEST_SUITE
