#include <doctest.h>

#include <sstream>
#include <string>

#include "motseg/config.hpp"
#include "motseg/error.hpp"
#include "support/temp.hpp"

using namespace motseg;

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const PipelineConfig c;
    CHECK(c.grid.resolution == 0.2);
    CHECK(c.grid.window == 15);
    CHECK(c.grid.radius == 2);
    CHECK(c.model.e == 32);
    CHECK(c.model.fc_hidden == 64);
    CHECK(c.model.c1 == 0);
    CHECK_FALSE(c.model.relu_literal);
    CHECK(c.model.seed == 1);
    CHECK(c.train.batch == 1024);
    CHECK(c.train.lr == 1e-4);
    CHECK(c.train.epochs == 2);
    CHECK(c.train.max_features == 200000);
    CHECK(c.gmm.k == 20);
    CHECK(c.gmm.sample_target == 200000);
    CHECK(c.gmm.first_n_frames == 10);
    CHECK(c.gmm.threshold == 0.15);
    CHECK(c.gmm.reference_frame == -1);
    CHECK(c.gmm.fit_start == -1);
    CHECK(c.eval.ground_z == -1.0);
    CHECK(c.eval.lift_rule == "any");
    CHECK(c.eval.moving_labels == default_moving_labels());
    CHECK(c.paths.output_dir == "out");
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("the architecture mirrors grid and model settings") {
    PipelineConfig c;
    AeArchitecture arch = c.architecture();
    CHECK(arch.channels == 125);
    CHECK(arch.window == 15);
    CHECK(arch.conv_channels == std::array<int, 3>{64, 32, 16});
    CHECK(arch.code == 32);

    c.grid.radius = 1;
    c.grid.window = 9;
    c.model.e = 8;
    arch = c.architecture();
    CHECK(arch.channels == 27);
    CHECK(arch.window == 9);
    CHECK(arch.conv_channels == std::array<int, 3>{32, 16, 16});

    c.model.c1 = 48;
    c.model.c2 = 24;
    c.model.c3 = 12;
    arch = c.architecture();
    CHECK(arch.conv_channels == std::array<int, 3>{48, 24, 12});

    c.model.relu_literal = true;
    CHECK(c.architecture().relu_literal);
}

TEST_CASE("write then parse round-trips every field") {
    PipelineConfig c;
    c.paths.frames_dir = "/data/seq00/velodyne";
    c.paths.poses = "/data/seq00/poses.txt";
    c.paths.labels_dir = "/data/seq00/labels";
    c.paths.output_dir = "/tmp/out";
    c.grid.resolution = 0.25;
    c.grid.window = 20;
    c.grid.radius = 1;
    c.model.e = 16;
    c.model.c1 = 40;
    c.model.c2 = 20;
    c.model.c3 = 10;
    c.model.relu_literal = true;
    c.model.seed = 99;
    c.train.batch = 256;
    c.train.lr = 5e-4;
    c.train.epochs = 3;
    c.train.max_features = 5000;
    c.train.log_interval = 7;
    c.gmm.k = 12;
    c.gmm.sample_target = 40000;
    c.gmm.first_n_frames = 8;
    c.gmm.threshold = 0.3;
    c.gmm.reference_frame = 19;
    c.gmm.fit_start = 19;
    c.gmm.max_iter = 55;
    c.gmm.tol = 1e-5;
    c.gmm.var_floor = 1e-7;
    c.eval.ground_z = -1.4;
    c.eval.lift_rule = "majority";
    c.eval.moving_labels = {1, 251};
    c.run.threads = 2;
    c.run.cache = true;
    c.run.export_point_labels = true;

    std::ostringstream out;
    write_config(out, c);
    std::istringstream in(out.str());
    const PipelineConfig back = parse_config(in);

    CHECK(back.paths.frames_dir == c.paths.frames_dir);
    CHECK(back.paths.poses == c.paths.poses);
    CHECK(back.paths.labels_dir == c.paths.labels_dir);
    CHECK(back.paths.output_dir == c.paths.output_dir);
    CHECK(back.grid.resolution == c.grid.resolution);
    CHECK(back.grid.window == c.grid.window);
    CHECK(back.grid.radius == c.grid.radius);
    CHECK(back.model.e == c.model.e);
    CHECK(back.model.c1 == c.model.c1);
    CHECK(back.model.c2 == c.model.c2);
    CHECK(back.model.c3 == c.model.c3);
    CHECK(back.model.relu_literal == c.model.relu_literal);
    CHECK(back.model.seed == c.model.seed);
    CHECK(back.train.batch == c.train.batch);
    CHECK(back.train.lr == c.train.lr);
    CHECK(back.train.epochs == c.train.epochs);
    CHECK(back.train.max_features == c.train.max_features);
    CHECK(back.train.log_interval == c.train.log_interval);
    CHECK(back.gmm.k == c.gmm.k);
    CHECK(back.gmm.sample_target == c.gmm.sample_target);
    CHECK(back.gmm.first_n_frames == c.gmm.first_n_frames);
    CHECK(back.gmm.threshold == c.gmm.threshold);
    CHECK(back.gmm.reference_frame == c.gmm.reference_frame);
    CHECK(back.gmm.fit_start == c.gmm.fit_start);
    CHECK(back.gmm.max_iter == c.gmm.max_iter);
    CHECK(back.gmm.tol == c.gmm.tol);
    CHECK(back.gmm.var_floor == c.gmm.var_floor);
    CHECK(back.eval.ground_z == c.eval.ground_z);
    CHECK(back.eval.lift_rule == c.eval.lift_rule);
    CHECK(back.eval.moving_labels == c.eval.moving_labels);
    CHECK(back.run.threads == c.run.threads);
    CHECK(back.run.cache == c.run.cache);
    CHECK(back.run.export_point_labels == c.run.export_point_labels);
}

TEST_CASE("parsing accepts comments, blanks and spacing") {
    std::istringstream in(
        "# a comment\n"
        "\n"
        "grid.r = 1\n"
        "  model.e=8  # trailing comment\n"
        "train.lr =  0.001\n");
    const PipelineConfig c = parse_config(in);
    CHECK(c.grid.radius == 1);
    CHECK(c.model.e == 8);
    CHECK(c.train.lr == 0.001);
}

TEST_CASE("overrides by key") {
    PipelineConfig c;
    apply_override(c, "grid.w", "8");
    CHECK(c.grid.window == 8);
    apply_override(c, "model.relu_literal", "true");
    CHECK(c.model.relu_literal);
    apply_override(c, "model.relu_literal", "false");
    CHECK_FALSE(c.model.relu_literal);
    apply_override(c, "model.seed", "18446744073709551615");  // full uint64 range
    CHECK(c.model.seed == 18446744073709551615ull);
    apply_override(c, "gmm.threshold", "0.35");
    CHECK(c.gmm.threshold == 0.35);
    apply_override(c, "paths.frames_dir", "/some/dir");
    CHECK(c.paths.frames_dir == "/some/dir");
    apply_override(c, "eval.moving_labels", "1");
    CHECK(c.eval.moving_labels == std::vector<std::uint32_t>{1});
    apply_override(c, "eval.moving_labels", "251,252,253");
    CHECK(c.eval.moving_labels == std::vector<std::uint32_t>{251, 252, 253});
    apply_override(c, "run.cache", "1");
    CHECK(c.run.cache);
}

TEST_CASE("bad overrides name the key") {
    PipelineConfig c;
    CHECK_THROWS_WITH_AS(apply_override(c, "grid.sides", "3"), doctest::Contains("grid.sides"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(c, "grid.w", "soon"), doctest::Contains("grid.w"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(c, "train.lr", "fast"), doctest::Contains("train.lr"),
                         ConfigError);
    CHECK_THROWS_AS(apply_override(c, "model.relu_literal", "maybe"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "eval.moving_labels", ""), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "windowless", "1"), ConfigError);
}

TEST_CASE("parse errors carry the line number") {
    std::istringstream in("grid.r = 1\nthis line has no equals\n");
    CHECK_THROWS_WITH_AS(parse_config(in), doctest::Contains("line 2"), ConfigError);

    std::istringstream in2("grid.r = 1\ngrid.r = banana\n");
    CHECK_THROWS_WITH_AS(parse_config(in2), doctest::Contains("grid.r"), ConfigError);

    testutil::TempDir tmp("cfg");
    CHECK_THROWS_AS(load_config_file(tmp.str("missing.cfg")), ConfigError);
}

TEST_CASE("config_keys covers exactly the override surface") {
    const std::vector<std::string>& keys = config_keys();
    CHECK(keys.size() >= 30);
    PipelineConfig c;
    for (const std::string& key : keys) {
        // every listed key must be recognized (values may still be rejected)
        try {
            apply_override(c, key, "1");
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            CHECK(what.find("unknown") == std::string::npos);
        }
    }
}

TEST_CASE("validation") {
    PipelineConfig c;

    SUBCASE("window too small for three convolutions") {
        c.grid.window = 6;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.grid.window = 7;
        CHECK_NOTHROW(c.validate());
    }

    SUBCASE("window beyond the packed-history width") {
        c.grid.window = 65;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.grid.window = 64;
        CHECK_NOTHROW(c.validate());
    }

    SUBCASE("threshold bounds") {
        c.gmm.threshold = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.gmm.threshold = 1.0;
        CHECK_NOTHROW(c.validate());
        c.gmm.threshold = 1.5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    SUBCASE("partial channel plans are rejected") {
        c.model.c1 = 32;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.model.c2 = 16;
        c.model.c3 = 8;
        CHECK_NOTHROW(c.validate());
    }

    SUBCASE("cluster count") {
        c.gmm.k = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    SUBCASE("grid resolution") {
        c.grid.resolution = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.grid.resolution = -0.5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    SUBCASE("negative radius") {
        c.grid.radius = -1;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    SUBCASE("training settings") {
        c.train.batch = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = PipelineConfig{};
        c.train.lr = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = PipelineConfig{};
        c.train.epochs = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}

TEST_CASE("the -1 frame rules resolve to the first full window") {
    PipelineConfig c;
    c.grid.window = 15;
    CHECK(c.resolved_reference_frame() == 14);
    CHECK(c.resolved_fit_start() == 14);
    c.gmm.reference_frame = 0;
    c.gmm.fit_start = 3;
    CHECK(c.resolved_reference_frame() == 0);
    CHECK(c.resolved_fit_start() == 3);
    c.grid.window = 8;
    c.gmm.reference_frame = -1;
    CHECK(c.resolved_reference_frame() == 7);
}

}  // TEST_SUITE
