#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "motseg/autoencoder.hpp"
#include "motseg/ingest.hpp"
#include "motseg/voxel_grid.hpp"

namespace motseg {

struct PathsConfig {
    std::string frames_dir;
    std::string poses;       // optional sensor-pose file
    std::string labels_dir;  // optional ground-truth labels
    std::string output_dir = "out";
};

struct ModelConfig {
    int e = 32;
    int c1 = 0, c2 = 0, c3 = 0;  // 0,0,0 = plan chosen from the channel count
    int fc_hidden = 64;
    bool relu_literal = false;
    std::uint64_t seed = 1;  // sole randomness source of a run
};

struct TrainConfig {
    int batch = 1024;
    double lr = 1e-4;
    int epochs = 2;
    std::uint64_t max_features = 200000;  // training-set subsample cap
    int log_interval = 20;
};

struct GmmTrainConfig {
    int k = 20;
    std::uint64_t sample_target = 200000;
    int first_n_frames = 10;
    double threshold = 0.15;
    // -1 = first frame with a full window (w-1); the paper's literal first
    // frame is 0, where zero-padded histories carry no motion yet
    int reference_frame = -1;
    int fit_start = -1;  // same auto rule
    int max_iter = 100;
    double tol = 1e-4;
    double var_floor = 1e-6;
};

struct EvalConfig {
    double ground_z = -1.0;
    std::string lift_rule = "any";
    std::vector<std::uint32_t> moving_labels = default_moving_labels();
};

struct RunConfig {
    int threads = 0;  // 0 = hardware concurrency
    bool cache = false;
    bool export_point_labels = false;
};

struct PipelineConfig {
    PathsConfig paths;
    GridConfig grid;
    ModelConfig model;
    TrainConfig train;
    GmmTrainConfig gmm;
    EvalConfig eval;
    RunConfig run;

    void validate() const;
    AeArchitecture architecture() const;
    int resolved_reference_frame() const;  // applies the -1 auto rule
    int resolved_fit_start() const;
};

/// Every dotted key apply_override accepts, in declaration order.
const std::vector<std::string>& config_keys();

/// Set one "section.key" to a textual value; unknown keys and unparsable
/// values are config errors naming the key.
void apply_override(PipelineConfig& config, const std::string& key, const std::string& value);

/// Line-oriented "section.key = value" text; '#' starts a comment.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config_file(const std::string& path);

/// The full configuration in parse_config's own format.
void write_config(std::ostream& out, const PipelineConfig& config);

}  // namespace motseg
