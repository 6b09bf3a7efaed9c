#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "motseg/autoencoder.hpp"
#include "motseg/config.hpp"
#include "motseg/evaluation.hpp"
#include "motseg/gmm.hpp"

namespace motseg {

/// Frame files (*.bin) of a directory in name order.
std::vector<std::string> list_frame_files(const std::string& dir);

/// One fully ingested frame as the pipeline sees it: pose-aligned,
/// ground-filtered, voxelized, with features and lifted truth when asked.
struct FrameContext {
    int t = 0;
    std::string path;
    Voxelization vox;
    MotsBatch batch;                  // only when features were requested
    std::vector<std::uint8_t> truth;  // aligned with vox.coords; empty without labels
};

/// Stream every frame of the configured sequence through `fn` in order.
void stream_frames(const PipelineConfig& config, bool want_truth, bool want_features,
                   const std::function<void(FrameContext&)>& fn);

struct TrainOutput {
    std::string model_path;
    std::string loss_path;
    TrainResult result;
    std::size_t features_seen = 0;     // before subsampling
    std::size_t features_trained = 0;  // training-set size
};

/// Extract features, subsample to train.max_features, train the
/// autoencoder, and write model.bin + loss.txt under paths.output_dir.
TrainOutput run_train(const PipelineConfig& config, std::ostream& log);

struct SegmentOutput {
    std::string predictions_path;
    std::string gmm_path;
    ClusterMapping mapping;
    GmmFitResult fit;  // ll_trace empty when a pre-fitted GMM was loaded
    int frames = 0;
    bool has_eval = false;
    SequenceEval eval;
};

/// Encode every frame, fit or load the GMM, map clusters on the reference
/// frame, segment the sequence, and write predictions.csv (+ gmm.bin when
/// fitting). `gmm_path` empty means fit; otherwise the file is loaded.
SegmentOutput run_segment(const PipelineConfig& config, const std::string& model_path,
                          const std::string& gmm_path, std::ostream& log);

struct EvalOutput {
    SequenceEval eval;
    std::size_t empty_pairs = 0;
    std::string table_path;
};

/// Score an exported prediction file against the configured labels; writes
/// per-frame rows to eval.csv under paths.output_dir.
EvalOutput run_eval(const PipelineConfig& config, const std::string& predictions_path,
                    std::ostream& log);

/// Train + segment + evaluate one scene directory (velodyne/ + labels/);
/// returns the sequence mIoU. Artifacts land under config.paths.output_dir.
double run_scene(PipelineConfig config, const std::string& scene_dir, std::ostream& log);

/// Full grid sweep over scene directories; writes sweep.csv and
/// sweep_axes.csv under paths.output_dir.
SweepTable run_sweep(const PipelineConfig& base, const SweepAxes& axes,
                     const std::vector<std::string>& scene_dirs, std::ostream& log);

}  // namespace motseg
