#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "motseg/ingest.hpp"
#include "motseg/types.hpp"
#include "motseg/voxel_grid.hpp"

namespace motseg {

/// Voxel counts of one frame's moving-class confusion. A frame where nothing
/// is moving and nothing was predicted scores 1.0 (empty_pair marks it so
/// callers can log those separately).
struct FrameEval {
    std::size_t tp = 0, fp = 0, fn = 0;
    double iou = 1.0;
    int frame_index = 0;
    bool empty_pair = false;
};

struct SequenceEval {
    std::vector<FrameEval> frames;
    double miou = 0.0;  // arithmetic mean of per-frame IoU
};

enum class LiftRule { kAny, kMajority };

LiftRule parse_lift_rule(const std::string& name);
std::string to_string(LiftRule rule);

/// Per-voxel moving flags from point labels: a voxel is moving when any of
/// its points is (kAny) or when more than half are (kMajority). Output is
/// aligned with vox.coords.
std::vector<std::uint8_t> lift_labels(const PointLabels& labels, const Voxelization& vox,
                                      LiftRule rule = LiftRule::kAny);

/// Confusion counts of masks aligned to the same universe (flags per
/// occupied voxel).
FrameEval frame_iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
                    int frame_index = 0);

/// Set form: both masks must be subsets of the universe.
FrameEval frame_iou(const std::vector<VoxelCoord>& pred, const std::vector<VoxelCoord>& truth,
                    const std::vector<VoxelCoord>& universe, int frame_index = 0);

SequenceEval sequence_miou(std::vector<FrameEval> frames);

/// One prediction row of the export format: voxel, frame, moving flag.
struct VoxelPrediction {
    VoxelCoord coord;
    int frame_index = 0;
    std::uint8_t moving = 0;
};

/// "ix,iy,iz,t,label" rows sorted by (t, coord).
void write_predictions_csv(std::ostream& out, std::vector<VoxelPrediction> rows);
void write_predictions_csv_file(const std::string& path, std::vector<VoxelPrediction> rows);
std::vector<VoxelPrediction> read_predictions_csv(std::istream& in);
std::vector<VoxelPrediction> read_predictions_csv_file(const std::string& path);

/// Hyperparameter grid mirroring the ablation axes.
struct SweepAxes {
    std::vector<int> r{2};
    std::vector<int> e{32};
    std::vector<int> k{20};
    std::vector<int> w{15};

    void validate() const;  // every axis non-empty
};

struct SweepConfig {
    int r = 2, e = 32, k = 20, w = 15;
};

struct SweepCell {
    SweepConfig config;
    std::vector<double> scene_miou;  // aligned with the sweep's scene list
    double mean = 0.0;
    double stddev = 0.0;  // population std over scenes
    bool failed = false;
    std::string error;
};

struct SweepTable {
    std::vector<std::string> scenes;
    std::vector<SweepCell> cells;
};

/// Runs `handle` (a full pipeline returning sequence mIoU) for every grid
/// cell and scene, in lexicographic (r, e, k, w) order. A throwing cell is
/// recorded as failed with its message and the sweep continues.
SweepTable sweep(const SweepAxes& axes, const std::vector<std::string>& scenes,
                 const std::function<double(const SweepConfig&, const std::string&)>& handle);

/// Mean/std of cell means grouped by each axis value, e.g. "r"=2 over all
/// cells with r=2. Failed cells are skipped.
struct AxisAggregate {
    std::string axis;
    int value = 0;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t cells = 0;
};

std::vector<AxisAggregate> axis_aggregates(const SweepTable& table);

/// "r,e,k,w,<scene>...,mean,std,error" rows.
void write_sweep_csv(std::ostream& out, const SweepTable& table);
/// "axis,value,mean,std,cells" rows.
void write_axis_csv(std::ostream& out, const std::vector<AxisAggregate>& aggregates);

}  // namespace motseg
