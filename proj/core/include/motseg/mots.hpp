#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "motseg/types.hpp"
#include "motseg/voxel_grid.hpp"

namespace motseg {

/// (dx, dy, dz) displacements covering the cube of the given radius, in
/// lexicographic order. The channel index of a feature row is the position of
/// its offset here.
std::vector<VoxelCoord> neighbor_offsets(int radius);

/// Multivariate occupancy time series for one voxel at one frame: C packed
/// histories, one per neighborhood channel, each w bits (bit 0 = newest).
struct MotsFeature {
    VoxelCoord center;
    int frame_index = 0;
    std::vector<std::uint64_t> rows;
};

/// All features extracted from a single frame, sorted by center coordinate.
struct MotsBatch {
    int channels = 0;
    int window = 0;
    int frame_index = 0;
    std::vector<MotsFeature> features;

    std::size_t size() const { return features.size(); }
};

/// Gather the feature of every currently occupied voxel from the occupancy
/// state. Histories of neighbors that are unoccupied for the whole window
/// come out as all zeros.
MotsBatch extract_frame(const OccupancyState& state, const std::vector<VoxelCoord>& offsets,
                        int threads = 1);

/// Streaming extractor: feed frames in order, receive the corresponding
/// feature batches.
class MotsExtractor {
public:
    explicit MotsExtractor(GridConfig config, int threads = 1);

    MotsBatch next(Voxelization vox);

    const OccupancyState& state() const { return state_; }
    const std::vector<VoxelCoord>& offsets() const { return offsets_; }

private:
    OccupancyState state_;
    std::vector<VoxelCoord> offsets_;
    int threads_;
};

/// Expand packed histories into a row-major channels x window matrix of
/// 0.0/1.0 values, each row oldest-first.
void unpack_rows(const std::uint64_t* rows, std::size_t channels, int window, double* out);
void unpack_feature(const MotsFeature& feature, int window, double* out);
std::vector<double> unpack_feature(const MotsFeature& feature, int window);

/// Binary cache of extracted features, so long runs can skip re-extraction.
void write_mots_cache(std::ostream& out, const std::vector<MotsBatch>& batches, int channels,
                      int window);
void write_mots_cache_file(const std::string& path, const std::vector<MotsBatch>& batches,
                           int channels, int window);
std::vector<MotsBatch> read_mots_cache(std::istream& in, int expect_channels, int expect_window);
std::vector<MotsBatch> read_mots_cache_file(const std::string& path, int expect_channels,
                                            int expect_window);

}  // namespace motseg
