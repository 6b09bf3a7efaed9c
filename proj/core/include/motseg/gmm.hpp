#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "motseg/types.hpp"

namespace motseg {

/// Diagonal-covariance Gaussian mixture over e-dimensional embeddings.
struct GmmModel {
    int k = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    bool fitted = false;
    std::vector<double> weights;    // k
    std::vector<double> means;      // k x dim, row-major
    std::vector<double> variances;  // k x dim, each entry >= the fit's floor

    /// Weights on the simplex within 1e-9, variances at or above floor.
    void validate(double var_floor = 0.0) const;
};

struct GmmOptions {
    int max_iter = 100;
    double tol = 1e-4;        // stop when mean log-likelihood gains less
    double var_floor = 1e-6;
    int threads = 1;
};

struct GmmFitResult {
    GmmModel model;
    std::vector<double> ll_trace;  // mean log-likelihood after each iteration
    int reseeds = 0;               // degenerate components re-seeded
};

/// k-means++ center choices on the seed: indices into the sample array.
/// Throws std::invalid_argument when k exceeds the number of distinct
/// samples.
std::vector<std::size_t> kmeanspp_centers(const double* samples, std::size_t count, int dim,
                                          int k, std::uint64_t seed);

/// EM from k-means++ initialization. samples is count x dim row-major.
/// Degenerate components (vanishing responsibility mass) are re-seeded from
/// the worst-modeled sample, counted, and noted on `log` when given.
GmmFitResult fit_gmm(const double* samples, std::size_t count, int dim, int k,
                     std::uint64_t seed, const GmmOptions& opts = {},
                     std::ostream* log = nullptr);

/// EM from explicit initial means (k x dim row-major).
GmmFitResult fit_gmm_from_means(const double* samples, std::size_t count, int dim,
                                const std::vector<double>& init_means, int k,
                                const GmmOptions& opts = {}, std::ostream* log = nullptr);

/// Mean log-likelihood of samples under the model.
double mean_log_likelihood(const GmmModel& model, const double* samples, std::size_t count,
                           int threads = 1);

struct GmmAssignment {
    int cluster = 0;
    std::vector<double> responsibilities;  // sums to 1 within 1e-9
};

/// Argmax-responsibility component, ties broken by lowest cluster id.
GmmAssignment assign(const GmmModel& model, const double* z);

/// Cluster ids for count samples; parallel, output order = input order.
std::vector<int> assign_batch(const GmmModel& model, const double* samples, std::size_t count,
                              int threads = 1);

/// Uniform without-replacement subsample of the embeddings pooled from the
/// first `first_n_frames` entries of `frames` (each a flat count_i x dim
/// array). Everything is returned when fewer than `target` are available.
struct FitSample {
    std::vector<double> data;  // count x dim
    std::size_t count = 0;
    int dim = 0;
    std::vector<int> origin_frame;  // per sample, index into `frames`
};

FitSample sample_for_fit(const std::vector<std::vector<double>>& frames, int dim,
                         int first_n_frames, std::size_t target, std::uint64_t seed);

/// Which clusters count as moving, decided by IoU against a reference mask.
struct ClusterMapping {
    std::vector<int> moving_clusters;  // sorted ascending
    std::vector<double> ious;          // per cluster id
    double threshold = 0.15;
    bool empty_reference = false;  // reference mask had no moving voxels

    bool is_moving(int cluster) const;
};

/// Per-cluster IoU of {voxels assigned to the cluster} against the moving
/// mask, over the same frame's occupied voxels. An empty mask yields a
/// warning result (empty_reference set) with no moving clusters.
ClusterMapping map_clusters(const std::vector<VoxelCoord>& coords,
                            const std::vector<int>& clusters, int k,
                            const std::vector<VoxelCoord>& moving_mask, double threshold);

/// Moving flag per sample: assigned cluster is in the mapping's moving set.
std::vector<std::uint8_t> segment(const GmmModel& model, const ClusterMapping& mapping,
                                  const double* samples, std::size_t count, int threads = 1);

/// Model plus optional mapping, magic "MGMM".
void save_gmm(const std::string& path, const GmmModel& model,
              const ClusterMapping* mapping = nullptr);
struct LoadedGmm {
    GmmModel model;
    bool has_mapping = false;
    ClusterMapping mapping;
};
LoadedGmm load_gmm(const std::string& path);

}  // namespace motseg
