#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motseg/mots.hpp"
#include "motseg/types.hpp"

namespace motseg {

/// 1D convolutional autoencoder over C x w occupancy matrices. Encoder:
/// three kernel-3 valid convs (channel plan c1,c2,c3), flatten, FC to
/// fc_hidden, FC to the code. Decoder mirrors it with transposed convs.
/// ReLU follows every layer except the code FC and the reconstruction
/// output; relu_literal applies it there too.
struct AeArchitecture {
    int channels = 125;  // C
    int window = 15;     // w
    std::array<int, 3> conv_channels{64, 32, 16};
    int fc_hidden = 64;
    int code = 32;  // e
    bool relu_literal = false;

    void validate() const;
    int conv_out_len() const { return window - 6; }
    int flat() const { return conv_channels[2] * conv_out_len(); }

    /// Channel plan by input width: wide neighborhoods (C >= 125) get
    /// [64,32,16], narrow ones [32,16,16].
    static std::array<int, 3> default_plan(int channels);

    bool operator==(const AeArchitecture&) const = default;
};

/// All weights and biases in one flat vector, with named views per layer so
/// gradients, Adam moments and persistence share the layout.
struct AeParameters {
    struct Block {
        std::string name;
        std::size_t offset = 0;
        std::size_t size = 0;
        int fan_in = 0;  // 0 for biases
    };

    AeArchitecture arch;
    std::uint64_t seed = 0;
    std::vector<double> values;
    std::vector<Block> blocks;

    double* block(std::string_view name);
    const double* block(std::string_view name) const;
    const Block& block_spec(std::string_view name) const;
    std::size_t size() const { return values.size(); }
};

/// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero,
/// fully determined by the seed.
AeParameters init_parameters(const AeArchitecture& arch, std::uint64_t seed);

/// Reusable per-sample activation storage; one per worker thread.
struct AeWorkspace {
    explicit AeWorkspace(const AeArchitecture& arch);

    std::vector<double> a1, a2, a3, hidden, code;
    std::vector<double> dec_hidden, dec_flat, t3, t2, recon;
    std::vector<double> g_a1, g_a2, g_a3, g_hidden, g_code;
    std::vector<double> g_dec_hidden, g_dec_flat, g_t3, g_t2, g_recon;
};

/// x is row-major C x w (row = channel, oldest step first).
void encode(const AeParameters& params, const double* x, double* code, AeWorkspace& ws);
std::vector<double> encode(const AeParameters& params, const std::vector<double>& x);

void decode(const AeParameters& params, const double* code, double* recon, AeWorkspace& ws);
std::vector<double> decode(const AeParameters& params, const std::vector<double>& code);

/// Mean squared difference over all n entries.
double mse_loss(const double* x, const double* recon, std::size_t n);

/// Encoder output with its source voxel, for downstream clustering.
struct Embedding {
    VoxelCoord coord;
    int frame_index = 0;
    std::vector<double> code;
};

Embedding encode_feature(const AeParameters& params, const MotsFeature& feature,
                         AeWorkspace& ws);

/// Encode `count` samples stored contiguously (each C*w doubles) into codes
/// (each e doubles). Parallel over samples; output order is input order.
void encode_batch(const AeParameters& params, const double* xs, std::size_t count, double* codes,
                  int threads = 1);

/// Encode a whole feature batch straight from its packed rows; returns
/// size() x e codes in feature order.
std::vector<double> encode_mots_batch(const AeParameters& params, const MotsBatch& batch,
                                      int threads = 1);

/// Forward + backward for one sample: returns the sample's MSE loss and adds
/// its parameter gradient into grad (same layout as params.values).
double sample_loss_and_gradient(const AeParameters& params, const double* x, double* grad,
                                AeWorkspace& ws);

struct GradientResult {
    std::vector<double> grad;  // mean over the batch
    double mean_loss = 0.0;
};

/// Mean gradient of the per-sample MSE over `count` contiguous samples.
GradientResult gradients(const AeParameters& params, const double* xs, std::size_t count,
                         int threads = 1);

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<double> m, v;

    AdamState(std::size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of params in place.
void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad);

struct TrainHyper {
    int batch = 1024;
    double lr = 1e-4;
    int epochs = 2;
    std::uint64_t seed = 1;
    int log_interval = 20;  // steps per loss-curve row
    int threads = 1;
};

struct TrainResult {
    std::vector<std::pair<std::int64_t, double>> loss_curve;  // (step, mean loss)
    std::int64_t steps = 0;
    double final_loss = 0.0;
};

/// Materializes sample `index` as C*w doubles; lets callers train from
/// packed or out-of-core storage.
using SampleGather = std::function<void(std::size_t index, double* out)>;

/// Adam over shuffled minibatches drawn from `gather`. Aborts with a numeric
/// error naming the step and first offending layer if a loss, gradient or
/// parameter goes non-finite. Deterministic given seed and thread count.
TrainResult train(AeParameters& params, const SampleGather& gather, std::size_t count,
                  const TrainHyper& hyper, std::ostream* log = nullptr);

/// Same, over a dataset of `count` samples stored contiguously.
TrainResult train(AeParameters& params, const std::vector<double>& dataset, std::size_t count,
                  const TrainHyper& hyper, std::ostream* log = nullptr);

/// Two-column "step loss" text rows.
void write_loss_curve(std::ostream& out, const std::vector<std::pair<std::int64_t, double>>& curve);

void save_model(const std::string& path, const AeParameters& params);
AeParameters load_model(const std::string& path);

}  // namespace motseg
