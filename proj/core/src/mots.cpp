#include "motseg/mots.hpp"

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "motseg/detail/binary_io.hpp"
#include "motseg/error.hpp"
#include "motseg/parallel.hpp"

namespace motseg {

std::vector<VoxelCoord> neighbor_offsets(int radius) {
    if (radius < 0)
        throw std::invalid_argument("neighborhood radius must be non-negative, got " +
                                    std::to_string(radius));
    std::vector<VoxelCoord> offsets;
    offsets.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1) * (2 * radius + 1));
    for (int dx = -radius; dx <= radius; ++dx)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dz = -radius; dz <= radius; ++dz) offsets.push_back({dx, dy, dz});
    return offsets;
}

MotsBatch extract_frame(const OccupancyState& state, const std::vector<VoxelCoord>& offsets,
                        int threads) {
    const auto& coords = state.current().coords;
    MotsBatch batch;
    batch.channels = static_cast<int>(offsets.size());
    batch.window = state.config().window;
    batch.frame_index = state.frame_index();
    batch.features.resize(coords.size());

    parallel_chunks(coords.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            MotsFeature& f = batch.features[i];
            f.center = coords[i];
            f.frame_index = batch.frame_index;
            f.rows.resize(offsets.size());
            for (std::size_t c = 0; c < offsets.size(); ++c) {
                const VoxelCoord& d = offsets[c];
                f.rows[c] = state.history_bits(coords[i].offset(d.x, d.y, d.z));
            }
        }
    });
    return batch;
}

MotsExtractor::MotsExtractor(GridConfig config, int threads)
    : state_(config), offsets_(neighbor_offsets(config.radius)), threads_(threads) {}

MotsBatch MotsExtractor::next(Voxelization vox) {
    state_.advance(std::move(vox));
    return extract_frame(state_, offsets_, threads_);
}

void unpack_rows(const std::uint64_t* rows, std::size_t channels, int window, double* out) {
    for (std::size_t c = 0; c < channels; ++c) {
        const std::uint64_t bits = rows[c];
        double* row = out + c * static_cast<std::size_t>(window);
        for (int j = 0; j < window; ++j)
            row[j] = static_cast<double>((bits >> (window - 1 - j)) & 1);
    }
}

void unpack_feature(const MotsFeature& feature, int window, double* out) {
    unpack_rows(feature.rows.data(), feature.rows.size(), window, out);
}

std::vector<double> unpack_feature(const MotsFeature& feature, int window) {
    std::vector<double> out(feature.rows.size() * static_cast<std::size_t>(window));
    unpack_feature(feature, window, out.data());
    return out;
}

namespace {

constexpr char kMotsMagic[4] = {'M', 'O', 'T', 'S'};
constexpr std::uint32_t kMotsVersion = 1;

}  // namespace

void write_mots_cache(std::ostream& out, const std::vector<MotsBatch>& batches, int channels,
                      int window) {
    using detail::write_le;
    detail::write_magic(out, kMotsMagic);
    write_le<std::uint32_t>(out, kMotsVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(channels));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(window));

    std::uint64_t count = 0;
    for (const MotsBatch& b : batches) count += b.features.size();
    write_le<std::uint64_t>(out, count);

    const int row_bytes = (window + 7) / 8;
    for (const MotsBatch& b : batches) {
        for (const MotsFeature& f : b.features) {
            write_le<std::int32_t>(out, f.center.x);
            write_le<std::int32_t>(out, f.center.y);
            write_le<std::int32_t>(out, f.center.z);
            write_le<std::int32_t>(out, f.frame_index);
            for (std::uint64_t bits : f.rows) {
                // stored oldest-first so the on-disk layout matches the
                // unpacked matrix, independent of the in-memory packing
                std::uint64_t disk = 0;
                for (int j = 0; j < window; ++j)
                    disk |= ((bits >> (window - 1 - j)) & 1) << j;
                for (int byte = 0; byte < row_bytes; ++byte)
                    write_le<std::uint8_t>(out, static_cast<std::uint8_t>((disk >> (8 * byte)) & 0xff));
            }
        }
    }
    if (!out) throw IoError("failed writing feature cache");
}

void write_mots_cache_file(const std::string& path, const std::vector<MotsBatch>& batches,
                           int channels, int window) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_mots_cache(out, batches, channels, window);
}

std::vector<MotsBatch> read_mots_cache(std::istream& in, int expect_channels, int expect_window) {
    using detail::read_le;
    detail::expect_magic(in, kMotsMagic, "feature cache");
    auto version = read_le<std::uint32_t>(in, "feature cache");
    if (version != kMotsVersion)
        throw DataError("unsupported feature cache version " + std::to_string(version));
    auto channels = static_cast<int>(read_le<std::uint32_t>(in, "feature cache"));
    auto window = static_cast<int>(read_le<std::uint32_t>(in, "feature cache"));
    if (channels != expect_channels || window != expect_window)
        throw DataError("feature cache shape " + std::to_string(channels) + "x" +
                        std::to_string(window) + " does not match configured " +
                        std::to_string(expect_channels) + "x" + std::to_string(expect_window));
    auto count = read_le<std::uint64_t>(in, "feature cache");

    const int row_bytes = (window + 7) / 8;
    std::map<int, MotsBatch> by_frame;
    for (std::uint64_t i = 0; i < count; ++i) {
        MotsFeature f;
        f.center.x = read_le<std::int32_t>(in, "feature cache");
        f.center.y = read_le<std::int32_t>(in, "feature cache");
        f.center.z = read_le<std::int32_t>(in, "feature cache");
        f.frame_index = read_le<std::int32_t>(in, "feature cache");
        f.rows.resize(static_cast<std::size_t>(channels));
        for (int c = 0; c < channels; ++c) {
            std::uint64_t disk = 0;
            for (int byte = 0; byte < row_bytes; ++byte)
                disk |= static_cast<std::uint64_t>(read_le<std::uint8_t>(in, "feature cache")) << (8 * byte);
            std::uint64_t bits = 0;
            for (int j = 0; j < window; ++j)
                bits |= ((disk >> j) & 1) << (window - 1 - j);
            f.rows[c] = bits;
        }
        MotsBatch& b = by_frame[f.frame_index];
        b.channels = channels;
        b.window = window;
        b.frame_index = f.frame_index;
        b.features.push_back(std::move(f));
    }

    std::vector<MotsBatch> batches;
    batches.reserve(by_frame.size());
    for (auto& [frame, batch] : by_frame) batches.push_back(std::move(batch));
    return batches;
}

std::vector<MotsBatch> read_mots_cache_file(const std::string& path, int expect_channels,
                                            int expect_window) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return read_mots_cache(in, expect_channels, expect_window);
}

}  // namespace motseg
