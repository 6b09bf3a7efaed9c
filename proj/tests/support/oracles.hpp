#pragma once

// Reference implementations the tests compare the library against. Everything
// here favors obviousness over speed: dense arrays, straight-line loops,
// direct formula transcriptions. None of it shares code with the library.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "motseg/autoencoder.hpp"
#include "motseg/gmm.hpp"
#include "motseg/ingest.hpp"
#include "motseg/rng.hpp"
#include "motseg/types.hpp"

namespace oracle {

// ---------- dense 4D occupancy video ----------

struct DenseVideo {
    int nx = 0, ny = 0, nz = 0, frames = 0;
    std::vector<std::uint8_t> occ;  // [t][x][y][z]

    std::size_t index(int t, int x, int y, int z) const {
        return ((static_cast<std::size_t>(t) * nx + x) * ny + y) * nz + z;
    }
    bool at(int t, int x, int y, int z) const {
        if (t < 0 || t >= frames) return false;
        if (x < 0 || x >= nx || y < 0 || y >= ny || z < 0 || z >= nz) return false;
        return occ[index(t, x, y, z)] != 0;
    }
};

inline DenseVideo random_video(motseg::Rng& rng, int nx, int ny, int nz, int frames,
                               double fill) {
    DenseVideo v;
    v.nx = nx;
    v.ny = ny;
    v.nz = nz;
    v.frames = frames;
    v.occ.resize(static_cast<std::size_t>(nx) * ny * nz * frames);
    for (auto& cell : v.occ) cell = rng.uniform() < fill ? 1 : 0;
    return v;
}

inline std::vector<motseg::VoxelCoord> occupied_at(const DenseVideo& v, int t) {
    std::vector<motseg::VoxelCoord> out;
    for (int x = 0; x < v.nx; ++x)
        for (int y = 0; y < v.ny; ++y)
            for (int z = 0; z < v.nz; ++z)
                if (v.at(t, x, y, z)) out.push_back({x, y, z});
    return out;
}

// Occupancy history of one cell at frame t, oldest first: entry j is the
// occupancy at absolute frame t-(w-1)+j, frames before 0 reading as free.
inline std::vector<std::uint8_t> dense_history(const DenseVideo& v, motseg::VoxelCoord c, int w,
                                               int t) {
    std::vector<std::uint8_t> h(static_cast<std::size_t>(w));
    for (int j = 0; j < w; ++j) h[j] = v.at(t - (w - 1) + j, c.x, c.y, c.z) ? 1 : 0;
    return h;
}

// Full C x w gather for one center voxel.
inline std::vector<std::uint8_t> dense_feature(const DenseVideo& v, motseg::VoxelCoord center,
                                               const std::vector<motseg::VoxelCoord>& offsets,
                                               int w, int t) {
    std::vector<std::uint8_t> out;
    out.reserve(offsets.size() * static_cast<std::size_t>(w));
    for (const motseg::VoxelCoord& d : offsets) {
        const std::vector<std::uint8_t> row =
            dense_history(v, {center.x + d.x, center.y + d.y, center.z + d.z}, w, t);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

// ---------- voxel cell by interval membership ----------

// The cell c with c*m <= v < (c+1)*m, found by scanning candidates instead of
// calling floor.
inline std::int32_t cell_search(float v, double m) {
    const auto guess = static_cast<std::int64_t>(std::llround(static_cast<double>(v) / m));
    for (std::int64_t c = guess - 2; c <= guess + 2; ++c) {
        if (static_cast<double>(c) * m <= static_cast<double>(v) &&
            static_cast<double>(v) < static_cast<double>(c + 1) * m)
            return static_cast<std::int32_t>(c);
    }
    throw std::logic_error("cell search failed");
}

inline motseg::VoxelCoord cell_of(const motseg::Vec3f& p, double m) {
    return {cell_search(p.x, m), cell_search(p.y, m), cell_search(p.z, m)};
}

// ---------- homogeneous 4x4 transforms ----------

struct Mat4 {
    double m[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major
};

inline Mat4 pose_matrix(const motseg::Pose& p) {
    Mat4 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.m[r * 4 + c] = p.rotation[r * 3 + c];
    out.m[3] = p.translation.x;
    out.m[7] = p.translation.y;
    out.m[11] = p.translation.z;
    out.m[12] = out.m[13] = out.m[14] = 0.0;
    out.m[15] = 1.0;
    return out;
}

inline Mat4 mat_mul(const Mat4& a, const Mat4& b) {
    Mat4 out;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) acc += a.m[r * 4 + i] * b.m[i * 4 + c];
            out.m[r * 4 + c] = acc;
        }
    return out;
}

// General Gauss-Jordan inverse with partial pivoting; no rigid-transform
// shortcuts, so it cannot share a bug with the library's R-transpose path.
inline Mat4 mat_inverse(const Mat4& a) {
    double aug[4][8] = {};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) aug[r][c] = a.m[r * 4 + c];
        aug[r][4 + r] = 1.0;
    }
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(aug[r][col]) > std::fabs(aug[pivot][col])) pivot = r;
        if (std::fabs(aug[pivot][col]) < 1e-12) throw std::logic_error("singular matrix");
        if (pivot != col)
            for (int c = 0; c < 8; ++c) std::swap(aug[pivot][c], aug[col][c]);
        const double inv = 1.0 / aug[col][col];
        for (int c = 0; c < 8; ++c) aug[col][c] *= inv;
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = aug[r][col];
            for (int c = 0; c < 8; ++c) aug[r][c] -= f * aug[col][c];
        }
    }
    Mat4 out;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out.m[r * 4 + c] = aug[r][4 + c];
    return out;
}

inline motseg::Vec3d transform_point(const Mat4& t, const motseg::Vec3d& p) {
    return {t.m[0] * p.x + t.m[1] * p.y + t.m[2] * p.z + t.m[3],
            t.m[4] * p.x + t.m[5] * p.y + t.m[6] * p.z + t.m[7],
            t.m[8] * p.x + t.m[9] * p.y + t.m[10] * p.z + t.m[11]};
}

// Random rotation from a normalized quaternion.
inline std::array<double, 9> random_rotation(motseg::Rng& rng) {
    double q[4];
    double norm = 0.0;
    for (double& qi : q) {
        qi = rng.normal();
        norm += qi * qi;
    }
    norm = std::sqrt(norm);
    for (double& qi : q) qi /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
            2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

// ---------- naive network layers ----------

// Valid kernel-3 correlation, weights W[cout][cin][3].
inline std::vector<double> conv1d(const std::vector<double>& in, int cin, int len,
                                  const double* w, const double* b, int cout) {
    const int olen = len - 2;
    std::vector<double> out(static_cast<std::size_t>(cout) * olen);
    for (int o = 0; o < cout; ++o)
        for (int p = 0; p < olen; ++p) {
            double acc = b[o];
            for (int i = 0; i < cin; ++i)
                for (int q = 0; q < 3; ++q)
                    acc += in[static_cast<std::size_t>(i) * len + p + q] *
                           w[(static_cast<std::size_t>(o) * cin + i) * 3 + q];
            out[static_cast<std::size_t>(o) * olen + p] = acc;
        }
    return out;
}

// Transposed kernel-3 convolution, weights W[cin][cout][3], output len+2.
inline std::vector<double> tconv1d(const std::vector<double>& in, int cin, int len,
                                   const double* w, const double* b, int cout) {
    const int olen = len + 2;
    std::vector<double> out(static_cast<std::size_t>(cout) * olen);
    for (int o = 0; o < cout; ++o)
        for (int p = 0; p < olen; ++p) out[static_cast<std::size_t>(o) * olen + p] = b[o];
    for (int i = 0; i < cin; ++i)
        for (int s = 0; s < len; ++s)
            for (int o = 0; o < cout; ++o)
                for (int q = 0; q < 3; ++q)
                    out[static_cast<std::size_t>(o) * olen + s + q] +=
                        in[static_cast<std::size_t>(i) * len + s] *
                        w[(static_cast<std::size_t>(i) * cout + o) * 3 + q];
    return out;
}

// Fully connected, weights W[nout][nin].
inline std::vector<double> fc(const std::vector<double>& in, const double* w, const double* b,
                              int nout) {
    const auto nin = in.size();
    std::vector<double> out(static_cast<std::size_t>(nout));
    for (int j = 0; j < nout; ++j) {
        double acc = b[j];
        for (std::size_t i = 0; i < nin; ++i) acc += w[static_cast<std::size_t>(j) * nin + i] * in[i];
        out[j] = acc;
    }
    return out;
}

inline void relu(std::vector<double>& v) {
    for (double& x : v)
        if (x < 0.0) x = 0.0;
}

inline std::vector<double> encode_ref(const motseg::AeParameters& params,
                                      std::vector<double> x) {
    const motseg::AeArchitecture& a = params.arch;
    std::vector<double> h = conv1d(x, a.channels, a.window, params.block("conv1.w"),
                                   params.block("conv1.b"), a.conv_channels[0]);
    relu(h);
    h = conv1d(h, a.conv_channels[0], a.window - 2, params.block("conv2.w"),
               params.block("conv2.b"), a.conv_channels[1]);
    relu(h);
    h = conv1d(h, a.conv_channels[1], a.window - 4, params.block("conv3.w"),
               params.block("conv3.b"), a.conv_channels[2]);
    relu(h);
    h = fc(h, params.block("fc1.w"), params.block("fc1.b"), a.fc_hidden);
    relu(h);
    h = fc(h, params.block("fc2.w"), params.block("fc2.b"), a.code);
    if (a.relu_literal) relu(h);
    return h;
}

inline std::vector<double> decode_ref(const motseg::AeParameters& params,
                                      std::vector<double> code) {
    const motseg::AeArchitecture& a = params.arch;
    std::vector<double> h = fc(code, params.block("dfc1.w"), params.block("dfc1.b"), a.fc_hidden);
    relu(h);
    h = fc(h, params.block("dfc2.w"), params.block("dfc2.b"), a.flat());
    relu(h);
    h = tconv1d(h, a.conv_channels[2], a.conv_out_len(), params.block("tconv3.w"),
                params.block("tconv3.b"), a.conv_channels[1]);
    relu(h);
    h = tconv1d(h, a.conv_channels[1], a.window - 4, params.block("tconv2.w"),
                params.block("tconv2.b"), a.conv_channels[0]);
    relu(h);
    h = tconv1d(h, a.conv_channels[0], a.window - 2, params.block("tconv1.w"),
                params.block("tconv1.b"), a.channels);
    if (a.relu_literal) relu(h);
    return h;
}

// ---------- mixture densities ----------

inline double log_gauss_diag(const double* x, const double* mu, const double* var, int dim) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = x[d] - mu[d];
        acc += -0.5 * std::log(2.0 * 3.14159265358979323846 * var[d]) -
               diff * diff / (2.0 * var[d]);
    }
    return acc;
}

// log p(x) without log-sum-exp tricks; fine for the well-scaled test data.
inline double mixture_log_density(const motseg::GmmModel& m, const double* x) {
    double p = 0.0;
    for (int c = 0; c < m.k; ++c)
        p += m.weights[c] * std::exp(log_gauss_diag(x, m.means.data() + c * m.dim,
                                                    m.variances.data() + c * m.dim, m.dim));
    return std::log(p);
}

// ---------- set-algebra IoU ----------

inline double iou_flags(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && b[i]) ++inter;
        if (a[i] || b[i]) ++uni;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace oracle
