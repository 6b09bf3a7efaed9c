#include "motseg/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "motseg/detail/binary_io.hpp"
#include "motseg/error.hpp"
#include "motseg/parallel.hpp"
#include "motseg/rng.hpp"

namespace motseg {

void AeArchitecture::validate() const {
    if (channels < 1) throw ConfigError("autoencoder needs at least one input channel");
    if (window < 7)
        throw ConfigError("window must be at least 7 so three kernel-3 convolutions leave a "
                          "positive length, got " +
                          std::to_string(window));
    for (int c : conv_channels)
        if (c < 1) throw ConfigError("conv channel counts must be positive");
    if (fc_hidden < 1) throw ConfigError("fc hidden size must be positive");
    if (code < 1) throw ConfigError("code size must be positive");
}

std::array<int, 3> AeArchitecture::default_plan(int channels) {
    return channels >= 125 ? std::array<int, 3>{64, 32, 16} : std::array<int, 3>{32, 16, 16};
}

namespace {

// Block indices in layout order; keep in sync with make_layout.
enum BlockIndex {
    kConv1W, kConv1B, kConv2W, kConv2B, kConv3W, kConv3B,
    kFc1W, kFc1B, kFc2W, kFc2B,
    kDfc1W, kDfc1B, kDfc2W, kDfc2B,
    kTconv3W, kTconv3B, kTconv2W, kTconv2B, kTconv1W, kTconv1B,
    kBlockCount,
};

std::vector<AeParameters::Block> make_layout(const AeArchitecture& a) {
    const int C = a.channels;
    const auto [c1, c2, c3] = a.conv_channels;
    const int h = a.fc_hidden, e = a.code, flat = a.flat();

    std::vector<AeParameters::Block> blocks;
    std::size_t offset = 0;
    auto add = [&](const char* name, std::size_t size, int fan_in) {
        blocks.push_back({name, offset, size, fan_in});
        offset += size;
    };
    add("conv1.w", static_cast<std::size_t>(c1) * C * 3, C * 3);
    add("conv1.b", c1, 0);
    add("conv2.w", static_cast<std::size_t>(c2) * c1 * 3, c1 * 3);
    add("conv2.b", c2, 0);
    add("conv3.w", static_cast<std::size_t>(c3) * c2 * 3, c2 * 3);
    add("conv3.b", c3, 0);
    add("fc1.w", static_cast<std::size_t>(h) * flat, flat);
    add("fc1.b", h, 0);
    add("fc2.w", static_cast<std::size_t>(e) * h, h);
    add("fc2.b", e, 0);
    add("dfc1.w", static_cast<std::size_t>(h) * e, e);
    add("dfc1.b", h, 0);
    add("dfc2.w", static_cast<std::size_t>(flat) * h, h);
    add("dfc2.b", flat, 0);
    add("tconv3.w", static_cast<std::size_t>(c3) * c2 * 3, c3 * 3);
    add("tconv3.b", c2, 0);
    add("tconv2.w", static_cast<std::size_t>(c2) * c1 * 3, c2 * 3);
    add("tconv2.b", c1, 0);
    add("tconv1.w", static_cast<std::size_t>(c1) * C * 3, c1 * 3);
    add("tconv1.b", C, 0);
    return blocks;
}

}  // namespace

double* AeParameters::block(std::string_view name) {
    return values.data() + block_spec(name).offset;
}

const double* AeParameters::block(std::string_view name) const {
    return values.data() + block_spec(name).offset;
}

const AeParameters::Block& AeParameters::block_spec(std::string_view name) const {
    for (const Block& b : blocks)
        if (b.name == name) return b;
    throw std::invalid_argument("no parameter block named '" + std::string(name) + "'");
}

AeParameters init_parameters(const AeArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    AeParameters p;
    p.arch = arch;
    p.seed = seed;
    p.blocks = make_layout(arch);
    std::size_t total = p.blocks.back().offset + p.blocks.back().size;
    p.values.assign(total, 0.0);

    Rng rng(seed);
    for (const AeParameters::Block& b : p.blocks) {
        if (b.fan_in == 0) continue;  // biases stay zero
        double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
        double* w = p.values.data() + b.offset;
        for (std::size_t i = 0; i < b.size; ++i) w[i] = rng.uniform(-bound, bound);
    }
    return p;
}

AeWorkspace::AeWorkspace(const AeArchitecture& arch) {
    const auto [c1, c2, c3] = arch.conv_channels;
    const int w = arch.window;
    auto sz = [](int channels, int len) { return static_cast<std::size_t>(channels) * len; };
    a1.resize(sz(c1, w - 2));
    a2.resize(sz(c2, w - 4));
    a3.resize(sz(c3, w - 6));
    hidden.resize(arch.fc_hidden);
    code.resize(arch.code);
    dec_hidden.resize(arch.fc_hidden);
    dec_flat.resize(arch.flat());
    t3.resize(sz(c2, w - 4));
    t2.resize(sz(c1, w - 2));
    recon.resize(sz(arch.channels, w));
    g_a1.resize(a1.size());
    g_a2.resize(a2.size());
    g_a3.resize(a3.size());
    g_hidden.resize(hidden.size());
    g_code.resize(code.size());
    g_dec_hidden.resize(dec_hidden.size());
    g_dec_flat.resize(dec_flat.size());
    g_t3.resize(t3.size());
    g_t2.resize(t2.size());
    g_recon.resize(recon.size());
}

namespace {

void relu_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

// Zero the gradient wherever the stored post-activation is zero.
void relu_mask(double* g, const double* act, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (act[i] <= 0.0) g[i] = 0.0;
}

// Valid convolution, kernel 3: in [cin][len] -> out [cout][len-2].
// W laid out [cout][cin][3].
void conv_forward(const double* W, const double* b, const double* in, int cin, int len,
                  double* out, int cout) {
    const int olen = len - 2;
    for (int o = 0; o < cout; ++o) {
        double* orow = out + static_cast<std::size_t>(o) * olen;
        for (int p = 0; p < olen; ++p) orow[p] = b[o];
        const double* wbase = W + static_cast<std::size_t>(o) * cin * 3;
        for (int i = 0; i < cin; ++i) {
            const double* irow = in + static_cast<std::size_t>(i) * len;
            const double w0 = wbase[i * 3], w1 = wbase[i * 3 + 1], w2 = wbase[i * 3 + 2];
            for (int p = 0; p < olen; ++p)
                orow[p] += irow[p] * w0 + irow[p + 1] * w1 + irow[p + 2] * w2;
        }
    }
}

// Gradients of conv_forward. dOut [cout][len-2] is already activation-masked.
// dIn may be null (first layer); it must be zeroed by the caller otherwise.
void conv_backward(const double* W, const double* in, const double* dOut, int cin, int len,
                   int cout, double* dW, double* dB, double* dIn) {
    const int olen = len - 2;
    for (int o = 0; o < cout; ++o) {
        const double* grow = dOut + static_cast<std::size_t>(o) * olen;
        double bsum = 0.0;
        for (int p = 0; p < olen; ++p) bsum += grow[p];
        dB[o] += bsum;
        const std::size_t wbase = static_cast<std::size_t>(o) * cin * 3;
        for (int i = 0; i < cin; ++i) {
            const double* irow = in + static_cast<std::size_t>(i) * len;
            double d0 = 0.0, d1 = 0.0, d2 = 0.0;
            for (int p = 0; p < olen; ++p) {
                const double g = grow[p];
                d0 += g * irow[p];
                d1 += g * irow[p + 1];
                d2 += g * irow[p + 2];
            }
            dW[wbase + i * 3] += d0;
            dW[wbase + i * 3 + 1] += d1;
            dW[wbase + i * 3 + 2] += d2;
            if (dIn) {
                double* drow = dIn + static_cast<std::size_t>(i) * len;
                const double w0 = W[wbase + i * 3], w1 = W[wbase + i * 3 + 1],
                             w2 = W[wbase + i * 3 + 2];
                for (int p = 0; p < olen; ++p) {
                    const double g = grow[p];
                    drow[p] += g * w0;
                    drow[p + 1] += g * w1;
                    drow[p + 2] += g * w2;
                }
            }
        }
    }
}

// Transposed convolution, stride 1, kernel 3: in [cin][len] -> out
// [cout][len+2]. W laid out [cin][cout][3].
void tconv_forward(const double* W, const double* b, const double* in, int cin, int len,
                   double* out, int cout) {
    const int olen = len + 2;
    for (int o = 0; o < cout; ++o) {
        double* orow = out + static_cast<std::size_t>(o) * olen;
        for (int p = 0; p < olen; ++p) orow[p] = b[o];
    }
    for (int i = 0; i < cin; ++i) {
        const double* irow = in + static_cast<std::size_t>(i) * len;
        for (int o = 0; o < cout; ++o) {
            const double* w = W + (static_cast<std::size_t>(i) * cout + o) * 3;
            double* orow = out + static_cast<std::size_t>(o) * olen;
            for (int s = 0; s < len; ++s) {
                const double v = irow[s];
                orow[s] += v * w[0];
                orow[s + 1] += v * w[1];
                orow[s + 2] += v * w[2];
            }
        }
    }
}

// Gradients of tconv_forward; dIn must be zeroed by the caller.
void tconv_backward(const double* W, const double* in, const double* dOut, int cin, int len,
                    int cout, double* dW, double* dB, double* dIn) {
    const int olen = len + 2;
    for (int o = 0; o < cout; ++o) {
        const double* grow = dOut + static_cast<std::size_t>(o) * olen;
        double bsum = 0.0;
        for (int p = 0; p < olen; ++p) bsum += grow[p];
        dB[o] += bsum;
    }
    for (int i = 0; i < cin; ++i) {
        const double* irow = in + static_cast<std::size_t>(i) * len;
        double* drow = dIn + static_cast<std::size_t>(i) * len;
        for (int o = 0; o < cout; ++o) {
            const std::size_t wpos = (static_cast<std::size_t>(i) * cout + o) * 3;
            const double* grow = dOut + static_cast<std::size_t>(o) * olen;
            const double w0 = W[wpos], w1 = W[wpos + 1], w2 = W[wpos + 2];
            double d0 = 0.0, d1 = 0.0, d2 = 0.0;
            for (int s = 0; s < len; ++s) {
                const double v = irow[s];
                d0 += v * grow[s];
                d1 += v * grow[s + 1];
                d2 += v * grow[s + 2];
                drow[s] += grow[s] * w0 + grow[s + 1] * w1 + grow[s + 2] * w2;
            }
            dW[wpos] += d0;
            dW[wpos + 1] += d1;
            dW[wpos + 2] += d2;
        }
    }
}

// W laid out [nout][nin].
void fc_forward(const double* W, const double* b, const double* in, int nin, double* out,
                int nout) {
    for (int j = 0; j < nout; ++j) {
        const double* wrow = W + static_cast<std::size_t>(j) * nin;
        double acc = b[j];
        for (int i = 0; i < nin; ++i) acc += wrow[i] * in[i];
        out[j] = acc;
    }
}

// dIn may be null; it must be zeroed by the caller otherwise.
void fc_backward(const double* W, const double* in, const double* dOut, int nin, int nout,
                 double* dW, double* dB, double* dIn) {
    for (int j = 0; j < nout; ++j) {
        const double g = dOut[j];
        dB[j] += g;
        double* dwrow = dW + static_cast<std::size_t>(j) * nin;
        for (int i = 0; i < nin; ++i) dwrow[i] += g * in[i];
        if (dIn) {
            const double* wrow = W + static_cast<std::size_t>(j) * nin;
            for (int i = 0; i < nin; ++i) dIn[i] += g * wrow[i];
        }
    }
}

struct BlockPtrs {
    const double* p[kBlockCount];

    BlockPtrs(const AeParameters& params) {
        if (params.blocks.size() != kBlockCount)
            throw std::invalid_argument("unexpected parameter layout");
        for (int i = 0; i < kBlockCount; ++i) p[i] = params.values.data() + params.blocks[i].offset;
    }
};

void encode_impl(const AeParameters& params, const BlockPtrs& B, const double* x, double* code_out,
                 AeWorkspace& ws) {
    const AeArchitecture& a = params.arch;
    const auto [c1, c2, c3] = a.conv_channels;
    conv_forward(B.p[kConv1W], B.p[kConv1B], x, a.channels, a.window, ws.a1.data(), c1);
    relu_inplace(ws.a1.data(), ws.a1.size());
    conv_forward(B.p[kConv2W], B.p[kConv2B], ws.a1.data(), c1, a.window - 2, ws.a2.data(), c2);
    relu_inplace(ws.a2.data(), ws.a2.size());
    conv_forward(B.p[kConv3W], B.p[kConv3B], ws.a2.data(), c2, a.window - 4, ws.a3.data(), c3);
    relu_inplace(ws.a3.data(), ws.a3.size());
    fc_forward(B.p[kFc1W], B.p[kFc1B], ws.a3.data(), a.flat(), ws.hidden.data(), a.fc_hidden);
    relu_inplace(ws.hidden.data(), ws.hidden.size());
    fc_forward(B.p[kFc2W], B.p[kFc2B], ws.hidden.data(), a.fc_hidden, code_out, a.code);
    if (a.relu_literal) relu_inplace(code_out, static_cast<std::size_t>(a.code));
}

void decode_impl(const AeParameters& params, const BlockPtrs& B, const double* code,
                 double* recon_out, AeWorkspace& ws) {
    const AeArchitecture& a = params.arch;
    const auto [c1, c2, c3] = a.conv_channels;
    fc_forward(B.p[kDfc1W], B.p[kDfc1B], code, a.code, ws.dec_hidden.data(), a.fc_hidden);
    relu_inplace(ws.dec_hidden.data(), ws.dec_hidden.size());
    fc_forward(B.p[kDfc2W], B.p[kDfc2B], ws.dec_hidden.data(), a.fc_hidden, ws.dec_flat.data(),
               a.flat());
    relu_inplace(ws.dec_flat.data(), ws.dec_flat.size());
    tconv_forward(B.p[kTconv3W], B.p[kTconv3B], ws.dec_flat.data(), c3, a.window - 6,
                  ws.t3.data(), c2);
    relu_inplace(ws.t3.data(), ws.t3.size());
    tconv_forward(B.p[kTconv2W], B.p[kTconv2B], ws.t3.data(), c2, a.window - 4, ws.t2.data(), c1);
    relu_inplace(ws.t2.data(), ws.t2.size());
    tconv_forward(B.p[kTconv1W], B.p[kTconv1B], ws.t2.data(), c1, a.window - 2, recon_out,
                  a.channels);
    if (a.relu_literal)
        relu_inplace(recon_out, static_cast<std::size_t>(a.channels) * a.window);
}

}  // namespace

void encode(const AeParameters& params, const double* x, double* code, AeWorkspace& ws) {
    BlockPtrs B(params);
    encode_impl(params, B, x, code, ws);
}

std::vector<double> encode(const AeParameters& params, const std::vector<double>& x) {
    const auto expected =
        static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    if (x.size() != expected)
        throw std::invalid_argument("encode input has " + std::to_string(x.size()) +
                                    " values, architecture expects " + std::to_string(expected));
    AeWorkspace ws(params.arch);
    std::vector<double> code(static_cast<std::size_t>(params.arch.code));
    encode(params, x.data(), code.data(), ws);
    return code;
}

void decode(const AeParameters& params, const double* code, double* recon, AeWorkspace& ws) {
    BlockPtrs B(params);
    decode_impl(params, B, code, recon, ws);
}

std::vector<double> decode(const AeParameters& params, const std::vector<double>& code) {
    if (code.size() != static_cast<std::size_t>(params.arch.code))
        throw std::invalid_argument("decode input has " + std::to_string(code.size()) +
                                    " values, architecture expects " +
                                    std::to_string(params.arch.code));
    AeWorkspace ws(params.arch);
    std::vector<double> recon(static_cast<std::size_t>(params.arch.channels) *
                              params.arch.window);
    decode(params, code.data(), recon.data(), ws);
    return recon;
}

double mse_loss(const double* x, const double* recon, std::size_t n) {
    if (n == 0) throw std::invalid_argument("mse over zero elements");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = recon[i] - x[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

Embedding encode_feature(const AeParameters& params, const MotsFeature& feature,
                         AeWorkspace& ws) {
    if (feature.rows.size() != static_cast<std::size_t>(params.arch.channels))
        throw std::invalid_argument("feature has " + std::to_string(feature.rows.size()) +
                                    " channels, architecture expects " +
                                    std::to_string(params.arch.channels));
    std::vector<double> x = unpack_feature(feature, params.arch.window);
    Embedding em;
    em.coord = feature.center;
    em.frame_index = feature.frame_index;
    em.code.resize(static_cast<std::size_t>(params.arch.code));
    encode(params, x.data(), em.code.data(), ws);
    return em;
}

void encode_batch(const AeParameters& params, const double* xs, std::size_t count, double* codes,
                  int threads) {
    const std::size_t dim = static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    const std::size_t e = static_cast<std::size_t>(params.arch.code);
    BlockPtrs B(params);
    parallel_chunks(count, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        AeWorkspace ws(params.arch);
        for (std::size_t i = begin; i < end; ++i)
            encode_impl(params, B, xs + i * dim, codes + i * e, ws);
    });
}

std::vector<double> encode_mots_batch(const AeParameters& params, const MotsBatch& batch,
                                      int threads) {
    if (batch.channels != params.arch.channels || batch.window != params.arch.window)
        throw std::invalid_argument("feature batch shape " + std::to_string(batch.channels) +
                                    "x" + std::to_string(batch.window) +
                                    " does not match architecture " +
                                    std::to_string(params.arch.channels) + "x" +
                                    std::to_string(params.arch.window));
    const std::size_t dim = static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    const std::size_t e = static_cast<std::size_t>(params.arch.code);
    std::vector<double> codes(batch.size() * e);
    BlockPtrs B(params);
    parallel_chunks(batch.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        AeWorkspace ws(params.arch);
        std::vector<double> x(dim);
        for (std::size_t i = begin; i < end; ++i) {
            unpack_feature(batch.features[i], params.arch.window, x.data());
            encode_impl(params, B, x.data(), codes.data() + i * e, ws);
        }
    });
    return codes;
}

namespace {

double sample_backward(const AeParameters& params, const BlockPtrs& B, const double* x,
                       double* grad, AeWorkspace& ws) {
    const AeArchitecture& a = params.arch;
    const auto [c1, c2, c3] = a.conv_channels;
    const int w = a.window, C = a.channels;
    const std::size_t n = static_cast<std::size_t>(C) * w;

    encode_impl(params, B, x, ws.code.data(), ws);
    decode_impl(params, B, ws.code.data(), ws.recon.data(), ws);

    const double loss = mse_loss(x, ws.recon.data(), n);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ws.g_recon[i] = scale * (ws.recon[i] - x[i]);
    if (a.relu_literal) relu_mask(ws.g_recon.data(), ws.recon.data(), n);

    auto g = [&](BlockIndex bi) { return grad + params.blocks[bi].offset; };
    auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };

    zero(ws.g_t2);
    tconv_backward(B.p[kTconv1W], ws.t2.data(), ws.g_recon.data(), c1, w - 2, C, g(kTconv1W),
                   g(kTconv1B), ws.g_t2.data());
    relu_mask(ws.g_t2.data(), ws.t2.data(), ws.t2.size());

    zero(ws.g_t3);
    tconv_backward(B.p[kTconv2W], ws.t3.data(), ws.g_t2.data(), c2, w - 4, c1, g(kTconv2W),
                   g(kTconv2B), ws.g_t3.data());
    relu_mask(ws.g_t3.data(), ws.t3.data(), ws.t3.size());

    zero(ws.g_dec_flat);
    tconv_backward(B.p[kTconv3W], ws.dec_flat.data(), ws.g_t3.data(), c3, w - 6, c2, g(kTconv3W),
                   g(kTconv3B), ws.g_dec_flat.data());
    relu_mask(ws.g_dec_flat.data(), ws.dec_flat.data(), ws.dec_flat.size());

    zero(ws.g_dec_hidden);
    fc_backward(B.p[kDfc2W], ws.dec_hidden.data(), ws.g_dec_flat.data(), a.fc_hidden, a.flat(),
                g(kDfc2W), g(kDfc2B), ws.g_dec_hidden.data());
    relu_mask(ws.g_dec_hidden.data(), ws.dec_hidden.data(), ws.dec_hidden.size());

    zero(ws.g_code);
    fc_backward(B.p[kDfc1W], ws.code.data(), ws.g_dec_hidden.data(), a.code, a.fc_hidden,
                g(kDfc1W), g(kDfc1B), ws.g_code.data());
    if (a.relu_literal) relu_mask(ws.g_code.data(), ws.code.data(), ws.code.size());

    zero(ws.g_hidden);
    fc_backward(B.p[kFc2W], ws.hidden.data(), ws.g_code.data(), a.fc_hidden, a.code, g(kFc2W),
                g(kFc2B), ws.g_hidden.data());
    relu_mask(ws.g_hidden.data(), ws.hidden.data(), ws.hidden.size());

    zero(ws.g_a3);
    fc_backward(B.p[kFc1W], ws.a3.data(), ws.g_hidden.data(), a.flat(), a.fc_hidden, g(kFc1W),
                g(kFc1B), ws.g_a3.data());
    relu_mask(ws.g_a3.data(), ws.a3.data(), ws.a3.size());

    zero(ws.g_a2);
    conv_backward(B.p[kConv3W], ws.a2.data(), ws.g_a3.data(), c2, w - 4, c3, g(kConv3W),
                  g(kConv3B), ws.g_a2.data());
    relu_mask(ws.g_a2.data(), ws.a2.data(), ws.a2.size());

    zero(ws.g_a1);
    conv_backward(B.p[kConv2W], ws.a1.data(), ws.g_a2.data(), c1, w - 2, c2, g(kConv2W),
                  g(kConv2B), ws.g_a1.data());
    relu_mask(ws.g_a1.data(), ws.a1.data(), ws.a1.size());

    conv_backward(B.p[kConv1W], x, ws.g_a1.data(), C, w, c1, g(kConv1W), g(kConv1B), nullptr);
    return loss;
}

}  // namespace

double sample_loss_and_gradient(const AeParameters& params, const double* x, double* grad,
                                AeWorkspace& ws) {
    BlockPtrs B(params);
    return sample_backward(params, B, x, grad, ws);
}

namespace {

// Mean gradient over `count` contiguous samples; deterministic chunk-ordered
// reduction.
GradientResult batch_gradient(const AeParameters& params, const double* xs, std::size_t count,
                              int threads) {
    const std::size_t dim = static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    const int workers = resolve_threads(threads);
    const std::size_t nchunks =
        std::min<std::size_t>(static_cast<std::size_t>(workers), count ? count : 1);
    std::vector<std::vector<double>> partial(nchunks,
                                             std::vector<double>(params.size(), 0.0));
    std::vector<double> losses(nchunks, 0.0);
    BlockPtrs B(params);

    parallel_chunks(count, static_cast<int>(nchunks),
                    [&](std::size_t begin, std::size_t end, std::size_t chunk) {
                        AeWorkspace ws(params.arch);
                        for (std::size_t i = begin; i < end; ++i)
                            losses[chunk] +=
                                sample_backward(params, B, xs + i * dim, partial[chunk].data(), ws);
                    });

    GradientResult out;
    out.grad.assign(params.size(), 0.0);
    double loss = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) {
        const std::vector<double>& g = partial[c];
        for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += g[i];
        loss += losses[c];
    }
    const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
    for (double& v : out.grad) v *= inv;
    out.mean_loss = loss * inv;
    return out;
}

}  // namespace

GradientResult gradients(const AeParameters& params, const double* xs, std::size_t count,
                         int threads) {
    if (count == 0) throw std::invalid_argument("gradient over an empty batch");
    return batch_gradient(params, xs, count, threads);
}

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != grad.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam state, parameters and gradient sizes differ");
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / corr1;
        const double vhat = state.v[i] / corr2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

namespace {

// Name of the first block containing a non-finite value, or empty.
std::string first_bad_block(const AeParameters& params, const std::vector<double>& values) {
    for (const AeParameters::Block& b : params.blocks)
        for (std::size_t i = 0; i < b.size; ++i)
            if (!std::isfinite(values[b.offset + i])) return b.name;
    return {};
}

}  // namespace

TrainResult train(AeParameters& params, const SampleGather& gather, std::size_t count,
                  const TrainHyper& hyper, std::ostream* log) {
    const std::size_t dim = static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    if (count == 0) throw std::invalid_argument("empty training set");
    if (hyper.batch < 1) throw ConfigError("batch size must be positive");
    if (hyper.epochs < 1) throw ConfigError("epoch count must be positive");
    if (!(hyper.lr > 0.0)) throw ConfigError("learning rate must be positive");

    AdamState adam(params.size(), hyper.lr);
    std::vector<std::size_t> perm(count);
    for (std::size_t i = 0; i < count; ++i) perm[i] = i;
    std::vector<double> scratch(static_cast<std::size_t>(hyper.batch) * dim);

    TrainResult result;
    double window_loss = 0.0;
    int window_steps = 0;
    auto flush_log = [&]() {
        if (window_steps == 0) return;
        const double mean = window_loss / window_steps;
        result.loss_curve.emplace_back(result.steps, mean);
        if (log) *log << result.steps << ' ' << std::setprecision(10) << mean << '\n';
        window_loss = 0.0;
        window_steps = 0;
    };

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = Rng::fork(hyper.seed, static_cast<std::uint64_t>(epoch));
        // Fisher-Yates from the epoch stream
        for (std::size_t i = count; i > 1; --i) {
            std::uint64_t j = rng.below(i);
            std::swap(perm[i - 1], perm[j]);
        }
        for (std::size_t start = 0; start < count; start += hyper.batch) {
            const std::size_t bsize =
                std::min<std::size_t>(hyper.batch, count - start);
            for (std::size_t i = 0; i < bsize; ++i)
                gather(perm[start + i], scratch.data() + i * dim);
            GradientResult g = batch_gradient(params, scratch.data(), bsize, hyper.threads);
            ++result.steps;
            if (!std::isfinite(g.mean_loss))
                throw NumericError("non-finite loss at step " + std::to_string(result.steps));
            if (std::string bad = first_bad_block(params, g.grad); !bad.empty())
                throw NumericError("non-finite gradient in " + bad + " at step " +
                                   std::to_string(result.steps));
            adam_step(adam, params.values, g.grad);
            if (std::string bad = first_bad_block(params, params.values); !bad.empty())
                throw NumericError("non-finite parameter in " + bad + " at step " +
                                   std::to_string(result.steps));
            window_loss += g.mean_loss;
            ++window_steps;
            result.final_loss = g.mean_loss;
            if (result.steps % hyper.log_interval == 0) flush_log();
        }
    }
    flush_log();
    return result;
}

TrainResult train(AeParameters& params, const std::vector<double>& dataset, std::size_t count,
                  const TrainHyper& hyper, std::ostream* log) {
    const std::size_t dim = static_cast<std::size_t>(params.arch.channels) * params.arch.window;
    if (count != 0 && dataset.size() != count * dim)
        throw std::invalid_argument("dataset holds " + std::to_string(dataset.size()) +
                                    " values, expected " + std::to_string(count * dim));
    return train(params,
                 [&dataset, dim](std::size_t index, double* out) {
                     std::copy_n(dataset.data() + index * dim, dim, out);
                 },
                 count, hyper, log);
}

void write_loss_curve(std::ostream& out,
                      const std::vector<std::pair<std::int64_t, double>>& curve) {
    for (const auto& [step, loss] : curve)
        out << step << ' ' << std::setprecision(10) << loss << '\n';
}

namespace {

constexpr char kModelMagic[4] = {'M', 'A', 'E', '1'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const std::string& path, const AeParameters& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    using detail::write_le;
    detail::write_magic(out, kModelMagic);
    write_le<std::uint32_t>(out, kModelVersion);
    const AeArchitecture& a = params.arch;
    for (int v : {a.channels, a.window, a.conv_channels[0], a.conv_channels[1],
                  a.conv_channels[2], a.fc_hidden, a.code})
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    write_le<std::uint32_t>(out, a.relu_literal ? 1u : 0u);
    write_le<std::uint64_t>(out, params.seed);
    for (const AeParameters::Block& b : params.blocks)
        detail::write_f32_block(out, params.values.data() + b.offset, b.size);
    if (!out) throw IoError("failed writing model to " + path);
}

AeParameters load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    using detail::read_le;
    detail::expect_magic(in, kModelMagic, "model file");
    auto version = read_le<std::uint32_t>(in);
    if (version != kModelVersion)
        throw DataError("unsupported model version " + std::to_string(version));

    AeArchitecture a;
    a.channels = static_cast<int>(read_le<std::uint32_t>(in));
    a.window = static_cast<int>(read_le<std::uint32_t>(in));
    for (int i = 0; i < 3; ++i) a.conv_channels[i] = static_cast<int>(read_le<std::uint32_t>(in));
    a.fc_hidden = static_cast<int>(read_le<std::uint32_t>(in));
    a.code = static_cast<int>(read_le<std::uint32_t>(in));
    a.relu_literal = read_le<std::uint32_t>(in) != 0;
    auto seed = read_le<std::uint64_t>(in);
    a.validate();

    AeParameters p;
    p.arch = a;
    p.seed = seed;
    p.blocks = make_layout(a);
    p.values.assign(p.blocks.back().offset + p.blocks.back().size, 0.0);
    for (const AeParameters::Block& b : p.blocks)
        detail::read_f32_block(in, p.values.data() + b.offset, b.size);
    if (in.peek() != std::char_traits<char>::eof())
        throw DataError("trailing bytes after model parameters in " + path);
    return p;
}

}  // namespace motseg
