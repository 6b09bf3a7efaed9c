#include "motseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "motseg/detail/binary_io.hpp"
#include "motseg/error.hpp"
#include "motseg/parallel.hpp"
#include "motseg/rng.hpp"

namespace motseg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Per-component log-density evaluation constants.
struct LogDensity {
    std::vector<double> log_const;  // k: log pi - 0.5 sum log(2 pi var)
    std::vector<double> inv_var;    // k x dim

    explicit LogDensity(const GmmModel& m)
        : log_const(static_cast<std::size_t>(m.k)),
          inv_var(static_cast<std::size_t>(m.k) * m.dim) {
        for (int c = 0; c < m.k; ++c) {
            double acc = std::log(m.weights[static_cast<std::size_t>(c)]);
            for (int d = 0; d < m.dim; ++d) {
                const double v = m.variances[static_cast<std::size_t>(c) * m.dim + d];
                acc -= 0.5 * (kLog2Pi + std::log(v));
                inv_var[static_cast<std::size_t>(c) * m.dim + d] = 1.0 / v;
            }
            log_const[static_cast<std::size_t>(c)] = acc;
        }
    }

    double operator()(const GmmModel& m, int c, const double* x) const {
        const double* mu = m.means.data() + static_cast<std::size_t>(c) * m.dim;
        const double* iv = inv_var.data() + static_cast<std::size_t>(c) * m.dim;
        double q = 0.0;
        for (int d = 0; d < m.dim; ++d) {
            const double diff = x[d] - mu[d];
            q += diff * diff * iv[d];
        }
        return log_const[static_cast<std::size_t>(c)] - 0.5 * q;
    }
};

double logsumexp(const double* v, int n) {
    double m = v[0];
    for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(v[i] - m);
    return m + std::log(acc);
}

}  // namespace

void GmmModel::validate(double var_floor) const {
    if (!fitted) throw std::invalid_argument("model is not fitted");
    if (k < 1 || dim < 1) throw std::invalid_argument("model has empty shape");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw NumericError("negative mixture weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw NumericError("mixture weights sum to " + std::to_string(sum));
    for (double v : variances)
        if (!(v >= var_floor)) throw NumericError("variance below floor");
}

std::vector<std::size_t> kmeanspp_centers(const double* samples, std::size_t count, int dim,
                                          int k, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("no samples to choose centers from");
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (static_cast<std::size_t>(k) > count)
        throw std::invalid_argument("k=" + std::to_string(k) + " exceeds sample count " +
                                    std::to_string(count));
    Rng rng(seed);
    std::vector<std::size_t> centers;
    centers.reserve(static_cast<std::size_t>(k));
    centers.push_back(static_cast<std::size_t>(rng.below(count)));

    auto dist2 = [&](std::size_t a, std::size_t b) {
        const double* pa = samples + a * static_cast<std::size_t>(dim);
        const double* pb = samples + b * static_cast<std::size_t>(dim);
        double acc = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double diff = pa[d] - pb[d];
            acc += diff * diff;
        }
        return acc;
    };

    std::vector<double> d2(count);
    for (std::size_t i = 0; i < count; ++i) d2[i] = dist2(i, centers[0]);

    while (centers.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (double v : d2) total += v;
        if (!(total > 0.0))
            throw std::invalid_argument("k=" + std::to_string(k) +
                                        " exceeds the number of distinct samples");
        // CDF inversion on the squared distances; scale-invariant because the
        // draw is a fraction of the total mass.
        const double u = rng.uniform() * total;
        double cum = 0.0;
        std::size_t chosen = count - 1;
        for (std::size_t i = 0; i < count; ++i) {
            cum += d2[i];
            if (cum > u) {
                chosen = i;
                break;
            }
        }
        centers.push_back(chosen);
        for (std::size_t i = 0; i < count; ++i) d2[i] = std::min(d2[i], dist2(i, chosen));
    }
    return centers;
}

namespace {

struct EStepAccum {
    double ll = 0.0;
    std::vector<double> nk;       // k
    std::vector<double> sum_x;    // k x dim
    std::vector<double> sum_xx;   // k x dim

    EStepAccum(int k, int dim)
        : nk(static_cast<std::size_t>(k), 0.0),
          sum_x(static_cast<std::size_t>(k) * dim, 0.0),
          sum_xx(static_cast<std::size_t>(k) * dim, 0.0) {}
};

// One EM iteration; returns the mean log-likelihood of the model *before*
// the parameter update, and overwrites the model with the M-step result.
double em_iteration(GmmModel& model, const double* samples, std::size_t count,
                    const GmmOptions& opts, std::vector<int>* degenerate) {
    const int k = model.k, dim = model.dim;
    const LogDensity density(model);
    const int workers = resolve_threads(opts.threads);
    const std::size_t nchunks = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    std::vector<EStepAccum> partial(nchunks, EStepAccum(k, dim));

    parallel_chunks(count, static_cast<int>(nchunks),
                    [&](std::size_t begin, std::size_t end, std::size_t chunk) {
                        EStepAccum& acc = partial[chunk];
                        std::vector<double> logp(static_cast<std::size_t>(k));
                        for (std::size_t i = begin; i < end; ++i) {
                            const double* x = samples + i * static_cast<std::size_t>(dim);
                            for (int c = 0; c < k; ++c) logp[c] = density(model, c, x);
                            const double lse = logsumexp(logp.data(), k);
                            acc.ll += lse;
                            for (int c = 0; c < k; ++c) {
                                const double r = std::exp(logp[c] - lse);
                                acc.nk[c] += r;
                                double* sx = acc.sum_x.data() + static_cast<std::size_t>(c) * dim;
                                double* sxx =
                                    acc.sum_xx.data() + static_cast<std::size_t>(c) * dim;
                                for (int d = 0; d < dim; ++d) {
                                    sx[d] += r * x[d];
                                    sxx[d] += r * x[d] * x[d];
                                }
                            }
                        }
                    });

    EStepAccum total(k, dim);
    for (const EStepAccum& acc : partial) {
        total.ll += acc.ll;
        for (int c = 0; c < k; ++c) total.nk[c] += acc.nk[c];
        for (std::size_t i = 0; i < total.sum_x.size(); ++i) {
            total.sum_x[i] += acc.sum_x[i];
            total.sum_xx[i] += acc.sum_xx[i];
        }
    }

    for (int c = 0; c < k; ++c) {
        if (total.nk[c] < 1e-10) {
            if (degenerate) degenerate->push_back(c);
            continue;  // leave the component for the caller to re-seed
        }
        const double inv = 1.0 / total.nk[c];
        model.weights[c] = total.nk[c] / static_cast<double>(count);
        double* mu = model.means.data() + static_cast<std::size_t>(c) * dim;
        double* var = model.variances.data() + static_cast<std::size_t>(c) * dim;
        for (int d = 0; d < dim; ++d) {
            const std::size_t at = static_cast<std::size_t>(c) * dim + d;
            mu[d] = total.sum_x[at] * inv;
            var[d] = std::max(total.sum_xx[at] * inv - mu[d] * mu[d], opts.var_floor);
        }
    }
    // weights can drift off the simplex when a component was skipped
    double wsum = 0.0;
    for (double w : model.weights) wsum += w;
    for (double& w : model.weights) w /= wsum;

    return total.ll / static_cast<double>(count);
}

// Index of the sample the current model explains worst.
std::size_t worst_sample(const GmmModel& model, const double* samples, std::size_t count) {
    const LogDensity density(model);
    std::vector<double> logp(static_cast<std::size_t>(model.k));
    double worst = std::numeric_limits<double>::infinity();
    std::size_t at = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const double* x = samples + i * static_cast<std::size_t>(model.dim);
        for (int c = 0; c < model.k; ++c) logp[c] = density(model, c, x);
        const double lse = logsumexp(logp.data(), model.k);
        if (lse < worst) {
            worst = lse;
            at = i;
        }
    }
    return at;
}

GmmFitResult run_em(GmmModel model, const double* samples, std::size_t count,
                    const GmmOptions& opts, std::ostream* log) {
    GmmFitResult result;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        std::vector<int> degenerate;
        const double ll = em_iteration(model, samples, count, opts, &degenerate);
        result.ll_trace.push_back(ll);
        if (!std::isfinite(ll))
            throw NumericError("non-finite log-likelihood at EM iteration " +
                               std::to_string(iter));
        for (int c : degenerate) {
            const std::size_t src = worst_sample(model, samples, count);
            const double* x = samples + src * static_cast<std::size_t>(model.dim);
            double* mu = model.means.data() + static_cast<std::size_t>(c) * model.dim;
            double* var = model.variances.data() + static_cast<std::size_t>(c) * model.dim;
            for (int d = 0; d < model.dim; ++d) {
                mu[d] = x[d];
                var[d] = 1.0;
            }
            model.weights[c] = 1.0 / static_cast<double>(model.k);
            double wsum = 0.0;
            for (double w : model.weights) wsum += w;
            for (double& w : model.weights) w /= wsum;
            ++result.reseeds;
            if (log)
                *log << "re-seeded degenerate component " << c << " at iteration " << iter
                     << " from sample " << src << '\n';
        }
        if (degenerate.empty() && ll - prev_ll < opts.tol && iter > 0) break;
        prev_ll = ll;
    }
    model.fitted = true;
    result.model = std::move(model);
    return result;
}

GmmModel initial_model(const double* samples, std::size_t count, int dim,
                       const std::vector<double>& init_means, int k, double var_floor) {
    GmmModel m;
    m.k = k;
    m.dim = dim;
    m.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
    m.means = init_means;
    // start every component at the data's own spread
    std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
    std::vector<double> var(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < count; ++i)
        for (int d = 0; d < dim; ++d) mean[d] += samples[i * dim + d];
    for (int d = 0; d < dim; ++d) mean[d] /= static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i)
        for (int d = 0; d < dim; ++d) {
            const double diff = samples[i * dim + d] - mean[d];
            var[d] += diff * diff;
        }
    for (int d = 0; d < dim; ++d)
        var[d] = std::max(var[d] / static_cast<double>(count), var_floor);
    m.variances.resize(static_cast<std::size_t>(k) * dim);
    for (int c = 0; c < k; ++c)
        std::copy(var.begin(), var.end(), m.variances.begin() + static_cast<std::size_t>(c) * dim);
    return m;
}

// Hard-assignment refinement of the k-means++ seeds. Soft EM recovers badly
// when two seeds land in the same mode; a few Lloyd rounds fix that before
// the mixture ever sees the data.
void lloyd_refine(const double* samples, std::size_t count, int dim, std::vector<double>& means,
                  int k, Rng& rng, int iterations) {
    const std::size_t dims = static_cast<std::size_t>(dim);
    std::vector<double> sums(means.size());
    std::vector<std::size_t> members(static_cast<std::size_t>(k));
    std::vector<int> owner(count, -1);
    for (int it = 0; it < iterations; ++it) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(members.begin(), members.end(), 0);
        bool changed = false;
        for (std::size_t i = 0; i < count; ++i) {
            const double* x = samples + i * dims;
            int best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double* mu = means.data() + static_cast<std::size_t>(c) * dims;
                double d2 = 0.0;
                for (int d = 0; d < dim; ++d) {
                    const double diff = x[d] - mu[d];
                    d2 += diff * diff;
                }
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            if (owner[i] != best) changed = true;
            owner[i] = best;
            ++members[static_cast<std::size_t>(best)];
            double* acc = sums.data() + static_cast<std::size_t>(best) * dims;
            for (int d = 0; d < dim; ++d) acc[d] += x[d];
        }
        for (int c = 0; c < k; ++c) {
            double* mu = means.data() + static_cast<std::size_t>(c) * dims;
            if (members[static_cast<std::size_t>(c)] == 0) {
                std::copy_n(samples + rng.below(count) * dims, dims, mu);
                changed = true;
                continue;
            }
            const double inv = 1.0 / static_cast<double>(members[static_cast<std::size_t>(c)]);
            const double* acc = sums.data() + static_cast<std::size_t>(c) * dims;
            for (int d = 0; d < dim; ++d) mu[d] = acc[d] * inv;
        }
        if (!changed) break;
    }
}

}  // namespace

GmmFitResult fit_gmm(const double* samples, std::size_t count, int dim, int k,
                     std::uint64_t seed, const GmmOptions& opts, std::ostream* log) {
    if (count == 0) throw std::invalid_argument("cannot fit a mixture to no samples");
    if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
    std::vector<std::size_t> centers = kmeanspp_centers(samples, count, dim, k, seed);
    std::vector<double> init_means(static_cast<std::size_t>(k) * dim);
    for (int c = 0; c < k; ++c)
        std::copy_n(samples + centers[static_cast<std::size_t>(c)] * dim, dim,
                    init_means.begin() + static_cast<std::size_t>(c) * dim);
    Rng rng = Rng::fork(seed, 1);
    lloyd_refine(samples, count, dim, init_means, k, rng, 10);
    GmmModel m = initial_model(samples, count, dim, init_means, k, opts.var_floor);
    m.seed = seed;
    return run_em(std::move(m), samples, count, opts, log);
}

GmmFitResult fit_gmm_from_means(const double* samples, std::size_t count, int dim,
                                const std::vector<double>& init_means, int k,
                                const GmmOptions& opts, std::ostream* log) {
    if (count == 0) throw std::invalid_argument("cannot fit a mixture to no samples");
    if (init_means.size() != static_cast<std::size_t>(k) * dim)
        throw std::invalid_argument("initial means shape mismatch");
    GmmModel m = initial_model(samples, count, dim, init_means, k, opts.var_floor);
    return run_em(std::move(m), samples, count, opts, log);
}

double mean_log_likelihood(const GmmModel& model, const double* samples, std::size_t count,
                           int threads) {
    if (count == 0) throw std::invalid_argument("no samples");
    const LogDensity density(model);
    const int workers = resolve_threads(threads);
    const std::size_t nchunks = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    std::vector<double> partial(nchunks, 0.0);
    parallel_chunks(count, static_cast<int>(nchunks),
                    [&](std::size_t begin, std::size_t end, std::size_t chunk) {
                        std::vector<double> logp(static_cast<std::size_t>(model.k));
                        for (std::size_t i = begin; i < end; ++i) {
                            const double* x = samples + i * static_cast<std::size_t>(model.dim);
                            for (int c = 0; c < model.k; ++c) logp[c] = density(model, c, x);
                            partial[chunk] += logsumexp(logp.data(), model.k);
                        }
                    });
    double ll = 0.0;
    for (double v : partial) ll += v;
    return ll / static_cast<double>(count);
}

GmmAssignment assign(const GmmModel& model, const double* z) {
    if (!model.fitted) throw std::invalid_argument("model is not fitted");
    const LogDensity density(model);
    std::vector<double> logp(static_cast<std::size_t>(model.k));
    for (int c = 0; c < model.k; ++c) logp[c] = density(model, c, z);
    const double lse = logsumexp(logp.data(), model.k);

    GmmAssignment out;
    out.responsibilities.resize(static_cast<std::size_t>(model.k));
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.k; ++c) {
        out.responsibilities[c] = std::exp(logp[c] - lse);
        if (logp[c] > best) {  // strict: ties keep the lowest id
            best = logp[c];
            out.cluster = c;
        }
    }
    return out;
}

std::vector<int> assign_batch(const GmmModel& model, const double* samples, std::size_t count,
                              int threads) {
    if (!model.fitted) throw std::invalid_argument("model is not fitted");
    const LogDensity density(model);
    std::vector<int> out(count);
    parallel_chunks(count, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<double> logp(static_cast<std::size_t>(model.k));
        for (std::size_t i = begin; i < end; ++i) {
            const double* x = samples + i * static_cast<std::size_t>(model.dim);
            int best_c = 0;
            double best = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < model.k; ++c) {
                const double lp = density(model, c, x);
                if (lp > best) {
                    best = lp;
                    best_c = c;
                }
            }
            out[i] = best_c;
        }
    });
    return out;
}

FitSample sample_for_fit(const std::vector<std::vector<double>>& frames, int dim,
                         int first_n_frames, std::size_t target, std::uint64_t seed) {
    if (frames.empty()) throw std::invalid_argument("no frames to sample from");
    if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
    const std::size_t use_frames =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(first_n_frames, 0)),
                              frames.size());

    struct Origin {
        int frame;
        std::size_t offset;
    };
    std::vector<Origin> pool;
    for (std::size_t f = 0; f < use_frames; ++f) {
        if (frames[f].size() % static_cast<std::size_t>(dim) != 0)
            throw std::invalid_argument("frame " + std::to_string(f) +
                                        " embedding array is not a multiple of dim");
        const std::size_t n = frames[f].size() / static_cast<std::size_t>(dim);
        for (std::size_t i = 0; i < n; ++i) pool.push_back({static_cast<int>(f), i});
    }

    const std::size_t take = std::min(target, pool.size());
    Rng rng(seed);
    // partial Fisher-Yates: the first `take` entries become the sample
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }

    FitSample out;
    out.dim = dim;
    out.count = take;
    out.data.resize(take * static_cast<std::size_t>(dim));
    out.origin_frame.resize(take);
    for (std::size_t i = 0; i < take; ++i) {
        const Origin& o = pool[i];
        std::copy_n(frames[static_cast<std::size_t>(o.frame)].data() +
                        o.offset * static_cast<std::size_t>(dim),
                    dim, out.data.begin() + i * static_cast<std::size_t>(dim));
        out.origin_frame[i] = o.frame;
    }
    return out;
}

bool ClusterMapping::is_moving(int cluster) const {
    return std::binary_search(moving_clusters.begin(), moving_clusters.end(), cluster);
}

ClusterMapping map_clusters(const std::vector<VoxelCoord>& coords,
                            const std::vector<int>& clusters, int k,
                            const std::vector<VoxelCoord>& moving_mask, double threshold) {
    if (coords.size() != clusters.size())
        throw std::invalid_argument("coords and cluster assignments differ in length");
    if (!(threshold > 0.0) || threshold > 1.0)
        throw std::invalid_argument("mapping threshold must lie in (0, 1]");

    ClusterMapping out;
    out.threshold = threshold;
    out.ious.assign(static_cast<std::size_t>(k), 0.0);
    if (moving_mask.empty()) {
        out.empty_reference = true;
        return out;
    }

    std::unordered_set<VoxelCoord, VoxelCoordHash> mask(moving_mask.begin(), moving_mask.end());
    std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
    std::vector<std::size_t> inter(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const int c = clusters[i];
        if (c < 0 || c >= k)
            throw std::invalid_argument("cluster id " + std::to_string(c) + " outside [0, " +
                                        std::to_string(k) + ")");
        ++cluster_size[static_cast<std::size_t>(c)];
        if (mask.count(coords[i])) ++inter[static_cast<std::size_t>(c)];
    }

    for (int c = 0; c < k; ++c) {
        const std::size_t uni =
            cluster_size[static_cast<std::size_t>(c)] + mask.size() - inter[static_cast<std::size_t>(c)];
        out.ious[static_cast<std::size_t>(c)] =
            uni == 0 ? 0.0
                     : static_cast<double>(inter[static_cast<std::size_t>(c)]) /
                           static_cast<double>(uni);
        if (out.ious[static_cast<std::size_t>(c)] >= threshold) out.moving_clusters.push_back(c);
    }
    return out;
}

std::vector<std::uint8_t> segment(const GmmModel& model, const ClusterMapping& mapping,
                                  const double* samples, std::size_t count, int threads) {
    std::vector<int> clusters = assign_batch(model, samples, count, threads);
    std::vector<std::uint8_t> moving(count);
    std::vector<std::uint8_t> lut(static_cast<std::size_t>(model.k), 0);
    for (int c : mapping.moving_clusters)
        if (c >= 0 && c < model.k) lut[static_cast<std::size_t>(c)] = 1;
    for (std::size_t i = 0; i < count; ++i) moving[i] = lut[static_cast<std::size_t>(clusters[i])];
    return moving;
}

namespace {

constexpr char kGmmMagic[4] = {'M', 'G', 'M', 'M'};
constexpr std::uint32_t kGmmVersion = 1;

}  // namespace

void save_gmm(const std::string& path, const GmmModel& model, const ClusterMapping* mapping) {
    if (!model.fitted) throw std::invalid_argument("refusing to save an unfitted model");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    using detail::write_le;
    detail::write_magic(out, kGmmMagic);
    write_le<std::uint32_t>(out, kGmmVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.k));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.dim));
    write_le<std::uint64_t>(out, model.seed);
    detail::write_f32_block(out, model.weights.data(), model.weights.size());
    detail::write_f32_block(out, model.means.data(), model.means.size());
    detail::write_f32_block(out, model.variances.data(), model.variances.size());
    if (mapping) {
        write_le<std::uint8_t>(out, 1);
        write_le<float>(out, static_cast<float>(mapping->threshold));
        if (mapping->ious.size() != static_cast<std::size_t>(model.k))
            throw std::invalid_argument("mapping IoU table does not match k");
        detail::write_f32_block(out, mapping->ious.data(), mapping->ious.size());
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mapping->moving_clusters.size()));
        for (int c : mapping->moving_clusters) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c));
    } else {
        write_le<std::uint8_t>(out, 0);
    }
    if (!out) throw IoError("failed writing mixture model to " + path);
}

LoadedGmm load_gmm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    using detail::read_le;
    detail::expect_magic(in, kGmmMagic, "mixture model file");
    auto version = read_le<std::uint32_t>(in);
    if (version != kGmmVersion)
        throw DataError("unsupported mixture model version " + std::to_string(version));

    LoadedGmm out;
    out.model.k = static_cast<int>(read_le<std::uint32_t>(in));
    out.model.dim = static_cast<int>(read_le<std::uint32_t>(in));
    if (out.model.k < 1 || out.model.dim < 1) throw DataError("mixture model has empty shape");
    out.model.seed = read_le<std::uint64_t>(in);
    const auto k = static_cast<std::size_t>(out.model.k);
    const auto dim = static_cast<std::size_t>(out.model.dim);
    out.model.weights.resize(k);
    out.model.means.resize(k * dim);
    out.model.variances.resize(k * dim);
    detail::read_f32_block(in, out.model.weights.data(), k);
    detail::read_f32_block(in, out.model.means.data(), k * dim);
    detail::read_f32_block(in, out.model.variances.data(), k * dim);
    // float32 storage nudges the weights off the simplex; restore it
    double wsum = 0.0;
    for (double w : out.model.weights) wsum += w;
    if (!(wsum > 0.0)) throw DataError("mixture weights in " + path + " do not sum to a positive value");
    for (double& w : out.model.weights) w /= wsum;
    out.model.fitted = true;

    if (read_le<std::uint8_t>(in) != 0) {
        out.has_mapping = true;
        out.mapping.threshold = read_le<float>(in);
        out.mapping.ious.resize(k);
        detail::read_f32_block(in, out.mapping.ious.data(), k);
        auto n = read_le<std::uint32_t>(in);
        out.mapping.moving_clusters.resize(n);
        for (std::uint32_t i = 0; i < n; ++i)
            out.mapping.moving_clusters[i] = static_cast<int>(read_le<std::uint32_t>(in));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw DataError("trailing bytes after mixture model in " + path);
    return out;
}

}  // namespace motseg
