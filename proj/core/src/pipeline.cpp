#include "motseg/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <utility>

#include "motseg/error.hpp"
#include "motseg/parallel.hpp"
#include "motseg/rng.hpp"

namespace motseg {

namespace fs = std::filesystem;

std::vector<std::string> list_frame_files(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw DataError("frame directory not found: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".bin")
            files.push_back(entry.path().string());
    }
    if (ec) throw IoError("cannot list " + dir + ": " + ec.message());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .bin frames in " + dir);
    return files;
}

namespace {

// Fixed streams off the run seed, so every random choice in a run is a pure
// function of model.seed.
enum SeedStream : std::uint64_t {
    kShuffleStream = 1,
    kReservoirStream = 2,
    kFitSampleStream = 3,
    kGmmStream = 4,
};

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return Rng::fork(base, stream).next();
}

std::string label_path_for(const std::string& frame_path, const std::string& labels_dir) {
    return (fs::path(labels_dir) / (fs::path(frame_path).stem().string() + ".label")).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

}  // namespace

void stream_frames(const PipelineConfig& config, bool want_truth, bool want_features,
                   const std::function<void(FrameContext&)>& fn) {
    const std::vector<std::string> files = list_frame_files(config.paths.frames_dir);
    std::vector<Pose> poses;
    if (!config.paths.poses.empty()) {
        poses = load_poses(config.paths.poses);
        if (poses.size() < files.size())
            throw DataError("pose file has " + std::to_string(poses.size()) + " entries for " +
                            std::to_string(files.size()) + " frames");
    }
    if (want_truth && config.paths.labels_dir.empty())
        throw ConfigError("labels are required but paths.labels_dir is not set");

    const int threads = resolve_threads(config.run.threads);
    std::optional<MotsExtractor> extractor;
    if (want_features) extractor.emplace(config.grid, threads);
    const LiftRule rule = parse_lift_rule(config.eval.lift_rule);

    for (std::size_t t = 0; t < files.size(); ++t) {
        PointFrame frame = load_point_frame(files[t], static_cast<int>(t));
        PointLabels labels;
        if (want_truth) {
            const std::vector<std::uint32_t> raw =
                load_label_file(label_path_for(files[t], config.paths.labels_dir));
            labels = make_point_labels(raw, config.eval.moving_labels, frame);
        }
        if (!poses.empty()) frame = apply_pose(frame, poses[t], poses[0]);
        GroundFiltered filtered = remove_ground(frame, config.eval.ground_z);

        FrameContext ctx;
        ctx.t = static_cast<int>(t);
        ctx.path = files[t];
        ctx.vox = voxelize(filtered.frame, config.grid.resolution);
        if (want_truth)
            ctx.truth = lift_labels(filter_labels(labels, filtered.index_map), ctx.vox, rule);
        if (extractor) ctx.batch = extractor->next(Voxelization(ctx.vox));
        fn(ctx);
    }
}

TrainOutput run_train(const PipelineConfig& config, std::ostream& log) {
    config.validate();
    const AeArchitecture arch = config.architecture();
    const auto C = static_cast<std::size_t>(arch.channels);
    const std::size_t cap = config.train.max_features;

    // packed reservoir: cap rows of C histories each
    std::vector<std::uint64_t> reservoir;
    std::size_t seen = 0;
    Rng pick = Rng::fork(config.model.seed, kReservoirStream);

    stream_frames(config, false, true, [&](FrameContext& ctx) {
        for (const MotsFeature& f : ctx.batch.features) {
            if (seen < cap) {
                reservoir.insert(reservoir.end(), f.rows.begin(), f.rows.end());
            } else {
                const std::uint64_t j = pick.below(seen + 1);
                if (j < cap)
                    std::copy(f.rows.begin(), f.rows.end(),
                              reservoir.begin() + static_cast<std::size_t>(j) * C);
            }
            ++seen;
        }
    });
    if (seen == 0) throw DataError("no occupied voxels found under " + config.paths.frames_dir);
    const std::size_t count = std::min(seen, cap);
    log << "extracted " << seen << " features";
    if (count < seen) log << ", subsampled to " << count;
    log << '\n';

    AeParameters params = init_parameters(arch, config.model.seed);
    TrainHyper hyper;
    hyper.batch = config.train.batch;
    hyper.lr = config.train.lr;
    hyper.epochs = config.train.epochs;
    hyper.seed = derive_seed(config.model.seed, kShuffleStream);
    hyper.log_interval = config.train.log_interval;
    hyper.threads = resolve_threads(config.run.threads);

    const int w = arch.window;
    SampleGather gather = [&reservoir, C, w](std::size_t index, double* out) {
        unpack_rows(reservoir.data() + index * C, C, w, out);
    };

    ensure_dir(config.paths.output_dir);
    TrainOutput out;
    out.features_seen = seen;
    out.features_trained = count;
    out.model_path = join(config.paths.output_dir, "model.bin");
    out.loss_path = join(config.paths.output_dir, "loss.txt");
    out.result = train(params, gather, count, hyper, &log);
    save_model(out.model_path, params);
    std::ofstream loss_file(out.loss_path);
    if (!loss_file) throw IoError("cannot open for writing: " + out.loss_path);
    write_loss_curve(loss_file, out.result.loss_curve);
    log << "trained " << out.result.steps << " steps, final batch loss " << out.result.final_loss
        << '\n';
    log << "model written to " << out.model_path << '\n';
    return out;
}

namespace {

void export_point_labels_pass(const PipelineConfig& config,
                              const std::vector<std::vector<std::uint8_t>>& masks,
                              std::ostream& log) {
    const std::vector<std::string> files = list_frame_files(config.paths.frames_dir);
    std::vector<Pose> poses;
    if (!config.paths.poses.empty()) poses = load_poses(config.paths.poses);
    const std::string out_dir = join(config.paths.output_dir, "labels_pred");
    ensure_dir(out_dir);

    for (std::size_t t = 0; t < files.size(); ++t) {
        PointFrame frame = load_point_frame(files[t], static_cast<int>(t));
        const std::size_t file_points = frame.size() + frame.dropped();
        const std::vector<std::int32_t> file_idx =
            loaded_to_file_indices(frame.size(), frame.dropped_indices);
        if (!poses.empty()) frame = apply_pose(frame, poses[t], poses[0]);
        GroundFiltered filtered = remove_ground(frame, config.eval.ground_z);
        Voxelization vox = voxelize(filtered.frame, config.grid.resolution);
        if (vox.coords.size() != masks[t].size())
            throw DataError("frame " + std::to_string(t) + " voxel count changed between passes");

        // dropped and ground points stay 0
        std::vector<std::uint32_t> raw(file_points, 0);
        for (std::size_t v = 0; v < vox.coords.size(); ++v) {
            if (!masks[t][v]) continue;
            for (std::int32_t p : vox.point_lists[v])
                raw[static_cast<std::size_t>(
                    file_idx[static_cast<std::size_t>(filtered.index_map[p])])] = 1;
        }
        write_label_file(join(out_dir, fs::path(files[t]).stem().string() + ".label"), raw);
    }
    log << "point labels written to " << out_dir << '\n';
}

}  // namespace

SegmentOutput run_segment(const PipelineConfig& config, const std::string& model_path,
                          const std::string& gmm_path, std::ostream& log) {
    config.validate();
    AeParameters params = load_model(model_path);
    const AeArchitecture want = config.architecture();
    if (params.arch.channels != want.channels || params.arch.window != want.window)
        throw ConfigError("model expects C=" + std::to_string(params.arch.channels) + ", w=" +
                          std::to_string(params.arch.window) + " but the grid config yields C=" +
                          std::to_string(want.channels) + ", w=" + std::to_string(want.window));
    const int threads = resolve_threads(config.run.threads);
    const int e = params.arch.code;
    const bool have_labels = !config.paths.labels_dir.empty();

    std::vector<std::vector<double>> codes;
    std::vector<std::vector<VoxelCoord>> coords;
    std::vector<std::vector<std::uint8_t>> truth;
    stream_frames(config, have_labels, true, [&](FrameContext& ctx) {
        codes.push_back(encode_mots_batch(params, ctx.batch, threads));
        coords.push_back(std::move(ctx.vox.coords));
        truth.push_back(std::move(ctx.truth));
    });
    const int n_frames = static_cast<int>(codes.size());

    SegmentOutput out;
    out.frames = n_frames;
    ensure_dir(config.paths.output_dir);

    auto compute_mapping = [&](const GmmModel& model) {
        if (!have_labels)
            throw ConfigError("cluster mapping needs ground truth; set paths.labels_dir or "
                              "supply a gmm file with a stored mapping");
        const int rf = config.resolved_reference_frame();
        if (rf < 0 || rf >= n_frames)
            throw ConfigError("gmm.reference_frame " + std::to_string(rf) +
                              " outside sequence of " + std::to_string(n_frames) + " frames");
        std::vector<VoxelCoord> mask;
        for (std::size_t i = 0; i < coords[rf].size(); ++i)
            if (truth[rf][i]) mask.push_back(coords[rf][i]);
        const std::vector<int> assigned =
            assign_batch(model, codes[rf].data(), coords[rf].size(), threads);
        ClusterMapping mapping =
            map_clusters(coords[rf], assigned, model.k, mask, config.gmm.threshold);
        if (mapping.empty_reference)
            log << "warning: reference frame " << rf
                << " has no moving voxels; no cluster was mapped moving\n";
        else
            log << "mapped " << mapping.moving_clusters.size() << " of " << model.k
                << " clusters moving on reference frame " << rf << '\n';
        return mapping;
    };

    GmmModel model;
    if (gmm_path.empty()) {
        const int fit_start = config.resolved_fit_start();
        if (fit_start < 0 || fit_start >= n_frames)
            throw ConfigError("gmm.fit_start " + std::to_string(fit_start) +
                              " outside sequence of " + std::to_string(n_frames) + " frames");
        const std::size_t fit_end = std::min<std::size_t>(
            static_cast<std::size_t>(fit_start) + config.gmm.first_n_frames, codes.size());
        std::vector<std::vector<double>> window(codes.begin() + fit_start,
                                                codes.begin() + fit_end);
        FitSample sample = sample_for_fit(window, e, config.gmm.first_n_frames,
                                          config.gmm.sample_target,
                                          derive_seed(config.model.seed, kFitSampleStream));
        if (sample.count == 0)
            throw DataError("no embeddings in frames [" + std::to_string(fit_start) + ", " +
                            std::to_string(fit_end) + ") to fit the mixture");
        GmmOptions opts;
        opts.max_iter = config.gmm.max_iter;
        opts.tol = config.gmm.tol;
        opts.var_floor = config.gmm.var_floor;
        opts.threads = threads;
        log << "fitting k=" << config.gmm.k << " mixture on " << sample.count
            << " embeddings from frames [" << fit_start << ", " << fit_end << ")\n";
        out.fit = fit_gmm(sample.data.data(), sample.count, e, config.gmm.k,
                          derive_seed(config.model.seed, kGmmStream), opts, &log);
        model = out.fit.model;
        log << "EM ran " << out.fit.ll_trace.size() << " iterations, mean log-likelihood "
            << out.fit.ll_trace.back() << '\n';
        out.mapping = compute_mapping(model);
        out.gmm_path = join(config.paths.output_dir, "gmm.bin");
        save_gmm(out.gmm_path, model, &out.mapping);
    } else {
        LoadedGmm loaded = load_gmm(gmm_path);
        if (loaded.model.dim != e)
            throw ConfigError("gmm file embeds dimension " + std::to_string(loaded.model.dim) +
                              " but the model's code size is " + std::to_string(e));
        model = std::move(loaded.model);
        out.mapping = loaded.has_mapping ? loaded.mapping : compute_mapping(model);
        out.gmm_path = gmm_path;
    }

    std::vector<VoxelPrediction> rows;
    std::vector<std::vector<std::uint8_t>> masks(static_cast<std::size_t>(n_frames));
    std::vector<FrameEval> evals;
    for (int t = 0; t < n_frames; ++t) {
        masks[t] = segment(model, out.mapping, codes[t].data(), coords[t].size(), threads);
        for (std::size_t i = 0; i < coords[t].size(); ++i)
            rows.push_back({coords[t][i], t, masks[t][i]});
        if (have_labels) evals.push_back(frame_iou(masks[t], truth[t], t));
    }
    out.predictions_path = join(config.paths.output_dir, "predictions.csv");
    write_predictions_csv_file(out.predictions_path, std::move(rows));
    log << "predictions written to " << out.predictions_path << '\n';
    if (have_labels) {
        out.has_eval = true;
        out.eval = sequence_miou(std::move(evals));
        log << "sequence mIoU (moving) " << std::setprecision(4) << out.eval.miou << '\n';
    }
    if (config.run.export_point_labels) export_point_labels_pass(config, masks, log);
    return out;
}

EvalOutput run_eval(const PipelineConfig& config, const std::string& predictions_path,
                    std::ostream& log) {
    config.validate();
    if (config.paths.labels_dir.empty())
        throw ConfigError("evaluation needs ground truth; set paths.labels_dir");

    std::map<int, std::vector<VoxelPrediction>> by_frame;
    for (VoxelPrediction& r : read_predictions_csv_file(predictions_path))
        by_frame[r.frame_index].push_back(r);

    EvalOutput out;
    std::vector<FrameEval> evals;
    int n_frames = 0;
    stream_frames(config, true, false, [&](FrameContext& ctx) {
        n_frames = ctx.t + 1;
        std::unordered_map<VoxelCoord, std::size_t, VoxelCoordHash> index;
        index.reserve(ctx.vox.coords.size());
        for (std::size_t i = 0; i < ctx.vox.coords.size(); ++i) index[ctx.vox.coords[i]] = i;
        std::vector<std::uint8_t> pred(ctx.vox.coords.size(), 0);
        if (auto it = by_frame.find(ctx.t); it != by_frame.end()) {
            for (const VoxelPrediction& r : it->second) {
                auto f = index.find(r.coord);
                if (f == index.end())
                    throw DataError("prediction voxel (" + std::to_string(r.coord.x) + "," +
                                    std::to_string(r.coord.y) + "," + std::to_string(r.coord.z) +
                                    ") at frame " + std::to_string(ctx.t) +
                                    " is not occupied after ground removal");
                if (r.moving) pred[f->second] = 1;
            }
        }
        FrameEval ev = frame_iou(pred, ctx.truth, ctx.t);
        if (ev.empty_pair) ++out.empty_pairs;
        evals.push_back(ev);
    });
    if (!by_frame.empty() && by_frame.rbegin()->first >= n_frames)
        throw DataError("prediction file references frame " +
                        std::to_string(by_frame.rbegin()->first) + " beyond the sequence of " +
                        std::to_string(n_frames) + " frames");

    out.eval = sequence_miou(std::move(evals));
    ensure_dir(config.paths.output_dir);
    out.table_path = join(config.paths.output_dir, "eval.csv");
    std::ofstream table(out.table_path);
    if (!table) throw IoError("cannot open for writing: " + out.table_path);
    table << "frame,tp,fp,fn,iou\n" << std::setprecision(6) << std::fixed;
    for (const FrameEval& f : out.eval.frames)
        table << f.frame_index << ',' << f.tp << ',' << f.fp << ',' << f.fn << ',' << f.iou
              << '\n';
    if (!table) throw IoError("failed writing " + out.table_path);
    log << "mIoU (moving) over " << n_frames << " frames: " << std::setprecision(4)
        << out.eval.miou << " (" << out.empty_pairs << " frames empty on both sides)\n";
    return out;
}

double run_scene(PipelineConfig config, const std::string& scene_dir, std::ostream& log) {
    config.paths.frames_dir = join(scene_dir, "velodyne");
    config.paths.labels_dir = join(scene_dir, "labels");
    const TrainOutput trained = run_train(config, log);
    const SegmentOutput segmented = run_segment(config, trained.model_path, "", log);
    if (!segmented.has_eval) throw DataError("scene " + scene_dir + " has no labels to score");
    return segmented.eval.miou;
}

SweepTable run_sweep(const PipelineConfig& base, const SweepAxes& axes,
                     const std::vector<std::string>& scene_dirs, std::ostream& log) {
    axes.validate();
    const std::string root = base.paths.output_dir;

    auto handle = [&](const SweepConfig& cell, const std::string& scene) {
        PipelineConfig config = base;
        config.grid.radius = cell.r;
        config.grid.window = cell.w;
        config.model.e = cell.e;
        config.gmm.k = cell.k;
        config.model.c1 = config.model.c2 = config.model.c3 = 0;  // re-plan per radius
        char name[64];
        std::snprintf(name, sizeof name, "r%d_e%d_k%d_w%d", cell.r, cell.e, cell.k, cell.w);
        const auto at = std::find(scene_dirs.begin(), scene_dirs.end(), scene);
        const auto scene_idx = static_cast<std::size_t>(at - scene_dirs.begin());
        config.paths.output_dir =
            join(join(join(root, "sweep"), name), "scene" + std::to_string(scene_idx));
        log << "sweep " << name << " on " << scene << '\n';
        const double miou = run_scene(config, scene, log);
        log << name << " " << scene << " mIoU " << std::setprecision(4) << miou << '\n';
        return miou;
    };

    SweepTable table = sweep(axes, scene_dirs, handle);
    for (const SweepCell& cell : table.cells)
        if (cell.failed)
            log << "sweep cell r=" << cell.config.r << " e=" << cell.config.e
                << " k=" << cell.config.k << " w=" << cell.config.w
                << " failed: " << cell.error << '\n';

    ensure_dir(root);
    const std::string table_path = join(root, "sweep.csv");
    std::ofstream table_file(table_path);
    if (!table_file) throw IoError("cannot open for writing: " + table_path);
    write_sweep_csv(table_file, table);

    const std::string axes_path = join(root, "sweep_axes.csv");
    std::ofstream axes_file(axes_path);
    if (!axes_file) throw IoError("cannot open for writing: " + axes_path);
    write_axis_csv(axes_file, axis_aggregates(table));
    log << "sweep table written to " << table_path << '\n';
    return table;
}

}  // namespace motseg
