#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "motseg/config.hpp"
#include "motseg/error.hpp"
#include "motseg/pipeline.hpp"
#include "motseg/synthetic.hpp"

namespace {

struct ConfigCli {
    std::string config_path;
    // argv order per key; applied after the file so flags win
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_options(CLI::App* cmd, ConfigCli& state) {
    cmd->add_option("--config", state.config_path,
                    "config file of 'section.key = value' lines")
        ->check(CLI::ExistingFile);
    for (const std::string& key : motseg::config_keys()) {
        cmd->add_option(
            "--" + key,
            [&state, key](const std::vector<std::string>& values) {
                for (const std::string& v : values) state.overrides.emplace_back(key, v);
                return true;
            },
            "override " + key);
    }
}

motseg::PipelineConfig resolve_config(const ConfigCli& state) {
    motseg::PipelineConfig config;
    if (!state.config_path.empty()) config = motseg::load_config_file(state.config_path);
    for (const auto& [key, value] : state.overrides)
        motseg::apply_override(config, key, value);
    return config;
}

std::string preset_names() {
    std::string names;
    for (const motseg::ScenePreset& p : motseg::presets()) {
        if (!names.empty()) names += ", ";
        names += p.name;
    }
    return names;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"unsupervised moving-object segmentation for stationary lidar videos"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
    std::string preset, synth_out;
    std::uint64_t synth_seed = 0;
    int synth_frames = 0;
    synth->add_option("--preset", preset, "scene preset: " + preset_names())->required();
    synth->add_option("--out", synth_out, "directory for velodyne/ and labels/")->required();
    auto* seed_opt = synth->add_option("--seed", synth_seed, "override the preset seed");
    auto* frames_opt = synth->add_option("--frames", synth_frames, "override the frame count");
    synth->callback([&] {
        motseg::SceneSpec spec = motseg::find_preset(preset);
        if (seed_opt->count() > 0) spec.seed = synth_seed;
        if (frames_opt->count() > 0) spec.frames = synth_frames;
        motseg::write_scene(synth_out, spec);
        std::cerr << "wrote " << spec.frames << " frames to " << synth_out << '\n';
        std::cout << synth_out << '\n';
    });

    auto* train = app.add_subcommand("train", "extract features and train the autoencoder");
    ConfigCli train_cfg;
    add_config_options(train, train_cfg);
    train->callback([&] {
        const motseg::TrainOutput out = motseg::run_train(resolve_config(train_cfg), std::cerr);
        std::cout << out.model_path << '\n';
    });

    auto* segment = app.add_subcommand("segment", "cluster embeddings and emit voxel masks");
    ConfigCli seg_cfg;
    add_config_options(segment, seg_cfg);
    std::string model_path, gmm_path;
    segment->add_option("--model", model_path, "trained autoencoder file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* gmm_opt = segment->add_option("--gmm", gmm_path, "previously fitted mixture file")
                        ->check(CLI::ExistingFile);
    auto* fit_opt = segment->add_flag("--fit-gmm", "fit a fresh mixture before segmenting");
    gmm_opt->excludes(fit_opt);
    segment->callback([&] {
        if (gmm_opt->count() == 0 && fit_opt->count() == 0)
            throw motseg::ConfigError("segment needs either --gmm <file> or --fit-gmm");
        const motseg::SegmentOutput out =
            motseg::run_segment(resolve_config(seg_cfg), model_path, gmm_path, std::cerr);
        std::cout << out.predictions_path << '\n';
        if (out.has_eval)
            std::cout << "miou " << std::setprecision(6) << out.eval.miou << '\n';
    });

    auto* eval = app.add_subcommand("eval", "score a prediction file against ground truth");
    ConfigCli eval_cfg;
    add_config_options(eval, eval_cfg);
    std::string predictions_path;
    eval->add_option("--predictions", predictions_path, "predictions csv from segment")
        ->required()
        ->check(CLI::ExistingFile);
    eval->callback([&] {
        const motseg::EvalOutput out =
            motseg::run_eval(resolve_config(eval_cfg), predictions_path, std::cerr);
        std::cout << std::setprecision(6) << out.eval.miou << '\n';
    });

    auto* sweep = app.add_subcommand("sweep", "grid-run scenes over r/e/k/w and tabulate mIoU");
    ConfigCli sweep_cfg;
    add_config_options(sweep, sweep_cfg);
    motseg::SweepAxes axes;
    std::vector<std::string> scenes;
    sweep->add_option("--r", axes.r, "neighborhood radii")->delimiter(',');
    sweep->add_option("--e", axes.e, "embedding sizes")->delimiter(',');
    sweep->add_option("--k", axes.k, "mixture component counts")->delimiter(',');
    sweep->add_option("--w", axes.w, "window lengths")->delimiter(',');
    sweep->add_option("--scene", scenes, "scene directory holding velodyne/ and labels/")
        ->required()
        ->take_all();
    sweep->callback([&] {
        const motseg::PipelineConfig config = resolve_config(sweep_cfg);
        motseg::run_sweep(config, axes, scenes, std::cerr);
        std::cout << config.paths.output_dir << "/sweep.csv" << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const motseg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const motseg::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 4;
    } catch (const motseg::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
