#include "motseg/config.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "motseg/error.hpp"
#include "motseg/evaluation.hpp"

namespace motseg {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw ConfigError("cannot parse '" + value + "' as " + expected + " for " + key);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) bad_value(key, value, "an integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        if (!value.empty() && value[0] == '-') bad_value(key, value, "a non-negative integer");
        std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) bad_value(key, value, "a non-negative integer");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "a non-negative integer");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) bad_value(key, value, "a number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad_value(key, value, "a number");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "a boolean (true/false)");
}

std::vector<std::uint32_t> parse_labels(const std::string& key, const std::string& value) {
    std::vector<std::uint32_t> out;
    std::string token;
    std::istringstream ss(value);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) bad_value(key, value, "a comma-separated label list");
        out.push_back(static_cast<std::uint32_t>(parse_u64(key, token)));
    }
    if (out.empty()) bad_value(key, value, "a comma-separated label list");
    return out;
}

struct KeyHandler {
    const char* key;
    void (*set)(PipelineConfig&, const std::string&, const std::string&);
};

const KeyHandler kHandlers[] = {
    {"paths.frames_dir", [](PipelineConfig& c, const std::string&, const std::string& v) { c.paths.frames_dir = v; }},
    {"paths.poses", [](PipelineConfig& c, const std::string&, const std::string& v) { c.paths.poses = v; }},
    {"paths.labels_dir", [](PipelineConfig& c, const std::string&, const std::string& v) { c.paths.labels_dir = v; }},
    {"paths.output_dir", [](PipelineConfig& c, const std::string&, const std::string& v) { c.paths.output_dir = v; }},
    {"grid.m", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.grid.resolution = parse_double(k, v); }},
    {"grid.w", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.grid.window = static_cast<int>(parse_int(k, v)); }},
    {"grid.r", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.grid.radius = static_cast<int>(parse_int(k, v)); }},
    {"model.e", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.e = static_cast<int>(parse_int(k, v)); }},
    {"model.c1", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.c1 = static_cast<int>(parse_int(k, v)); }},
    {"model.c2", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.c2 = static_cast<int>(parse_int(k, v)); }},
    {"model.c3", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.c3 = static_cast<int>(parse_int(k, v)); }},
    {"model.fc_hidden", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.fc_hidden = static_cast<int>(parse_int(k, v)); }},
    {"model.relu_literal", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.relu_literal = parse_bool(k, v); }},
    {"model.seed", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.model.seed = parse_u64(k, v); }},
    {"train.batch", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.train.batch = static_cast<int>(parse_int(k, v)); }},
    {"train.lr", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.train.lr = parse_double(k, v); }},
    {"train.epochs", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.train.epochs = static_cast<int>(parse_int(k, v)); }},
    {"train.max_features", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.train.max_features = parse_u64(k, v); }},
    {"train.log_interval", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.train.log_interval = static_cast<int>(parse_int(k, v)); }},
    {"gmm.k", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.k = static_cast<int>(parse_int(k, v)); }},
    {"gmm.sample_target", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.sample_target = parse_u64(k, v); }},
    {"gmm.first_n_frames", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.first_n_frames = static_cast<int>(parse_int(k, v)); }},
    {"gmm.threshold", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.threshold = parse_double(k, v); }},
    {"gmm.reference_frame", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.reference_frame = static_cast<int>(parse_int(k, v)); }},
    {"gmm.fit_start", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.fit_start = static_cast<int>(parse_int(k, v)); }},
    {"gmm.max_iter", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.max_iter = static_cast<int>(parse_int(k, v)); }},
    {"gmm.tol", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.tol = parse_double(k, v); }},
    {"gmm.var_floor", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.gmm.var_floor = parse_double(k, v); }},
    {"eval.ground_z", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.eval.ground_z = parse_double(k, v); }},
    {"eval.lift_rule", [](PipelineConfig& c, const std::string&, const std::string& v) { c.eval.lift_rule = v; }},
    {"eval.moving_labels", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.eval.moving_labels = parse_labels(k, v); }},
    {"run.threads", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.run.threads = static_cast<int>(parse_int(k, v)); }},
    {"run.cache", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.run.cache = parse_bool(k, v); }},
    {"run.export_point_labels", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.run.export_point_labels = parse_bool(k, v); }},
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const KeyHandler& h : kHandlers) out.emplace_back(h.key);
        return out;
    }();
    return keys;
}

void apply_override(PipelineConfig& config, const std::string& key, const std::string& value) {
    for (const KeyHandler& h : kHandlers) {
        if (key == h.key) {
            h.set(config, key, value);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

PipelineConfig parse_config(std::istream& in) {
    PipelineConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) +
                              " is not 'section.key = value': '" + line + "'");
        apply_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

void PipelineConfig::validate() const {
    grid.validate();
    if (grid.window < 7)
        throw ConfigError("grid.w must be at least 7 for the autoencoder, got " +
                          std::to_string(grid.window));
    if (model.e < 1) throw ConfigError("model.e must be positive");
    if (model.fc_hidden < 1) throw ConfigError("model.fc_hidden must be positive");
    const bool any_plan = model.c1 > 0 || model.c2 > 0 || model.c3 > 0;
    const bool full_plan = model.c1 > 0 && model.c2 > 0 && model.c3 > 0;
    if (any_plan && !full_plan)
        throw ConfigError("model.c1/c2/c3 must be given together (or all omitted for the "
                          "default plan)");
    if (train.batch < 1) throw ConfigError("train.batch must be positive");
    if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (train.epochs < 1) throw ConfigError("train.epochs must be positive");
    if (train.max_features < 1) throw ConfigError("train.max_features must be positive");
    if (train.log_interval < 1) throw ConfigError("train.log_interval must be positive");
    if (gmm.k < 1) throw ConfigError("gmm.k must be at least 1");
    if (gmm.sample_target < 1) throw ConfigError("gmm.sample_target must be positive");
    if (gmm.first_n_frames < 1) throw ConfigError("gmm.first_n_frames must be positive");
    if (!(gmm.threshold > 0.0) || gmm.threshold > 1.0)
        throw ConfigError("gmm.threshold must lie in (0, 1]");
    if (gmm.reference_frame < -1)
        throw ConfigError("gmm.reference_frame must be -1 (auto) or a frame index");
    if (gmm.fit_start < -1) throw ConfigError("gmm.fit_start must be -1 (auto) or a frame index");
    if (gmm.max_iter < 1) throw ConfigError("gmm.max_iter must be positive");
    if (!(gmm.tol > 0.0)) throw ConfigError("gmm.tol must be positive");
    if (!(gmm.var_floor > 0.0)) throw ConfigError("gmm.var_floor must be positive");
    parse_lift_rule(eval.lift_rule);
    if (eval.moving_labels.empty()) throw ConfigError("eval.moving_labels must be non-empty");
    if (run.threads < 0) throw ConfigError("run.threads must be non-negative");
    architecture().validate();
}

AeArchitecture PipelineConfig::architecture() const {
    AeArchitecture arch;
    arch.channels = grid.channels();
    arch.window = grid.window;
    arch.conv_channels = model.c1 > 0 ? std::array<int, 3>{model.c1, model.c2, model.c3}
                                      : AeArchitecture::default_plan(arch.channels);
    arch.fc_hidden = model.fc_hidden;
    arch.code = model.e;
    arch.relu_literal = model.relu_literal;
    return arch;
}

int PipelineConfig::resolved_reference_frame() const {
    return gmm.reference_frame >= 0 ? gmm.reference_frame : grid.window - 1;
}

int PipelineConfig::resolved_fit_start() const {
    return gmm.fit_start >= 0 ? gmm.fit_start : grid.window - 1;
}

void write_config(std::ostream& out, const PipelineConfig& c) {
    out << "paths.frames_dir = " << c.paths.frames_dir << '\n';
    out << "paths.poses = " << c.paths.poses << '\n';
    out << "paths.labels_dir = " << c.paths.labels_dir << '\n';
    out << "paths.output_dir = " << c.paths.output_dir << '\n';
    out << "grid.m = " << c.grid.resolution << '\n';
    out << "grid.w = " << c.grid.window << '\n';
    out << "grid.r = " << c.grid.radius << '\n';
    out << "model.e = " << c.model.e << '\n';
    out << "model.c1 = " << c.model.c1 << '\n';
    out << "model.c2 = " << c.model.c2 << '\n';
    out << "model.c3 = " << c.model.c3 << '\n';
    out << "model.fc_hidden = " << c.model.fc_hidden << '\n';
    out << "model.relu_literal = " << (c.model.relu_literal ? "true" : "false") << '\n';
    out << "model.seed = " << c.model.seed << '\n';
    out << "train.batch = " << c.train.batch << '\n';
    out << "train.lr = " << c.train.lr << '\n';
    out << "train.epochs = " << c.train.epochs << '\n';
    out << "train.max_features = " << c.train.max_features << '\n';
    out << "train.log_interval = " << c.train.log_interval << '\n';
    out << "gmm.k = " << c.gmm.k << '\n';
    out << "gmm.sample_target = " << c.gmm.sample_target << '\n';
    out << "gmm.first_n_frames = " << c.gmm.first_n_frames << '\n';
    out << "gmm.threshold = " << c.gmm.threshold << '\n';
    out << "gmm.reference_frame = " << c.gmm.reference_frame << '\n';
    out << "gmm.fit_start = " << c.gmm.fit_start << '\n';
    out << "gmm.max_iter = " << c.gmm.max_iter << '\n';
    out << "gmm.tol = " << c.gmm.tol << '\n';
    out << "gmm.var_floor = " << c.gmm.var_floor << '\n';
    out << "eval.ground_z = " << c.eval.ground_z << '\n';
    out << "eval.lift_rule = " << c.eval.lift_rule << '\n';
    out << "eval.moving_labels = ";
    for (std::size_t i = 0; i < c.eval.moving_labels.size(); ++i)
        out << (i ? "," : "") << c.eval.moving_labels[i];
    out << '\n';
    out << "run.threads = " << c.run.threads << '\n';
    out << "run.cache = " << (c.run.cache ? "true" : "false") << '\n';
    out << "run.export_point_labels = " << (c.run.export_point_labels ? "true" : "false") << '\n';
}

}  // namespace motseg
